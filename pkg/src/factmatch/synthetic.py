"""Synthetic data generators for tests, benchmarks and the bundled mini corpus."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np


@dataclass
class NoisyPairs:
    tweets: List[List[str]]
    articles: List[List[List[str]]]
    noisy: np.ndarray


def make_noisy_pairs(n_pairs: int = 400, noise: float = 0.3, n_articles: int = 100,
                     topic_words: int = 5, seed: int = 0) -> NoisyPairs:
    """Tweet/article token pairs where a ``noise`` fraction of pairs get another
    pair's article (a cyclic shift over the corrupted subset, so no corrupted
    pair keeps its own article)."""
    rng = np.random.default_rng(seed)
    vocab = [f"w{i}" for i in range(n_articles * 3)]
    fillers = [f"f{i}" for i in range(40)]
    topics = [list(rng.choice(vocab, size=topic_words, replace=False)) for _ in range(n_articles)]
    title_len = max(2, topic_words // 2)
    docs = [[t[:title_len], t[title_len:]] for t in topics]
    owner = np.arange(n_pairs) % n_articles
    rng.shuffle(owner)
    tweets = []
    for a in owner:
        words = list(rng.choice(topics[a], size=topic_words - 2, replace=False))
        words += list(rng.choice(fillers, size=2, replace=False))
        rng.shuffle(words)
        tweets.append(words)
    noisy = np.zeros(n_pairs, dtype=bool)
    bad = rng.choice(n_pairs, size=int(round(noise * n_pairs)), replace=False)
    noisy[bad] = True
    paired = owner.copy()
    if len(bad) > 1:
        paired[bad] = owner[np.roll(bad, 1)]
        same = paired[bad] == owner[bad]
        paired[bad[same]] = (owner[bad[same]] + 1) % n_articles
    return NoisyPairs(tweets, [docs[a] for a in paired], noisy)


@dataclass
class LtrData:
    features: np.ndarray
    relevance: np.ndarray
    qid: np.ndarray


def make_separable_ltr(n_queries: int = 200, n_candidates: int = 10, n_noise: int = 4,
                       seed: int = 0) -> LtrData:
    """Relevance is ``f1 > 0.5``; the remaining features are uniform noise.

    Every query gets at least one relevant and one non-relevant candidate.
    """
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n_queries * n_candidates, 1 + n_noise))
    qid = np.repeat(np.arange(n_queries), n_candidates)
    for q in range(n_queries):
        rows = np.flatnonzero(qid == q)
        f1 = X[rows, 0]
        if not (f1 > 0.5).any():
            X[rows[0], 0] = rng.uniform(0.5001, 1.0)
        if (X[rows, 0] > 0.5).all():
            X[rows[-1], 0] = rng.uniform(0.0, 0.5)
    rel = (X[:, 0] > 0.5).astype(int)
    return LtrData(X, rel, qid)
