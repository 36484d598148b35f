"""Distant supervision: score crowd tweet/article pairs, bin them, build splits.

Pairs come from conversation triples: the tweet a crowd fact-checker
replied to (``reply``) or the conversation root (``root``) is paired with
the linked article.  Scores are either averaged token Jaccard against title
and subtitle, or encoder cosine against the full article.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .corpus import ConversationTriple, FactCheckArticle, Tweet, canonical_url
from .encoder import EncoderModel
from .errors import EmptyInput, EmptySplit
from .textnorm import DEFAULT_CONFIG, NormConfig, jaccard, normalize

STRATEGIES = ("jaccard", "cosine")
TARGETS = ("root", "reply", "best")
JACCARD_EDGES = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))
COSINE_EDGES = tuple(np.round(np.linspace(-1.0, 1.0, 11), 10))


@dataclass(frozen=True)
class LabeledPair:
    tweet_id: str
    article_url: str
    target_text_kind: str
    score: float
    strategy: str
    label: float = 1.0

    @property
    def key(self) -> Tuple[str, str]:
        return (self.tweet_id, self.article_url)


def jaccard_score(tweet: Tweet, article: FactCheckArticle, cfg: NormConfig = DEFAULT_CONFIG) -> float:
    """Mean of the tweet's Jaccard similarity to the title and to the subtitle."""
    toks = normalize(tweet.text, cfg)
    return (jaccard(toks, normalize(article.title, cfg)) + jaccard(toks, normalize(article.subtitle, cfg))) / 2.0


def cosine_score(tweet: Tweet, article: FactCheckArticle, model: EncoderModel,
                 cfg: NormConfig = DEFAULT_CONFIG) -> float:
    """Cosine between the tweet and the ``title [SEP] subtitle [SEP] claim`` encodings."""
    t = model.tweet_input(normalize(tweet.text, cfg))
    a = model.article_input([normalize(f, cfg) for f in article.fields("cts")])
    U = model.encode_many([t, a])
    return float(np.clip(U[0] @ U[1], -1.0, 1.0))


def score_triples(triples: Iterable[ConversationTriple], articles: Mapping[str, FactCheckArticle],
                  strategy: str = "jaccard", target: str = "best", cfg: NormConfig = DEFAULT_CONFIG,
                  model: Optional[EncoderModel] = None) -> List[LabeledPair]:
    """Score each triple's root and/or reply tweet against its linked article.

    ``target="best"`` keeps whichever of root and reply scores higher (root
    wins ties).  Triples whose article is unknown, or whose target tweets
    are missing or normalize to nothing under the cosine strategy, are skipped.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}")
    if strategy == "cosine" and model is None:
        raise ValueError("cosine strategy needs an encoder model")
    by_url = {canonical_url(k): v for k, v in articles.items()}
    out = []
    for tr in triples:
        article = by_url.get(canonical_url(tr.article_url))
        if article is None:
            continue
        kinds = ("root", "reply") if target == "best" else (target,)
        cands = []
        for kind in kinds:
            tw = getattr(tr, kind)
            if tw is None:
                continue
            try:
                s = jaccard_score(tw, article, cfg) if strategy == "jaccard" else cosine_score(tw, article, model, cfg)
            except EmptyInput:
                continue
            cands.append(LabeledPair(tw.id, article.id, kind, s, strategy))
        if cands:
            best = cands[0]
            for c in cands[1:]:
                if c.score > best.score:
                    best = c
            out.append(best)
    return out


def build_split(pairs: Sequence[LabeledPair], strategy: str, threshold: float) -> List[LabeledPair]:
    """Pairs scoring strictly above ``threshold``, one per (tweet, article), labels 1.0."""
    lo, hi = (0.0, 1.0) if strategy == "jaccard" else (-1.0, 1.0)
    if not lo <= threshold <= hi:
        raise ValueError(f"threshold {threshold} outside the {strategy} score range")
    best: Dict[Tuple[str, str], LabeledPair] = {}
    for p in pairs:
        if p.strategy != strategy or not p.score > threshold:
            continue
        cur = best.get(p.key)
        if cur is None or p.score > cur.score:
            best[p.key] = p
    if not best:
        raise EmptySplit(f"no {strategy} pair scores above {threshold}")
    return [replace(p, label=1.0) for p in sorted(best.values(), key=lambda p: p.key)]


# -- binning -----------------------------------------------------------------

@dataclass(frozen=True)
class BinTable:
    """Score histogram with optional per-bin annotation outcomes.

    ``fractions`` and ``rates`` are percentages; ``rates[i]`` is None for a
    bin without annotated pairs.
    """

    edges: Tuple[float, ...]
    counts: Tuple[int, ...]
    annotated: Tuple[int, ...]
    correct: Tuple[int, ...]

    def __post_init__(self):
        n = len(self.edges) - 1
        if n < 1 or any(len(x) != n for x in (self.counts, self.annotated, self.correct)):
            raise ValueError("bin table columns disagree with the edges")
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise ValueError("bin edges must increase")
        if any(c > a for c, a in zip(self.correct, self.annotated)):
            raise ValueError("more correct than annotated pairs in a bin")

    @property
    def total(self) -> int:
        return int(sum(self.counts))

    @property
    def fractions(self) -> List[float]:
        t = self.total
        return [100.0 * c / t if t else 0.0 for c in self.counts]

    @property
    def rates(self) -> List[Optional[float]]:
        return [100.0 * c / a if a else None for c, a in zip(self.correct, self.annotated)]

    def labels(self) -> List[str]:
        out = []
        for i, (a, b) in enumerate(zip(self.edges, self.edges[1:])):
            close = "]" if i == len(self.edges) - 2 else ")"
            out.append(f"[{a:g};{b:g}{close}")
        return out

    def to_dict(self) -> dict:
        return {
            "edges": list(self.edges),
            "counts": list(self.counts),
            "annotated": list(self.annotated),
            "correct": list(self.correct),
            "fractions": self.fractions,
            "rates": self.rates,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BinTable":
        n = len(d["edges"]) - 1
        return cls(tuple(d["edges"]), tuple(d["counts"]),
                   tuple(d.get("annotated", [0] * n)), tuple(d.get("correct", [0] * n)))


def assign_bins(scores: Sequence[float], edges: Sequence[float]) -> np.ndarray:
    """Half-open bins ``[a, b)`` except the last, which is closed."""
    s = np.asarray(scores, dtype=float)
    e = np.asarray(edges, dtype=float)
    if s.size and (s.min() < e[0] or s.max() > e[-1]):
        raise ValueError(f"score outside the bin range [{e[0]}, {e[-1]}]")
    ix = np.searchsorted(e, s, side="right") - 1
    return np.minimum(ix, len(e) - 2)


def bin_statistics(pairs: Sequence[LabeledPair], annotations: Optional[Mapping[Tuple[str, str], bool]] = None,
                   edges: Optional[Sequence[float]] = None) -> BinTable:
    if edges is None:
        strategy = pairs[0].strategy if pairs else "jaccard"
        edges = JACCARD_EDGES if strategy == "jaccard" else COSINE_EDGES
    n = len(edges) - 1
    ix = assign_bins([p.score for p in pairs], edges)
    counts = np.bincount(ix, minlength=n)
    annotated = np.zeros(n, dtype=int)
    correct = np.zeros(n, dtype=int)
    if annotations:
        for p, b in zip(pairs, ix):
            verdict = annotations.get(p.key)
            if verdict is not None:
                annotated[b] += 1
                correct[b] += bool(verdict)
    table = BinTable(tuple(float(e) for e in edges), tuple(int(c) for c in counts),
                     tuple(int(a) for a in annotated), tuple(int(c) for c in correct))
    if table.total and abs(sum(table.fractions) - 100.0) > 0.01:
        raise AssertionError("bin fractions do not sum to 100%")
    return table


def estimate_matches(bins: BinTable, total_pairs: int) -> Dict[str, float]:
    """Expected share of correct pairs: sum of bin fraction times bin correct rate."""
    frac = 0.0
    for f, r in zip(bins.fractions, bins.rates):
        if f == 0.0:
            continue
        if r is None:
            raise ValueError("a populated bin has no annotations")
        frac += (f / 100.0) * (r / 100.0)
    return {"fraction": frac, "percent": 100.0 * frac, "count": int(round(frac * total_pairs))}


# -- bundled tables ------------------------------------------------------------

def load_bin_fixture(name: str) -> BinTable:
    """Reference bin tables: ``jaccard-reply``, ``jaccard-conversation`` or ``cosine``."""
    data = json.loads(resources.files("factmatch.data").joinpath("bin_tables.json").read_text("utf-8"))
    if name not in data["tables"]:
        raise KeyError(f"unknown bin fixture {name!r}; have {sorted(data['tables'])}")
    return BinTable.from_dict(data["tables"][name])


def fixture_total_pairs() -> int:
    data = json.loads(resources.files("factmatch.data").joinpath("bin_tables.json").read_text("utf-8"))
    return int(data["total_pairs"])


def expand_fixture(table: BinTable, strategy: str = "jaccard"):
    """Synthetic pairs and annotations that bin back into ``table``.

    Each pair sits at its bin midpoint; within a bin the first ``annotated``
    pairs carry a verdict and the first ``correct`` of those are correct.
    """
    pairs: List[LabeledPair] = []
    ann: Dict[Tuple[str, str], bool] = {}
    for b, (lo, hi) in enumerate(zip(table.edges, table.edges[1:])):
        mid = (lo + hi) / 2.0
        for j in range(table.counts[b]):
            p = LabeledPair(f"t{b}-{j}", f"https://example.org/fc/{b}-{j}", "reply", mid, strategy)
            pairs.append(p)
            if j < table.annotated[b]:
                ann[p.key] = j < table.correct[b]
    return pairs, ann
