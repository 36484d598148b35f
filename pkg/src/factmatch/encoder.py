"""Siamese bag-of-embeddings encoder producing unit-norm vectors.

Both sides share one embedding table and one affine projection; a text is
mean-pooled over its token embeddings (CLS/SEP included), projected, and
L2-normalized.
"""

from __future__ import annotations

import json
import zlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyInput, FormatError, NumericalError

CLS, SEP = "[CLS]", "[SEP]"
CLS_ID, SEP_ID = 0, 1
MODEL_FORMAT = "factmatch-encoder/1"


@dataclass
class Vocab:
    tokens: List[str]
    hash_buckets: int
    index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.tokens[:2] != [CLS, SEP]:
            raise ValueError("vocab must start with the special tokens")
        self.index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def size(self) -> int:
        """Dedicated ids plus hash buckets (rows of the embedding table)."""
        return len(self.tokens) + self.hash_buckets

    def lookup(self, token: str) -> int:
        i = self.index.get(token)
        if i is not None:
            return i
        if self.hash_buckets == 0:
            raise KeyError(token)
        return len(self.tokens) + zlib.crc32(token.encode("utf-8")) % self.hash_buckets

    def to_bytes(self) -> bytes:
        return json.dumps({"tokens": self.tokens, "hash_buckets": self.hash_buckets},
                          separators=(",", ":")).encode("utf-8")


def build_vocab(token_lists: Iterable[Sequence[str]], min_count: int = 1, hash_buckets: int = 256) -> Vocab:
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter()
    for toks in token_lists:
        counts.update(toks)
    kept = sorted((t for t, c in counts.items() if c >= min_count and t not in (CLS, SEP)),
                  key=lambda t: (-counts[t], t))
    return Vocab([CLS, SEP] + kept, hash_buckets)


@dataclass(frozen=True)
class EncodedInput:
    ids: Tuple[int, ...]
    side: str = "tweet"


def _truncate_longest_first(fields: List[List[str]], budget: int) -> List[List[str]]:
    fields = [list(f) for f in fields]
    while sum(len(f) for f in fields) > budget:
        longest = max(range(len(fields)), key=lambda i: len(fields[i]))
        fields[longest].pop()
    return fields


class EncoderModel:
    def __init__(self, vocab: Vocab, E: np.ndarray, W: np.ndarray, b: np.ndarray,
                 seed: int = 0, max_seq: int = 128, norm_fingerprint: str = ""):
        self.vocab = vocab
        self.params = {"E": E, "W": W, "b": b}
        self.seed = seed
        self.max_seq = max_seq
        self.norm_fingerprint = norm_fingerprint

    @classmethod
    def init(cls, vocab: Vocab, dim: int = 64, hidden: int = 64, seed: int = 0,
             max_seq: int = 128, norm_fingerprint: str = "") -> "EncoderModel":
        rng = np.random.default_rng(seed)
        E = rng.uniform(-0.05, 0.05, size=(vocab.size, dim))
        # scaled Gaussian columns, orthonormalized where shapes allow
        W = rng.normal(0.0, 1.0, size=(dim, hidden))
        q, _ = np.linalg.qr(W if dim >= hidden else W.T)
        W = q if dim >= hidden else q.T
        W = W * np.sqrt(max(dim, hidden) / dim)
        b = np.zeros(hidden)
        return cls(vocab, E, W, b, seed, max_seq, norm_fingerprint)

    @property
    def E(self):
        return self.params["E"]

    @property
    def W(self):
        return self.params["W"]

    @property
    def b(self):
        return self.params["b"]

    @property
    def hidden(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "EncoderModel":
        return EncoderModel(self.vocab, self.E.copy(), self.W.copy(), self.b.copy(),
                            self.seed, self.max_seq, self.norm_fingerprint)

    # -- inputs --------------------------------------------------------------

    def tweet_input(self, tokens: Sequence[str]) -> EncodedInput:
        """``[CLS] tokens [SEP]``, truncated from the end."""
        toks = list(tokens)[: max(self.max_seq - 2, 0)]
        if not toks:
            raise EmptyInput("tweet has no tokens")
        return EncodedInput((CLS_ID, *map(self.vocab.lookup, toks), SEP_ID), "tweet")

    def article_input(self, fields: Sequence[Sequence[str]]) -> EncodedInput:
        """``[CLS] f1 [SEP] f2 [SEP] ...``; truncation removes tokens one by one from the longest field."""
        budget = self.max_seq - 1 - len(fields)
        fields = _truncate_longest_first([list(f) for f in fields], max(budget, 0))
        if not any(fields):
            raise EmptyInput("article has no tokens")
        ids = [CLS_ID]
        for f in fields:
            ids.extend(self.vocab.lookup(t) for t in f)
            ids.append(SEP_ID)
        return EncodedInput(tuple(ids), "article")

    # -- forward / backward -----------------------------------------------

    def forward(self, inputs: Sequence[EncodedInput]):
        if not inputs:
            return np.zeros((0, self.hidden)), None
        pooled = np.stack([self.E[list(x.ids)].mean(axis=0) for x in inputs])
        Z = pooled @ self.W + self.b
        norms = np.linalg.norm(Z, axis=1, keepdims=True)
        if not np.all(np.isfinite(Z)) or np.any(norms < 1e-12):
            raise NumericalError("degenerate projection in encoder forward pass")
        U = Z / norms
        return U, (inputs, pooled, U, norms)

    def backward(self, cache, gU: np.ndarray) -> Dict[str, np.ndarray]:
        inputs, pooled, U, norms = cache
        gZ = (gU - U * np.sum(U * gU, axis=1, keepdims=True)) / norms
        grads = {
            "W": pooled.T @ gZ,
            "b": gZ.sum(axis=0),
            "E": np.zeros_like(self.E),
        }
        gP = gZ @ self.W.T
        for x, g in zip(inputs, gP):
            ids = np.fromiter(x.ids, dtype=np.int64)
            np.add.at(grads["E"], ids, g / len(ids))
        return grads

    def encode_many(self, inputs: Sequence[EncodedInput]) -> np.ndarray:
        return self.forward(inputs)[0]

    # -- persistence -------------------------------------------------------

    def to_dict(self, extra: Optional[dict] = None) -> dict:
        d = {
            "format": MODEL_FORMAT,
            "vocab": {"tokens": self.vocab.tokens, "hash_buckets": self.vocab.hash_buckets},
            "shapes": {k: list(v.shape) for k, v in self.params.items()},
            "params": {k: v.ravel().tolist() for k, v in self.params.items()},
            "seed": self.seed,
            "max_seq": self.max_seq,
            "norm": self.norm_fingerprint,
        }
        if extra:
            d["meta"] = extra
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderModel":
        if d.get("format") != MODEL_FORMAT:
            raise FormatError(f"not an encoder model file (format={d.get('format')!r})")
        vocab = Vocab(d["vocab"]["tokens"], d["vocab"]["hash_buckets"])
        p = {k: np.asarray(d["params"][k], dtype=float).reshape(d["shapes"][k]) for k in ("E", "W", "b")}
        return cls(vocab, p["E"], p["W"], p["b"], d.get("seed", 0), d.get("max_seq", 128), d.get("norm", ""))

    def save(self, path, extra: Optional[dict] = None) -> None:
        from .fileio import write_json

        write_json(path, self.to_dict(extra))

    @classmethod
    def load(cls, path) -> "EncoderModel":
        from .fileio import read_json

        return cls.from_dict(read_json(path))


def encode(model: EncoderModel, inp: EncodedInput) -> np.ndarray:
    return model.forward([inp])[0][0]


def similarity(model: EncoderModel, a: EncodedInput, b: EncodedInput) -> float:
    U = model.encode_many([a, b])
    return float(np.clip(U[0] @ U[1], -1.0, 1.0))


def article_combo_input(model: EncoderModel, article, combo: str, cfg) -> EncodedInput:
    from .textnorm import normalize

    return model.article_input([normalize(f, cfg) for f in article.fields(combo)])
