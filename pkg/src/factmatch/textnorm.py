"""Text normalization shared by the Jaccard labeler, lexical retrievers and
the encoder vocabulary.

Pipeline order: lowercase, drop URLs, digits -> "0", tweet-aware
tokenization, strip handles, drop stopwords and punctuation-only tokens,
Porter stem.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, List, Optional, Sequence

from nltk.tokenize import TweetTokenizer

from .porter import stem as porter_stem

URL_RE = re.compile(r"https?://\S+|\bt\.co/\S*", re.IGNORECASE)
DIGITS_RE = re.compile(r"\d+")

_tokenizer = TweetTokenizer(preserve_case=True, reduce_len=False, strip_handles=False)

TokenList = List[str]


def load_stopwords(path: Optional[str] = None) -> frozenset:
    """Read a stopword file: one token per line, '#' lines are comments."""
    if path is None:
        text = resources.files("factmatch.data").joinpath("stopwords_en.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset:
    return load_stopwords()


@dataclass(frozen=True)
class NormConfig:
    stopwords: frozenset = field(default_factory=default_stopwords)
    strip_handles: bool = True
    stem: bool = True

    @property
    def stopword_hash(self) -> str:
        blob = "\n".join(sorted(self.stopwords)).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def fingerprint(self) -> str:
        return f"sw={self.stopword_hash};handles={int(self.strip_handles)};stem={int(self.stem)}"

    def to_dict(self) -> dict:
        return {
            "stopword_hash": self.stopword_hash,
            "strip_handles": self.strip_handles,
            "stem": self.stem,
        }


DEFAULT_CONFIG = NormConfig()


def _is_punct(token: str) -> bool:
    return not any(ch.isalnum() for ch in token)


def normalize(text: str, cfg: NormConfig = DEFAULT_CONFIG) -> TokenList:
    if not text:
        return []
    text = text.lower()
    text = URL_RE.sub(" ", text)
    text = DIGITS_RE.sub("0", text)
    out = []
    for tok in _tokenizer.tokenize(text):
        if tok.startswith("@"):
            if cfg.strip_handles:
                continue
            tok = tok.lstrip("@")
        if tok.startswith("#"):
            tok = tok.lstrip("#")
        if not tok or _is_punct(tok) or tok in cfg.stopwords:
            continue
        if cfg.stem:
            tok = porter_stem(tok)
        if tok:
            out.append(tok)
    return out


def normalize_many(texts: Iterable[str], cfg: NormConfig = DEFAULT_CONFIG) -> List[TokenList]:
    return [normalize(t, cfg) for t in texts]


def jaccard(a: Sequence[str], b: Sequence[str]) -> float:
    """Jaccard similarity of the unique tokens; 0.0 when both sides are empty."""
    sa, sb = set(a), set(b)
    union = sa | sb
    if not union:
        return 0.0
    return len(sa & sb) / len(union)
