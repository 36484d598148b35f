"""Lexical baselines: Okapi BM25 over an inverted index and TF.IDF cosine."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

from .corpus import FactCheckArticle
from .errors import EmptyIndex, UnknownDoc
from .evalmetrics import RankedList
from .textnorm import DEFAULT_CONFIG, NormConfig, normalize

FIELD_COMBOS = ("c", "ct", "cts")


def article_tokens(article: FactCheckArticle, combo: str, cfg: NormConfig = DEFAULT_CONFIG) -> List[str]:
    return normalize(" ".join(f for f in article.fields(combo) if f), cfg)


def tokenize_collection(articles: Sequence[FactCheckArticle], combo: str,
                        cfg: NormConfig = DEFAULT_CONFIG) -> Dict[str, List[str]]:
    return {a.id: article_tokens(a, combo, cfg) for a in articles}


@dataclass
class InvertedIndex:
    doc_ids: List[str]
    postings: Dict[str, List[Tuple[int, int]]]
    doc_lens: List[int]
    avgdl: float
    field_combo: str = "cts"
    k1: float = 1.2
    b: float = 0.75

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    @classmethod
    def build(cls, docs: Mapping[str, Sequence[str]], field_combo: str = "cts",
              k1: float = 1.2, b: float = 0.75) -> "InvertedIndex":
        doc_ids = sorted(docs)
        postings: Dict[str, List[Tuple[int, int]]] = {}
        lens = []
        for i, did in enumerate(doc_ids):
            tf = Counter(docs[did])
            lens.append(sum(tf.values()))
            for tok in sorted(tf):
                postings.setdefault(tok, []).append((i, tf[tok]))
        avgdl = sum(lens) / len(lens) if lens else 0.0
        idx = cls(doc_ids, dict(sorted(postings.items())), lens, avgdl, field_combo, k1, b)
        idx._check()
        return idx

    def _check(self):
        total = [0] * self.n_docs
        for plist in self.postings.values():
            assert all(a[0] < b[0] for a, b in zip(plist, plist[1:])), "postings not sorted"
            for i, tf in plist:
                total[i] += tf
        assert total == self.doc_lens, "document lengths disagree with postings"

    def idf(self, token: str) -> float:
        df = len(self.postings.get(token, ()))
        return math.log((self.n_docs - df + 0.5) / (df + 0.5) + 1.0)

    def scores(self, query: Sequence[str]) -> Dict[str, float]:
        if self.n_docs == 0:
            raise EmptyIndex("BM25 index holds no documents")
        acc = [0.0] * self.n_docs
        for tok in query:
            plist = self.postings.get(tok)
            if not plist:
                continue
            idf = self.idf(tok)
            for i, tf in plist:
                norm = self.k1 * (1.0 - self.b + self.b * self.doc_lens[i] / self.avgdl)
                acc[i] += idf * tf * (self.k1 + 1.0) / (tf + norm)
        return dict(zip(self.doc_ids, acc))

    def to_bytes(self) -> bytes:
        return json.dumps(
            {
                "doc_ids": self.doc_ids,
                "postings": self.postings,
                "doc_lens": self.doc_lens,
                "avgdl": self.avgdl,
                "field_combo": self.field_combo,
                "k1": self.k1,
                "b": self.b,
            },
            sort_keys=True,
            separators=(",", ":"),
        ).encode("utf-8")


def bm25_rank(index: InvertedIndex, query: Sequence[str], k: int, query_id: str = "") -> RankedList:
    if k < 1:
        raise ValueError("k must be >= 1")
    return RankedList.from_scores(query_id, index.scores(query), k)


class TfIdfModel:
    """Smoothed idf ``ln((1+N)/(1+df)) + 1`` with raw term counts, L2-normalized."""

    def __init__(self, docs: Mapping[str, Sequence[str]], field_combo: str = "cts"):
        self.field_combo = field_combo
        self.doc_ids = sorted(docs)
        n = len(self.doc_ids)
        df = Counter()
        for did in self.doc_ids:
            df.update(set(docs[did]))
        self.idf = {t: math.log((1 + n) / (1 + c)) + 1.0 for t, c in sorted(df.items())}
        self.vectors: Dict[str, Dict[str, float]] = {did: self.vectorize(docs[did]) for did in self.doc_ids}

    def vectorize(self, tokens: Sequence[str]) -> Dict[str, float]:
        tf = Counter(t for t in tokens if t in self.idf)
        vec = {t: c * self.idf[t] for t, c in tf.items()}
        norm = math.sqrt(sum(v * v for v in vec.values()))
        if norm == 0.0:
            return {}
        return {t: v / norm for t, v in sorted(vec.items())}

    def _cosine(self, qvec, dvec) -> float:
        if len(qvec) > len(dvec):
            qvec, dvec = dvec, qvec
        s = sum(w * dvec.get(t, 0.0) for t, w in qvec.items())
        return min(1.0, max(0.0, s))

    def score(self, query: Sequence[str], article_id: str) -> float:
        if article_id not in self.vectors:
            raise UnknownDoc(article_id)
        return self._cosine(self.vectorize(query), self.vectors[article_id])

    def scores(self, query: Sequence[str]) -> Dict[str, float]:
        if not self.doc_ids:
            raise EmptyIndex("TF.IDF model holds no documents")
        qvec = self.vectorize(query)
        return {did: self._cosine(qvec, self.vectors[did]) for did in self.doc_ids}


def tfidf_score(model: TfIdfModel, query: Sequence[str], article_id: str) -> float:
    return model.score(query, article_id)


def tfidf_rank(model: TfIdfModel, query: Sequence[str], k: int, query_id: str = "") -> RankedList:
    return RankedList.from_scores(query_id, model.scores(query), k)
