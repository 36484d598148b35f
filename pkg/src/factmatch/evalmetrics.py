"""Ranking metrics with CLEF-scorer semantics and annotator agreement."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Sequence

import numpy as np

from .errors import DegenerateData, UnknownQuery

DEFAULT_KS = (1, 3, 5, 10, 20)


@dataclass
class RankedList:
    query_id: str
    doc_ids: List[str]
    scores: List[float]

    def __post_init__(self):
        self.doc_ids = list(self.doc_ids)
        self.scores = [float(s) for s in self.scores]
        if len(self.doc_ids) != len(self.scores):
            raise ValueError("doc_ids and scores differ in length")
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise ValueError(f"duplicate candidates in ranking for query {self.query_id}")
        if any(b > a for a, b in zip(self.scores, self.scores[1:])):
            raise ValueError(f"scores for query {self.query_id} are not non-increasing")

    def __len__(self):
        return len(self.doc_ids)

    @classmethod
    def from_scores(cls, query_id: str, scores: Mapping[str, float], k: int = None) -> "RankedList":
        """Order by score descending, ties by ascending doc id."""
        items = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        if k is not None:
            items = items[:k]
        return cls(query_id, [d for d, _ in items], [s for _, s in items])


def _query_metrics(ranked: Sequence[str], relevant: set, ks, one):
    hits = [d in relevant for d in ranked]
    R = len(relevant)
    rr = 0 * one
    for pos, h in enumerate(hits, 1):
        if h:
            rr = one / pos
            break
    out = {"MRR": rr}
    for k in ks:
        top = hits[:k]
        out[f"P@{k}"] = one * sum(top) / k
        ap = 0 * one
        found = 0
        for pos, h in enumerate(top, 1):
            if h:
                found += 1
                ap += one * found / pos
        out[f"MAP@{k}"] = ap / min(R, k)
    return out


def evaluate(runs: Sequence[RankedList], qrels: Mapping[str, Mapping[str, int]],
             ks: Sequence[int] = DEFAULT_KS, exact: bool = False) -> Dict[str, float]:
    """MRR, MAP@K (denominator min(R, K)) and P@K averaged over judged queries.

    Queries whose qrels hold no relevant document are excluded and counted
    under ``excluded_queries``; judged queries absent from ``runs`` score 0.
    With ``exact`` the metric values are ``Fraction`` objects.
    """
    one = Fraction(1) if exact else 1.0
    by_q = {}
    for run in runs:
        if run.query_id not in qrels:
            raise UnknownQuery(run.query_id)
        by_q[run.query_id] = run
    judged = [q for q in qrels if any(r > 0 for r in qrels[q].values())]
    names = ["MRR"] + [f"MAP@{k}" for k in ks] + [f"P@{k}" for k in ks]
    totals = {n: 0 * one for n in names}
    for q in judged:
        relevant = {d for d, r in qrels[q].items() if r > 0}
        ranked = by_q[q].doc_ids if q in by_q else []
        for n, v in _query_metrics(ranked, relevant, ks, one).items():
            totals[n] += v
    n_q = len(judged)
    result = {n: (totals[n] / n_q if n_q else 0 * one) for n in names}
    result["queries"] = n_q
    result["excluded_queries"] = len(qrels) - n_q
    return result


def format_table(rows: Mapping[str, Mapping[str, float]], ks: Sequence[int] = DEFAULT_KS) -> str:
    """Plain-text table: MRR, Precision@K block, MAP@K block (percent)."""
    cols = ["MRR"] + [f"P@{k}" for k in ks] + [f"MAP@{k}" for k in ks]
    name_w = max([5] + [len(n) for n in rows])
    head = "Model".ljust(name_w) + "".join(c.rjust(8) for c in cols)
    lines = [head, "-" * len(head)]
    for name, m in rows.items():
        lines.append(name.ljust(name_w) + "".join(f"{100 * float(m[c]):8.2f}" for c in cols))
    return "\n".join(lines) + "\n"


def fleiss_kappa(ratings) -> float:
    """Fleiss' kappa for an (items x raters) array of category labels."""
    ratings = np.asarray(ratings)
    if ratings.ndim != 2 or ratings.shape[0] == 0:
        raise ValueError("ratings must be a non-empty items x raters array")
    n_items, n_raters = ratings.shape
    if n_raters < 2:
        raise ValueError("need at least two raters")
    cats = np.unique(ratings)
    counts = np.stack([(ratings == c).sum(axis=1) for c in cats], axis=1).astype(float)
    p_j = counts.sum(axis=0) / (n_items * n_raters)
    P_i = ((counts * counts).sum(axis=1) - n_raters) / (n_raters * (n_raters - 1))
    P_bar = P_i.mean()
    P_e = float((p_j * p_j).sum())
    if np.isclose(P_e, 1.0, rtol=0, atol=1e-15):
        raise DegenerateData("all ratings fall in a single category; kappa undefined")
    return float((P_bar - P_e) / (1.0 - P_e))


def cohen_kappa(a, b) -> float:
    a, b = list(a), list(b)
    if len(a) != len(b):
        raise ValueError("label sequences differ in length")
    if not a:
        raise ValueError("empty label sequences")
    n = len(a)
    cats = sorted(set(a) | set(b), key=repr)
    p_o = sum(x == y for x, y in zip(a, b)) / n
    p_e = sum((a.count(c) / n) * (b.count(c) / n) for c in cats)
    if p_e >= 1.0:
        raise DegenerateData("chance agreement is 1; kappa undefined")
    return (p_o - p_e) / (1.0 - p_e)
