"""LambdaMART re-ranking over reciprocal-rank and score features."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from .errors import DegenerateData, LayoutMismatch, MissingScorer
from .evalmetrics import RankedList

logger = logging.getLogger(__name__)

LAYOUT_VERSION = 1
MODEL_FORMAT = "factmatch-lambdamart/1"

ENSEMBLE_SLOTS = (("tfidf", "c"), ("tfidf", "ct"), ("tfidf", "cts"),
                  ("encoder", "c"), ("encoder", "ct"), ("encoder", "cts"))
SINGLE_SLOTS = (("tfidf", "cts"), ("encoder", "cts"))


def feature_names(slots: Sequence[Tuple[str, str]]) -> List[str]:
    """Fixed layout: for each (scorer, combo) slot, reciprocal rank then score."""
    names = []
    for scorer, combo in slots:
        names += [f"{scorer}.{combo}.rr", f"{scorer}.{combo}.score"]
    return names


@dataclass
class FeatureSet:
    names: List[str]
    query_ids: List[str]
    doc_ids: List[str]
    X: np.ndarray
    layout_version: int = LAYOUT_VERSION

    def groups(self) -> Dict[str, np.ndarray]:
        out: Dict[str, list] = {}
        for i, q in enumerate(self.query_ids):
            out.setdefault(q, []).append(i)
        return {q: np.asarray(ix) for q, ix in out.items()}

    def concat(self, other: "FeatureSet") -> "FeatureSet":
        if other.names != self.names:
            raise LayoutMismatch("feature layouts differ")
        return FeatureSet(self.names, self.query_ids + other.query_ids,
                          self.doc_ids + other.doc_ids, np.vstack([self.X, other.X]))


def _ranks(scores: Mapping[str, float]) -> Dict[str, int]:
    order = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return {d: r for r, (d, _) in enumerate(order, 1)}


def build_features(query_id: str, rankings: Mapping[Tuple[str, str], Mapping[str, float]],
                   slots: Sequence[Tuple[str, str]], primary: Tuple[str, str] = ("encoder", "cts"),
                   topk: int = 100) -> FeatureSet:
    """Features for the top-``topk`` candidates of the primary ranking.

    ``rankings`` maps each (scorer, combo) slot to that scorer's scores over
    the whole collection; reciprocal ranks come from those full rankings.
    """
    for slot in list(slots) + [primary]:
        if slot not in rankings:
            raise MissingScorer(f"no ranking for scorer slot {slot}")
    primary_scores = rankings[primary]
    candidates = [d for d, _ in sorted(primary_scores.items(), key=lambda kv: (-kv[1], kv[0]))[:topk]]
    cols = []
    for slot in slots:
        scores = rankings[slot]
        missing = [d for d in candidates if d not in scores]
        if missing:
            raise MissingScorer(f"scorer {slot} does not rank candidate(s) {missing[:3]}")
        ranks = _ranks(scores)
        cols.append([1.0 / ranks[d] for d in candidates])
        cols.append([float(scores[d]) for d in candidates])
    X = np.asarray(cols, dtype=float).T if cols else np.zeros((len(candidates), 0))
    return FeatureSet(feature_names(slots), [query_id] * len(candidates), candidates, X)


# -- lambda gradients ---------------------------------------------------------

def map_swap_deltas(rel: np.ndarray, k: int = 5) -> np.ndarray:
    """|change in AP@k| for swapping ranks a and b of a ranked list.

    ``rel`` holds binary relevance in current rank order, shape (n,) or
    (queries, n); the result has a trailing (n, n) pair of axes and is zero
    wherever both entries share a label.  AP@k is normalized by
    ``min(R, k)`` with R the number of relevant items in the list.
    """
    rel = np.asarray(rel, dtype=float)
    single = rel.ndim == 1
    rel = np.atleast_2d(rel)
    _, n = rel.shape
    R = rel.sum(axis=1)
    pos = np.arange(1, n + 1, dtype=float)
    cum = np.cumsum(rel, axis=1)
    within = pos <= k
    term = np.where(within, rel / pos, 0.0)
    T = np.concatenate([np.zeros((len(rel), 1)), np.cumsum(term, axis=1)], axis=1)  # T[:, x]: ranks <= x
    p = np.arange(n)[:, None]
    q = np.arange(n)[None, :]
    P = pos[p]
    Qp = pos[q]
    cp = cum[:, :, None]
    cq = cum[:, None, :]
    t_q1 = T[:, q.ravel()][:, None, :]          # T[q-1] with 0-based q == T index q
    t_p = T[:, p.ravel() + 1][:, :, None]       # T[p]
    t_p1 = T[:, p.ravel()][:, :, None]          # T[p-1]
    t_q = T[:, q.ravel() + 1][:, None, :]       # T[q]
    # the relevant item sits at rank P, the non-relevant one at rank Qp
    d_down = -np.where(P <= k, cp / P, 0.0) - (t_q1 - t_p) + np.where(Qp <= k, cq / Qp, 0.0)
    d_up = np.where(Qp <= k, (cq + 1) / Qp, 0.0) + (t_p1 - t_q) - np.where(P <= k, cp / P, 0.0)
    delta = np.abs(np.where(P < Qp, d_down, d_up))
    denom = np.minimum(R, k)
    delta = delta / np.where(denom > 0, denom, 1.0)[:, None, None]
    mask = (rel[:, :, None] > 0) & (rel[:, None, :] == 0)
    delta = np.where(mask, delta, 0.0)
    delta = delta + np.swapaxes(delta, 1, 2)
    return delta[0] if single else delta


def _batch_lambdas(scores: np.ndarray, rel: np.ndarray, k: int, sigma: float):
    """Lambdas and Newton weights for equal-length queries stacked row-wise."""
    m, n = scores.shape
    order = np.lexsort((np.broadcast_to(np.arange(n), (m, n)), -scores), axis=1)
    rel_ranked = np.take_along_axis(rel, order, axis=1)
    d_ranked = map_swap_deltas(rel_ranked, k)
    rank_of = np.argsort(order, axis=1)
    rows = np.arange(m)[:, None, None]
    D = d_ranked[rows, rank_of[:, :, None], rank_of[:, None, :]]
    pair = (rel[:, :, None] > 0) & (rel[:, None, :] <= 0)
    diff = scores[:, :, None] - scores[:, None, :]
    rho = 1.0 / (1.0 + np.exp(np.clip(sigma * diff, -500, 500)))
    g = np.where(pair, sigma * D * rho, 0.0)
    h = np.where(pair, sigma * sigma * D * rho * (1.0 - rho), 0.0)
    lam = g.sum(axis=2) - g.sum(axis=1)
    w = h.sum(axis=2) + h.sum(axis=1)
    return lam, w


def query_lambdas(scores: np.ndarray, rel: np.ndarray, k: int = 5, sigma: float = 1.0):
    """Lambda gradients and Newton weights for one query.

    The current ranking orders by score descending, ties by input order.
    Positive lambda means the item should move up.
    """
    scores = np.asarray(scores, dtype=float)
    rel = np.asarray(rel, dtype=float)
    lam, w = _batch_lambdas(scores[None, :], rel[None, :], k, sigma)
    return lam[0], w[0]


# -- model ------------------------------------------------------------------

@dataclass
class Tree:
    feature: List[int]
    threshold: List[float]
    left: List[int]
    right: List[int]
    value: List[float]
    gain: List[float]

    def predict(self, X: np.ndarray) -> np.ndarray:
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = left[node] >= 0
        while active.any():
            n = node[active]
            go_left = X[rows[active], feature[n]] <= threshold[n]
            node[active] = np.where(go_left, left[n], right[n])
            active = left[node] >= 0
        return np.asarray(self.value)[node]


@dataclass
class LambdaMartConfig:
    n_trees: int = 300
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 5
    k: int = 5
    sigma: float = 1.0
    seed: int = 0


@dataclass
class GbdtModel:
    names: List[str]
    trees: List[Tree] = field(default_factory=list)
    learning_rate: float = 0.1
    best_iteration: int = 0
    train_history: List[float] = field(default_factory=list)
    layout_version: int = LAYOUT_VERSION
    metric: str = "MAP@5"

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        s = np.zeros(X.shape[0])
        for t in self.trees:
            s += self.learning_rate * t.predict(X)
        return s

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "layout_version": self.layout_version,
            "features": self.names,
            "metric": self.metric,
            "learning_rate": self.learning_rate,
            "best_iteration": self.best_iteration,
            "train_history": self.train_history,
            "trees": [t.__dict__ for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtModel":
        if d.get("format") != MODEL_FORMAT:
            raise LayoutMismatch(f"not a LambdaMART model file (format={d.get('format')!r})")
        return cls(
            names=list(d["features"]),
            trees=[Tree(**t) for t in d["trees"]],
            learning_rate=d["learning_rate"],
            best_iteration=d.get("best_iteration", len(d["trees"])),
            train_history=list(d.get("train_history", [])),
            layout_version=d["layout_version"],
            metric=d.get("metric", "MAP@5"),
        )


def _export_tree(reg: DecisionTreeRegressor, X: np.ndarray, lam: np.ndarray, w: np.ndarray) -> Tree:
    t = reg.tree_
    leaves = reg.apply(X)
    value = np.zeros(t.node_count)
    for leaf in np.unique(leaves):
        mask = leaves == leaf
        den = w[mask].sum()
        value[leaf] = lam[mask].sum() / den if den > 1e-12 else 0.0
    gain = np.zeros(t.node_count)
    for node in range(t.node_count):
        l, r = t.children_left[node], t.children_right[node]
        if l >= 0:
            gain[node] = (t.weighted_n_node_samples[node] * t.impurity[node]
                          - t.weighted_n_node_samples[l] * t.impurity[l]
                          - t.weighted_n_node_samples[r] * t.impurity[r])
    return Tree(
        feature=[int(f) if f >= 0 else -1 for f in t.feature],
        threshold=[float(x) for x in t.threshold],
        left=[int(x) for x in t.children_left],
        right=[int(x) for x in t.children_right],
        value=value.tolist(),
        gain=np.maximum(gain, 0.0).tolist(),
    )


def _batch_map(scores: np.ndarray, rel: np.ndarray, k: int) -> np.ndarray:
    m, n = scores.shape
    order = np.lexsort((np.broadcast_to(np.arange(n), (m, n)), -scores), axis=1)
    top = np.take_along_axis(rel, order, axis=1)[:, :k]
    hits = np.cumsum(top, axis=1)
    ap = (top * hits / np.arange(1, top.shape[1] + 1)).sum(axis=1)
    return ap / np.minimum(rel.sum(axis=1), k)


def _train_map(scores, rel, buckets, k) -> float:
    vals = [_batch_map(scores[ix], rel[ix], k) for ix in buckets]
    return float(np.concatenate(vals).mean())


def train_lambdamart(features: FeatureSet, qrels: Mapping[str, Mapping[str, int]],
                     config: LambdaMartConfig = LambdaMartConfig()) -> GbdtModel:
    """Boosted regression trees fit to |delta MAP@k|-weighted lambda gradients.

    The returned model is truncated at the iteration with the best training MAP@k.
    """
    X = features.X
    rel = np.array([1 if qrels.get(q, {}).get(d, 0) > 0 else 0
                    for q, d in zip(features.query_ids, features.doc_ids)])
    groups = [ix for ix in features.groups().values()
              if 0 < rel[ix].sum() < len(ix)]
    if not groups:
        raise DegenerateData("no query has both a relevant and a non-relevant candidate")
    if X.shape[1] == 0 or np.all(X.max(axis=0) == X.min(axis=0)):
        raise DegenerateData("all features are constant")
    rows = np.concatenate(groups)
    Xt, yt = X[rows], rel[rows].astype(float)
    # queries with equal candidate counts are stacked so lambdas run batched
    by_len: Dict[int, list] = {}
    start = 0
    for ix in groups:
        by_len.setdefault(len(ix), []).append(np.arange(start, start + len(ix)))
        start += len(ix)
    buckets = [np.stack(v) for _, v in sorted(by_len.items())]

    model = GbdtModel(features.names, learning_rate=config.learning_rate)
    scores = np.zeros(len(rows))
    best = (_train_map(scores, yt, buckets, config.k), 0)
    model.train_history.append(best[0])
    for it in range(config.n_trees):
        lam = np.zeros(len(rows))
        w = np.zeros(len(rows))
        for ix in buckets:
            lam[ix], w[ix] = _batch_lambdas(scores[ix], yt[ix], config.k, config.sigma)
        if not np.any(lam):
            break
        reg = DecisionTreeRegressor(max_depth=config.max_depth, min_samples_leaf=config.min_samples_leaf,
                                    random_state=config.seed + it)
        reg.fit(Xt, lam)
        tree = _export_tree(reg, Xt, lam, w)
        model.trees.append(tree)
        scores += config.learning_rate * tree.predict(Xt)
        m = _train_map(scores, yt, buckets, config.k)
        model.train_history.append(m)
        if m > best[0]:
            best = (m, it + 1)
    model.best_iteration = best[1]
    model.trees = model.trees[: best[1]]
    logger.info("LambdaMART: best training MAP@%d %.4f at iteration %d", config.k, best[0], best[1])
    return model


def rerank(model: GbdtModel, features: FeatureSet, query_id: Optional[str] = None) -> List[RankedList]:
    """Reorder each query's candidates by model score; ties keep the input order."""
    if features.names != model.names or features.layout_version != model.layout_version:
        raise LayoutMismatch("feature layout does not match the model")
    out = []
    for q, ix in features.groups().items():
        if query_id is not None and q != query_id:
            continue
        s = model.predict(features.X[ix])
        order = np.lexsort((np.arange(len(ix)), -s))
        out.append(RankedList(q, [features.doc_ids[ix[i]] for i in order], [float(s[i]) for i in order]))
    return out


def feature_importance(model: GbdtModel) -> Dict[str, float]:
    totals = np.zeros(len(model.names))
    for t in model.trees:
        for f, g in zip(t.feature, t.gain):
            if f >= 0:
                totals[f] += g
    s = totals.sum()
    shares = totals / s if s > 0 else totals
    return dict(zip(model.names, shares.tolist()))
