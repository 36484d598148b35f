"""Noise-aware contrastive training of the bi-encoder.

The loss is the multiple-negatives ranking loss with per-pair soft labels
and a trainable temperature. Soft labels are refurbished after each epoch
as a momentum average of the model's own in-batch predictions; in
weighted mode each pair's term is scaled by its label once more, so a pair
contributes in proportion to the squared label.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .encoder import EncodedInput, EncoderModel
from .errors import EmptySplit, NumericalError

logger = logging.getLogger(__name__)

TAU_MIN = 1e-3


# -- loss --------------------------------------------------------------------

def mnr_loss(C: np.ndarray, V: np.ndarray, y: np.ndarray, tau: float, weighted: bool = False):
    """Soft-labelled MNR loss and its gradients w.r.t. ``C``, ``V`` and ``tau``.

    Row i of ``C`` is paired with row i of ``V``; the other rows of ``V`` are
    its in-batch negatives. Returns ``(loss, {"C": .., "V": .., "tau": ..})``.
    """
    C = np.asarray(C, dtype=float)
    V = np.asarray(V, dtype=float)
    y = np.asarray(y, dtype=float)
    m = C.shape[0]
    if V.shape != C.shape or y.shape != (m,):
        raise ValueError(f"shape mismatch: C{C.shape} V{V.shape} y{y.shape}")
    if tau <= 0:
        raise ValueError("temperature must be positive")
    a = y * y if weighted else y
    S = C @ V.T
    logits = S / tau
    with np.errstate(invalid="ignore", over="ignore"):
        lse = logsumexp(logits, axis=1)
        P = np.exp(logits - lse[:, None])
        loss = -float(np.sum(a * (np.diagonal(logits) - lse))) / m
    if not math.isfinite(loss):
        raise NumericalError(f"non-finite loss (tau={tau})")
    G = -(a[:, None] / (m * tau)) * (np.eye(m) - P)
    g_tau = float(np.sum(a * (np.diagonal(S) - np.sum(P * S, axis=1)))) / (m * tau * tau)
    return loss, {"C": G @ V, "V": G.T @ C, "tau": g_tau}


def model_prediction(C: np.ndarray, V: np.ndarray, tau: float, kind: str = "softmax") -> np.ndarray:
    """Per-pair prediction in [0, 1].

    ``softmax``: in-batch probability that the pair's own article ranks first.
    ``cosine01``: ``(1 + cos) / 2`` of the pair itself.
    """
    S = np.asarray(C) @ np.asarray(V).T
    if kind == "softmax":
        logits = S / tau
        return np.exp(np.diagonal(logits) - logsumexp(logits, axis=1))
    if kind == "cosine01":
        return np.clip((1.0 + np.diagonal(S)) / 2.0, 0.0, 1.0)
    raise ValueError(f"unknown prediction kind {kind!r}")


def refurbish(y: np.ndarray, y_hat: np.ndarray, alpha: float) -> np.ndarray:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return alpha * np.asarray(y, dtype=float) + (1.0 - alpha) * np.asarray(y_hat, dtype=float)


# -- batching ----------------------------------------------------------------

def similarity_groups(emb: np.ndarray, group_size: int, rng: np.random.Generator,
                      keys: Optional[Sequence] = None) -> List[np.ndarray]:
    """Greedy nearest-neighbour grouping: a random unassigned seed takes its
    ``group_size - 1`` most similar unassigned rows.

    With ``keys`` (article ids), a group never holds two rows with the same key.
    """
    n = emb.shape[0]
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    free = np.ones(n, dtype=bool)
    groups = []
    for seed in rng.permutation(n):
        if not free[seed]:
            continue
        free[seed] = False
        members = [seed]
        if group_size > 1 and free.any():
            cand = np.flatnonzero(free)
            sims = emb[cand] @ emb[seed]
            used = {keys[seed]} if keys is not None else set()
            for j in cand[np.argsort(-sims, kind="stable")]:
                if len(members) == group_size:
                    break
                if keys is not None and keys[j] in used:
                    continue
                members.append(int(j))
                free[j] = False
                if keys is not None:
                    used.add(keys[j])
        groups.append(np.asarray(members))
    return groups


def batches_from_groups(groups: Sequence[np.ndarray], batch_size: int, rng: np.random.Generator,
                        keys: Optional[Sequence] = None) -> List[np.ndarray]:
    """Concatenate groups in random order into batches.

    With ``keys``, a group goes to the first open batch with room and no key
    clash, so in-batch negatives never repeat the positive article.
    """
    order = [groups[i] for i in rng.permutation(len(groups))]
    batches: List[list] = []
    batch_keys: List[set] = []
    for grp in order:
        for start in range(0, len(grp), batch_size):
            part = [int(i) for i in grp[start:start + batch_size]]
            part_keys = {keys[i] for i in part} if keys is not None else set()
            for b, bk in zip(batches, batch_keys):
                if len(b) + len(part) <= batch_size and not (bk & part_keys):
                    b.extend(part)
                    bk |= part_keys
                    break
            else:
                batches.append(part)
                batch_keys.append(set(part_keys))
    out = [np.asarray(b, dtype=int) for b in batches]
    if len(out) > 1 and len(out[-1]) == 1:
        last = out.pop()
        for i in range(len(out) - 1, -1, -1):
            if keys is None or keys[last[0]] not in {keys[j] for j in out[i]}:
                out[i] = np.concatenate([out[i], last])
                break
        else:
            out.append(last)
    return out


def group_shuffle(tweets: Sequence[EncodedInput], model: EncoderModel, group_size: int,
                  batch_size: int, rng: np.random.Generator,
                  keys: Optional[Sequence] = None) -> List[np.ndarray]:
    """Epoch batch order built from groups of mutually similar tweets."""
    if group_size == 1:
        groups = [np.array([i]) for i in rng.permutation(len(tweets))]
    else:
        groups = similarity_groups(model.encode_many(tweets), group_size, rng, keys)
    return batches_from_groups(groups, batch_size, rng, keys)


# -- optimizer ---------------------------------------------------------------

class AdamW:
    """Adam with decoupled weight decay."""

    def __init__(self, params: Dict[str, np.ndarray], lr: float, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], lr_scale: float = 1.0):
        self.t += 1
        lr = self.lr * lr_scale
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, g in grads.items():
            p = params[k]
            if self.weight_decay:
                p *= 1.0 - lr * self.weight_decay
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            p -= lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)

    def state(self) -> dict:
        return {"t": self.t, "m": {k: v.copy() for k, v in self.m.items()},
                "v": {k: v.copy() for k, v in self.v.items()}}


def warmup_linear(step: int, total: int, warmup: float) -> float:
    """Linear warm-up over the first ``warmup`` fraction of steps, then linear decay to 0."""
    n_warm = max(1, int(math.ceil(warmup * total))) if warmup > 0 else 0
    if step < n_warm:
        return (step + 1) / n_warm
    return max(0.0, (total - step) / max(1, total - n_warm))


# -- training loop -----------------------------------------------------------

@dataclass
class TrainConfig:
    lr: float = 2e-3
    tau_lr: float = 0.05
    tau_init: float = 0.05
    trainable_tau: bool = True
    alpha: float = 0.9
    refurbish_start: int = 2
    refurbish: bool = True
    weighted: bool = True
    prediction: str = "softmax"
    batch_size: int = 8
    group_size: int = 4
    epochs: int = 10
    warmup: float = 0.1
    weight_decay: float = 1e-8
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    max_seq: int = 128
    eval_every: int = 250
    dim: int = 64
    hidden: int = 64
    min_count: int = 1
    hash_buckets: int = 256

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        if "betas" in known:
            known["betas"] = tuple(known["betas"])
        return cls(**known)


@dataclass
class TrainPair:
    tweet: EncodedInput
    article: EncodedInput
    label: float = 1.0
    key: tuple = ()


@dataclass
class DevSet:
    """Queries and a candidate collection for checkpoint selection by MAP@5."""
    queries: Dict[str, EncodedInput]
    articles: Dict[str, EncodedInput]
    qrels: Mapping[str, Mapping[str, int]]


@dataclass
class TrainState:
    model: EncoderModel
    tau: float
    labels: np.ndarray
    initial_labels: np.ndarray
    epoch: int = 0
    step: int = 0
    losses: List[float] = field(default_factory=list)
    tau_history: List[float] = field(default_factory=list)
    label_history: List[np.ndarray] = field(default_factory=list)
    dev_history: List[tuple] = field(default_factory=list)
    best_map5: Optional[float] = None
    best_step: Optional[int] = None
    optimizer: Optional[dict] = None


def dev_map5(model: EncoderModel, dev: DevSet) -> float:
    from .evalmetrics import RankedList, evaluate

    qids = sorted(q for q in dev.queries if q in dev.qrels)
    aids = sorted(dev.articles)
    Q = model.encode_many([dev.queries[q] for q in qids])
    A = model.encode_many([dev.articles[a] for a in aids])
    S = Q @ A.T
    runs = [RankedList.from_scores(q, dict(zip(aids, S[i].tolist()))) for i, q in enumerate(qids)]
    return float(evaluate(runs, {q: dev.qrels[q] for q in qids}, ks=(5,))["MAP@5"])


def _check_finite(model: EncoderModel, tau: float):
    if not math.isfinite(tau) or not all(np.all(np.isfinite(p)) for p in model.params.values()):
        raise NumericalError("non-finite parameters after optimizer step")


def train(pairs: Sequence[TrainPair], config: TrainConfig, model: EncoderModel,
          dev: Optional[DevSet] = None,
          on_epoch: Optional[Callable[[TrainState], None]] = None) -> TrainState:
    """Train ``model`` in place on ``pairs``; returns the final (or best-on-dev) state."""
    if not pairs:
        raise EmptySplit("no training pairs")
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    tweets = [p.tweet for p in pairs]
    articles = [p.article for p in pairs]
    keys = [p.key[1] if len(p.key) > 1 else None for p in pairs]
    if any(k is None for k in keys):
        keys = [id(p.article) for p in pairs]
    y0 = np.array([p.label for p in pairs], dtype=float)
    state = TrainState(model=model, tau=float(cfg.tau_init), labels=y0.copy(), initial_labels=y0.copy())

    n_batches = math.ceil(len(pairs) / cfg.batch_size)
    total_steps = cfg.epochs * n_batches
    eval_every = min(n_batches, cfg.eval_every) if cfg.eval_every else n_batches
    opt = AdamW(model.params, cfg.lr, cfg.betas, cfg.eps, cfg.weight_decay)
    tau_param = {"tau": np.array([state.tau])}
    tau_opt = AdamW(tau_param, cfg.tau_lr, cfg.betas, cfg.eps, 0.0)
    best = None
    last_good = (model.copy(), state.tau)

    def checkpoint():
        nonlocal best
        if dev is None:
            return
        score = dev_map5(model, dev)
        state.dev_history.append((state.step, score))
        if best is None or score > best[0]:
            best = (score, model.copy(), state.tau, state.step)

    try:
        for epoch in range(1, cfg.epochs + 1):
            state.epoch = epoch
            batches = group_shuffle(tweets, model, cfg.group_size, cfg.batch_size, rng, keys)
            for idx in batches:
                C, c_cache = model.forward([tweets[i] for i in idx])
                V, v_cache = model.forward([articles[i] for i in idx])
                loss, g = mnr_loss(C, V, state.labels[idx], state.tau, cfg.weighted)
                gc = model.backward(c_cache, g["C"])
                gv = model.backward(v_cache, g["V"])
                grads = {k: gc[k] + gv[k] for k in gc}
                scale = warmup_linear(state.step, total_steps, cfg.warmup)
                opt.step(model.params, grads, scale)
                if cfg.trainable_tau:
                    tau_opt.step(tau_param, {"tau": np.array([g["tau"]])}, scale)
                    tau_param["tau"][0] = max(tau_param["tau"][0], TAU_MIN)
                    state.tau = float(tau_param["tau"][0])
                _check_finite(model, state.tau)
                last_good = (model.copy(), state.tau)
                state.losses.append(loss)
                state.tau_history.append(state.tau)
                state.step += 1
                if state.step % eval_every == 0:
                    checkpoint()
            if cfg.refurbish and epoch >= cfg.refurbish_start:
                y_hat = np.empty(len(pairs))
                for idx in batches:
                    C = model.encode_many([tweets[i] for i in idx])
                    V = model.encode_many([articles[i] for i in idx])
                    y_hat[idx] = model_prediction(C, V, state.tau, cfg.prediction)
                state.labels = np.clip(refurbish(state.labels, y_hat, cfg.alpha), 0.0, 1.0)
            state.label_history.append(state.labels.copy())
            logger.debug("epoch %d loss %.4f tau %.4f", epoch, np.mean(state.losses[-len(batches):]), state.tau)
            if on_epoch is not None:
                on_epoch(state)
    except NumericalError as exc:
        good_model, good_tau = best[1:3] if best is not None else last_good
        model.params.update({k: v.copy() for k, v in good_model.params.items()})
        state.tau = good_tau
        exc.state = state
        raise

    if best is not None:
        state.best_map5, state.best_step = best[0], best[3]
        model.params.update(best[1].params)
        state.tau = best[2]
    state.optimizer = opt.state()
    return state
