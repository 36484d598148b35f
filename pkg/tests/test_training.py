import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factmatch.encoder import EncoderModel, Vocab, build_vocab
from factmatch.errors import EmptySplit, NumericalError
from factmatch.training import (
    TAU_MIN, AdamW, DevSet, TrainConfig, TrainPair, batches_from_groups, group_shuffle, mnr_loss,
    model_prediction, refurbish, similarity_groups, train, warmup_linear,
)


def unit_rows(rng, m, h):
    X = rng.normal(size=(m, h))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def softmax_ce_oracle(C, V):
    total = 0.0
    for i in range(len(C)):
        logits = [float(np.dot(C[i], V[j])) for j in range(len(V))]
        top = max(logits)
        total += -(logits[i] - top - math.log(sum(math.exp(x - top) for x in logits)))
    return total / len(C)


def test_single_pair_loss_is_zero():
    rng = np.random.default_rng(0)
    C, V = unit_rows(rng, 1, 4), unit_rows(rng, 1, 4)
    assert mnr_loss(C, V, np.ones(1), 0.3)[0] == pytest.approx(0.0, abs=1e-15)


def test_zero_labels_zero_loss_and_grads():
    rng = np.random.default_rng(0)
    loss, g = mnr_loss(unit_rows(rng, 3, 4), unit_rows(rng, 3, 4), np.zeros(3), 0.5, weighted=True)
    assert loss == 0.0 and not g["C"].any() and not g["V"].any() and g["tau"] == 0.0


def test_orthogonal_pair_value():
    I = np.eye(2)
    assert mnr_loss(I, I, np.ones(2), 1.0)[0] == pytest.approx(math.log(1 + math.exp(-1)), abs=1e-12)
    assert softmax_ce_oracle(I, I) == pytest.approx(math.log(1 + math.exp(-1)), abs=1e-12)


def test_reduces_to_softmax_cross_entropy():
    rng = np.random.default_rng(1)
    for _ in range(200):
        m, h = rng.integers(1, 6), rng.integers(1, 9)
        C, V = unit_rows(rng, m, h), unit_rows(rng, m, h)
        assert abs(mnr_loss(C, V, np.ones(m), 1.0)[0] - softmax_ce_oracle(C, V)) <= 1e-10


def finite_difference(f, x, h=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        up = f()
        x[idx] = old - h
        down = f()
        x[idx] = old
        g[idx] = (up - down) / (2 * h)
    return g


def rel_err(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(1e-6, np.abs(a) + np.abs(b))))


@pytest.mark.parametrize("weighted", [False, True])
def test_gradients(weighted):
    rng = np.random.default_rng(2)
    for _ in range(20):
        m, h = rng.integers(1, 5), rng.integers(1, 9)
        C, V = rng.normal(size=(m, h)), rng.normal(size=(m, h))
        y = rng.uniform(0, 1, m)
        tau = np.array([rng.uniform(0.2, 2.0)])
        _, g = mnr_loss(C, V, y, tau[0], weighted)

        def f():
            return mnr_loss(C, V, y, tau[0], weighted)[0]

        assert rel_err(g["C"], finite_difference(f, C)) <= 1e-4
        assert rel_err(g["V"], finite_difference(f, V)) <= 1e-4
        assert rel_err(np.array([g["tau"]]), finite_difference(f, tau)) <= 1e-4


def test_weight_monotonicity():
    rng = np.random.default_rng(3)
    C, V = unit_rows(rng, 4, 6), unit_rows(rng, 4, 6)
    for weighted in (False, True):
        norms = []
        for yi in np.linspace(0, 1, 11):
            y = np.full(4, 0.5)
            y[0] = yi
            # pair 0's own contribution: loss with only pair 0 labelled
            mask = np.zeros(4)
            mask[0] = yi
            _, g = mnr_loss(C, V, mask, 0.2, weighted)
            norms.append(np.linalg.norm(g["C"]) + np.linalg.norm(g["V"]))
        assert all(b >= a for a, b in zip(norms, norms[1:]))
        if weighted:
            assert norms[5] == pytest.approx(norms[10] * 0.25)


def test_loss_errors():
    with pytest.raises(ValueError):
        mnr_loss(np.eye(2), np.eye(3), np.ones(2), 1.0)
    with pytest.raises(ValueError):
        mnr_loss(np.eye(2), np.eye(2), np.ones(2), 0.0)
    with pytest.raises(NumericalError):
        mnr_loss(np.array([[np.inf]]), np.array([[1.0]]), np.ones(1), 1.0)


def test_refurbish_examples():
    y, yh = np.array([1.0, 0.3]), np.array([0.2, 0.9])
    assert np.array_equal(refurbish(y, yh, 1.0), y)
    assert np.array_equal(refurbish(y, yh, 0.0), yh)
    assert refurbish([1.0], [0.2], 0.9)[0] == pytest.approx(0.92, abs=1e-15)
    with pytest.raises(ValueError):
        refurbish(y, yh, 1.5)


@settings(max_examples=50)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_refurbish_geometric_convergence(y0, yhat, alpha):
    y = np.array([y0])
    for k in range(1, 15):
        y = refurbish(y, [yhat], alpha)
        assert abs(y[0] - yhat) == pytest.approx(alpha ** k * abs(y0 - yhat), abs=1e-12)


def test_model_prediction_examples():
    assert model_prediction(np.eye(1), np.eye(1), 0.5)[0] == 1.0
    same = np.ones((2, 2)) / np.sqrt(2)
    assert np.allclose(model_prediction(same, same, 1.0), 0.5)
    assert model_prediction(np.eye(2), np.eye(2), 1.0) == pytest.approx(np.full(2, math.e / (math.e + 1)))
    assert model_prediction(np.eye(2), -np.eye(2), 1.0, "cosine01") == pytest.approx([0.0, 0.0])
    with pytest.raises(ValueError):
        model_prediction(np.eye(2), np.eye(2), 1.0, "other")


def clustered_embeddings(rng):
    centers = np.array([[1.0, 0, 0], [0, 1.0, 0]])
    emb = np.repeat(centers, 4, axis=0) + rng.normal(0, 0.05, size=(8, 3))
    return emb / np.linalg.norm(emb, axis=1, keepdims=True)


def brute_force_nearest(emb, seed, free, k):
    sims = [(float(emb[seed] @ emb[j]), j) for j in free if j != seed]
    return {j for _, j in sorted(sims, key=lambda s: -s[0])[:k]}


def test_similarity_groups_clusters():
    rng = np.random.default_rng(4)
    emb = clustered_embeddings(rng)
    for seed in range(10):
        groups = similarity_groups(emb, 4, np.random.default_rng(seed))
        assert sorted(sorted(g.tolist()) for g in groups) == [[0, 1, 2, 3], [4, 5, 6, 7]]
        first = groups[0]
        assert set(first[1:].tolist()) == brute_force_nearest(emb, first[0], range(8), 3)


def test_group_shuffle_batches():
    E = np.zeros((10, 3))
    E[2:6] = [1.0, 0, 0]
    E[6:10] = [0, 1.0, 0]
    m = EncoderModel(Vocab(["[CLS]", "[SEP]"] + [f"t{i}" for i in range(8)], 0), E, np.eye(3), np.zeros(3))
    tweets = [m.tweet_input([f"t{i}"]) for i in range(8)]
    batches = group_shuffle(tweets, m, 4, 8, np.random.default_rng(0))
    assert len(batches) == 1 and sorted(batches[0].tolist()) == list(range(8))
    halves = [set(batches[0][:4].tolist()), set(batches[0][4:].tolist())]
    assert sorted(map(sorted, halves)) == [[0, 1, 2, 3], [4, 5, 6, 7]]
    plain = group_shuffle(tweets, m, 1, 4, np.random.default_rng(0))
    assert [len(b) for b in plain] == [4, 4]
    assert sorted(np.concatenate(plain).tolist()) == list(range(8))


def test_batches_respect_article_keys():
    keys = ["a", "a", "b", "c", "a", "d"]
    groups = [np.array([i]) for i in range(6)]
    for seed in range(20):
        batches = batches_from_groups(groups, 3, np.random.default_rng(seed), keys)
        assert sorted(np.concatenate(batches).tolist()) == list(range(6))
        for b in batches:
            ks = [keys[i] for i in b]
            assert len(ks) == len(set(ks))


def adamw_reference(p, grads, lr, b1, b2, eps, wd):
    """Scalar loop over the AdamW update rules, one element at a time."""
    p = list(p)
    m = [0.0] * len(p)
    v = [0.0] * len(p)
    for t, g in enumerate(grads, 1):
        for i in range(len(p)):
            p[i] = p[i] - lr * wd * p[i]
            m[i] = b1 * m[i] + (1 - b1) * g[i]
            v[i] = b2 * v[i] + (1 - b2) * g[i] ** 2
            mh = m[i] / (1 - b1 ** t)
            vh = v[i] / (1 - b2 ** t)
            p[i] = p[i] - lr * mh / (math.sqrt(vh) + eps)
    return p


def test_adamw_matches_reference():
    rng = np.random.default_rng(5)
    p0 = rng.normal(size=5)
    grads = [rng.normal(size=5) for _ in range(12)]
    params = {"x": p0.copy()}
    opt = AdamW(params, 0.01, (0.9, 0.999), 1e-8, 0.1)
    for g in grads:
        opt.step(params, {"x": g})
    assert np.allclose(params["x"], adamw_reference(p0, grads, 0.01, 0.9, 0.999, 1e-8, 0.1), atol=1e-14)


def test_adamw_first_step_is_signed_lr():
    params = {"x": np.array([1.0, -2.0, 3.0])}
    AdamW(params, 0.1).step(params, {"x": np.array([5.0, -0.01, 2.0])})
    assert params["x"] == pytest.approx([0.9, -1.9, 2.9], abs=1e-6)


def test_warmup_schedule():
    total = 100
    s = [warmup_linear(i, total, 0.1) for i in range(total)]
    assert s[0] == pytest.approx(0.1) and s[9] == 1.0
    assert s[10] == pytest.approx(1.0) and s[-1] == pytest.approx(1 / 90)
    assert all(b <= a for a, b in zip(s[10:], s[11:]))
    assert warmup_linear(0, 10, 0.0) == 1.0


def toy_pairs(model, n=2):
    return [TrainPair(model.tweet_input([f"q{i}"]), model.article_input([[f"d{i}"]]), 1.0, (i, f"d{i}"))
            for i in range(n)]


def toy_model(n=2, seed=0):
    vocab = build_vocab([[f"q{i}", f"d{i}"] for i in range(n)], 1, 0)
    return EncoderModel.init(vocab, 8, 8, seed)


def test_memorizes_two_pairs():
    m = toy_model()
    pairs = toy_pairs(m)
    dev = DevSet({"x0": m.tweet_input(["q0"]), "x1": m.tweet_input(["q1"])},
                 {"d0": m.article_input([["d0"]]), "d1": m.article_input([["d1"]])},
                 {"x0": {"d0": 1}, "x1": {"d1": 1}})
    st_ = train(pairs, TrainConfig(epochs=20, batch_size=2, group_size=1, lr=0.05), m, dev)
    assert st_.best_map5 == 1.0


def test_alpha_one_keeps_labels_and_tau_clamp():
    m = toy_model(4)
    st_ = train(toy_pairs(m, 4), TrainConfig(epochs=5, batch_size=4, alpha=1.0, tau_lr=5.0, tau_init=0.01), m)
    assert np.array_equal(st_.labels, st_.initial_labels)
    assert min(st_.tau_history) >= TAU_MIN


def test_labels_fixed_before_refurbish_start():
    m = toy_model(4)
    st_ = train(toy_pairs(m, 4), TrainConfig(epochs=3, batch_size=4, refurbish_start=2), m)
    assert np.array_equal(st_.label_history[0], np.ones(4))
    assert not np.array_equal(st_.label_history[1], np.ones(4))
    assert all(((h >= 0) & (h <= 1)).all() for h in st_.label_history)


def test_deterministic_trajectory():
    runs = []
    for _ in range(2):
        m = toy_model(6)
        runs.append(train(toy_pairs(m, 6), TrainConfig(epochs=4, batch_size=4, group_size=2), m).losses)
    assert runs[0] == runs[1]


def test_numerical_error_restores_last_good():
    m = toy_model(4)
    snapshot = {}

    def corrupt(state):
        snapshot.update({k: v.copy() for k, v in m.params.items()})
        m.params["E"][:] = np.nan

    with pytest.raises(NumericalError) as info:
        train(toy_pairs(m, 4), TrainConfig(epochs=3, batch_size=4), m, on_epoch=corrupt)
    assert info.value.state.epoch == 2
    for k in snapshot:
        assert np.array_equal(m.params[k], snapshot[k])


def test_empty_split():
    with pytest.raises(EmptySplit):
        train([], TrainConfig(), toy_model())


def test_config_roundtrip():
    cfg = TrainConfig(lr=0.1, betas=(0.8, 0.9))
    assert TrainConfig.from_dict({**cfg.to_dict(), "unknown": 1}) == cfg
