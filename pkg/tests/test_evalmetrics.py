from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.metrics import cohen_kappa_score

from factmatch.errors import DegenerateData, UnknownQuery
from factmatch.evalmetrics import RankedList, cohen_kappa, evaluate, fleiss_kappa, format_table

KS = (1, 3, 5)


def run(q, docs):
    return RankedList(q, docs, [float(len(docs) - i) for i in range(len(docs))])


# (qrels relevant sets, rankings, expected {MRR, MAP@1, MAP@3, MAP@5, P@1, P@3, P@5}) worked by hand
CRAFTED = [
    ({"q": "a"}, {"q": "abcde"}, (1, 1, 1, 1, 1, F(1, 3), F(1, 5))),
    ({"q": "a"}, {"q": "bacde"}, (F(1, 2), 0, F(1, 2), F(1, 2), 0, F(1, 3), F(1, 5))),
    ({"q": "a"}, {"q": "bcdefa"}, (F(1, 6), 0, 0, 0, 0, 0, 0)),
    ({"q": "a"}, {"q": "bc"}, (0, 0, 0, 0, 0, 0, 0)),
    ({"q": "ab"}, {"q": "axbyz"}, (1, 1, F(5, 6), F(5, 6), 1, F(2, 3), F(2, 5))),
    ({"q": "ab"}, {"q": "xayb"}, (F(1, 2), 0, F(1, 4), F(1, 2), 0, F(1, 3), F(2, 5))),
    ({"q": "abc"}, {"q": "abc"}, (1, 1, 1, 1, 1, 1, F(3, 5))),
    ({"q": "abcdef"}, {"q": "axbyc"}, (1, 1, F(5, 9), F(34, 75), 1, F(2, 3), F(3, 5))),
    ({"q": "a"}, {"q": "xya"}, (F(1, 3), 0, F(1, 3), F(1, 3), 0, F(1, 3), F(1, 5))),
    ({"q1": "a", "q2": "b"}, {"q1": "axy", "q2": "xyb"}, (F(2, 3), F(1, 2), F(2, 3), F(2, 3), F(1, 2), F(1, 3), F(1, 5))),
]
NAMES = ("MRR", "MAP@1", "MAP@3", "MAP@5", "P@1", "P@3", "P@5")


def as_inputs(rel, ranks):
    qrels = {q: {d: 1 for d in docs} for q, docs in rel.items()}
    return [run(q, list(d)) for q, d in ranks.items()], qrels


@pytest.mark.parametrize("rel,ranks,expected", CRAFTED)
def test_crafted_runs_exact(rel, ranks, expected):
    runs, qrels = as_inputs(rel, ranks)
    got = evaluate(runs, qrels, KS, exact=True)
    assert tuple(got[n] for n in NAMES) == tuple(F(e) for e in expected)
    approx = evaluate(runs, qrels, KS)
    assert all(approx[n] == pytest.approx(float(F(e)), abs=1e-15) for n, e in zip(NAMES, expected))


def test_single_relevant_identity():
    for rel, ranks, _ in CRAFTED:
        if all(len(v) == 1 for v in rel.values()):
            got = evaluate(*as_inputs(rel, ranks), KS, exact=True)
            assert got["MAP@1"] == got["P@1"]
            assert got["MAP@5"] <= got["MRR"]


def test_documented_examples():
    m = evaluate([run("q", ["a"])], {"q": {"a": 1}})
    assert m["MRR"] == m["MAP@5"] == m["P@1"] == 1.0
    m = evaluate([run("q", list("xabcd"))], {"q": {"a": 1}}, exact=True)
    assert (m["MRR"], m["MAP@5"], m["P@1"], m["P@3"]) == (F(1, 2), F(1, 2), 0, F(1, 3))


def test_missing_and_excluded_queries():
    qrels = {"q1": {"a": 1}, "q2": {"b": 1}, "q3": {"c": 0}}
    m = evaluate([run("q1", ["a"])], qrels)
    assert m["MRR"] == 0.5 and m["queries"] == 2 and m["excluded_queries"] == 1
    with pytest.raises(UnknownQuery):
        evaluate([run("zz", ["a"])], qrels)


@given(st.permutations(list("abcdefgh")), st.sets(st.sampled_from("abcdefgh"), min_size=1))
def test_rank_only_and_map_monotone(order, rel):
    qrels = {"q": {d: 1 for d in rel}}
    a = evaluate([RankedList("q", order, [10.0 - i for i in range(8)])], qrels, (1, 2, 3, 5, 8, 10))
    b = evaluate([RankedList("q", order, [float(np.exp(-i)) for i in range(8)])], qrels, (1, 2, 3, 5, 8, 10))
    assert a == b
    maps = [a[f"MAP@{k}"] for k in (1, 2, 3, 5, 8, 10)]
    if len(rel) == 1:
        assert all(y >= x for x, y in zip(maps, maps[1:]))


def test_ranked_list_validation():
    with pytest.raises(ValueError):
        RankedList("q", ["a", "a"], [1.0, 0.5])
    with pytest.raises(ValueError):
        RankedList("q", ["a", "b"], [0.5, 1.0])
    r = RankedList.from_scores("q", {"b": 1.0, "a": 1.0, "c": 2.0}, 2)
    assert r.doc_ids == ["c", "a"]


def test_format_table():
    text = format_table({"bm25": {n: 0.5 for n in ["MRR", "P@1", "P@3", "MAP@1", "MAP@3"]}}, (1, 3))
    lines = text.splitlines()
    assert lines[0].split() == ["Model", "MRR", "P@1", "P@3", "MAP@1", "MAP@3"]
    assert lines[2].split() == ["bm25", "50.00", "50.00", "50.00", "50.00", "50.00"]


def counts_to_ratings(counts):
    return np.array([[c for c, n in enumerate(row) for _ in range(n)] for row in counts])


def test_fleiss_reference_table():
    # widely reproduced 10 items x 14 raters x 5 categories example, kappa 0.210
    counts = [[0, 0, 0, 0, 14], [0, 2, 6, 4, 2], [0, 0, 3, 5, 6], [0, 3, 9, 2, 0], [2, 2, 8, 1, 1],
              [7, 7, 0, 0, 0], [3, 2, 6, 3, 0], [2, 5, 3, 2, 2], [6, 5, 2, 1, 0], [0, 2, 2, 3, 7]]
    assert fleiss_kappa(counts_to_ratings(counts)) == pytest.approx(0.20993, abs=1e-4)


def test_fleiss_examples():
    perfect = np.array([[0, 0, 0], [1, 1, 1], [1, 1, 1], [0, 0, 0]])
    assert fleiss_kappa(perfect) == 1.0
    rng = np.random.default_rng(0)
    assert abs(fleiss_kappa(rng.integers(0, 2, size=(1000, 3)))) <= 0.1
    with pytest.raises(DegenerateData):
        fleiss_kappa(np.ones((5, 3)))
    with pytest.raises(ValueError):
        fleiss_kappa(np.ones((5, 1)))


def test_cohen_examples():
    a = [0, 1, 1, 0, 1, 0]
    assert cohen_kappa(a, a) == 1.0
    assert cohen_kappa(a, [1 - x for x in a]) == -1.0
    rng = np.random.default_rng(1)
    x, y = rng.integers(0, 2, 1000), rng.integers(0, 2, 1000)
    assert abs(cohen_kappa(x, y)) <= 0.1
    with pytest.raises(DegenerateData):
        cohen_kappa([1, 1], [1, 1])
    with pytest.raises(ValueError):
        cohen_kappa([1], [1, 0])


@given(st.lists(st.tuples(st.sampled_from("xyz"), st.sampled_from("xyz")), min_size=2, max_size=40))
def test_cohen_matches_sklearn(pairs):
    a, b = zip(*pairs)
    if len(set(a) | set(b)) < 2 or (len(set(a)) == 1 and set(a) == set(b)):
        return
    assert cohen_kappa(a, b) == pytest.approx(cohen_kappa_score(a, b), abs=1e-12)
