import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from dscore import bayesnet as B
from dscore import graph as G
from dscore import randomness as R
from dscore.errors import DegenerateJoint, InvalidM, InvalidMeasureParam, NoAdmissibleSet

from oracles import bn_parts, brute_joint, brute_majorizes, surjections

SCHUR_MEASURES = [R.SHANNON, R.MeasureSpec("renyi", 0.5), R.MeasureSpec("renyi", 2.0),
                  R.MeasureSpec("renyi", 5.0), R.MeasureSpec("kl_to_uniform_negated")]
ALL_MEASURES = SCHUR_MEASURES + [R.NEG_LOG_VARIANCE]


def probs(min_size=1, max_size=8):
    return st.lists(st.floats(0, 1), min_size=min_size, max_size=max_size).filter(
        lambda v: sum(v) > 1e-3).map(lambda v: np.array(v) / sum(v))


def t_transform(p, rng):
    """Robin-Hood move: shift mass from a richer to a poorer entry without
    reversing their ranking; the result is majorized by p."""
    p = p.copy()
    i, j = rng.choice(len(p), 2, replace=False)
    if p[i] < p[j]:
        i, j = j, i
    t = rng.uniform(0, 0.5) * (p[i] - p[j])
    p[i] -= t
    p[j] += t
    return p


def test_parse_measure():
    assert R.parse_measure("shannon") == R.SHANNON
    assert R.parse_measure("renyi:2.0") == R.MeasureSpec("renyi", 2.0)
    assert R.parse_measure("neg-log-var") == R.NEG_LOG_VARIANCE
    assert R.parse_measure("neg-kl-uniform").kind == "kl_to_uniform_negated"
    for bad in ["renyi:1", "renyi:-2", "renyi:x", "renyi", "gini", "shannon:3"]:
        with pytest.raises(InvalidMeasureParam):
            R.parse_measure(bad)
    for spec in ALL_MEASURES:
        assert R.parse_measure(str(spec)) == spec


def test_measure_examples():
    assert R.measure_eval(R.SHANNON, [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-12)
    assert R.measure_eval(R.SHANNON, [1.0, 0.0]) == 0.0
    assert R.measure_eval(R.NEG_LOG_VARIANCE, [0.5, 0.5]) == pytest.approx(0.0, abs=1e-15)
    # binary closed form p(1-p) ln^2(p/(1-p)); 40-digit value -0.22630293015235912...
    assert R.measure_eval(R.NEG_LOG_VARIANCE, [0.75, 0.25]) == pytest.approx(-0.2263029301523591, abs=1e-15)
    assert R.measure_eval(R.MeasureSpec("renyi", 2.0), [0.5, 0.5]) == pytest.approx(math.log(2))
    assert R.measure_eval(R.MeasureSpec("kl_to_uniform_negated"), [0.25] * 4) == pytest.approx(0.0, abs=1e-15)
    assert R.measure_eval(R.MeasureSpec("kl_to_uniform_negated"), [1, 0, 0, 0]) == pytest.approx(-math.log(4))


def test_renyi_limit_is_shannon():
    rng = np.random.default_rng(1)
    for _ in range(200):
        p = rng.dirichlet(np.ones(rng.integers(2, 7)))
        assert abs(R.measure_eval(R.MeasureSpec("renyi", 1.001), p) - R.measure_eval(R.SHANNON, p)) < 1e-3


def test_measure_rows_axis():
    rng = np.random.default_rng(0)
    P = rng.dirichlet(np.ones(4), size=(3, 5))
    for phi in ALL_MEASURES:
        direct = np.array([[R.measure_eval(phi, P[a, b]) for b in range(5)] for a in range(3)])
        assert_allclose(R.measure_rows(phi, P), direct, rtol=0, atol=1e-14)
        assert_allclose(R.measure_rows(phi, np.moveaxis(P, 2, 0), axis=0), direct, rtol=0, atol=1e-14)


@settings(max_examples=200, deadline=None)
@given(probs(), st.randoms(use_true_random=False))
def test_symmetry(p, rnd):
    q = p.copy()
    rnd.shuffle(q)
    for phi in ALL_MEASURES:
        assert R.measure_eval(phi, p) == pytest.approx(R.measure_eval(phi, q), abs=1e-12)


@pytest.mark.parametrize("phi", SCHUR_MEASURES, ids=str)
def test_schur_concave_under_t_transforms(phi):
    rng = np.random.default_rng(7)
    for _ in range(3000):
        a = rng.dirichlet(np.full(rng.integers(2, 7), 0.5))
        b = t_transform(a, rng)
        assert R.majorizes(a, b)
        assert R.measure_eval(phi, a) <= R.measure_eval(phi, b) + 1e-9


def test_neg_log_variance_counterexample():
    # (1, 0) majorizes (0.9, 0.1) yet the measure ranks the point mass higher
    a, b = [1.0, 0.0], [0.9, 0.1]
    assert R.majorizes(a, b)
    assert R.measure_eval(R.NEG_LOG_VARIANCE, a) > R.measure_eval(R.NEG_LOG_VARIANCE, b)


@settings(max_examples=300, deadline=None)
@given(probs(), probs())
def test_majorizes_matches_oracle(a, b):
    assert R.majorizes(a, b) == brute_majorizes(list(a), list(b))


def test_majorization_extremes():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(2, 8))
        p = rng.dirichlet(np.ones(n))
        assert R.majorizes(np.eye(n)[0], p)
        assert R.majorizes(p, np.full(n, 1.0 / n))
        assert R.majorizes(p, p)
    assert R.majorizes([1.0], [0.5, 0.5])  # padding


def test_q_transform_examples():
    assert_allclose(R.q_transform([0.4, 0.3, 0.2, 0.1], 2), [0.9, 0.1])
    assert_allclose(R.q_transform([0.1, 0.4, 0.2, 0.3], 2), [0.9, 0.1])
    assert_allclose(R.q_transform([0.25] * 4, 3), [0.5, 0.25, 0.25])
    for m in (1, 4, 5):
        with pytest.raises(InvalidM):
            R.q_transform([0.25] * 4, m)


def test_q_transform_dominates_every_merge():
    rng = np.random.default_rng(11)
    for n in range(3, 6):
        for m in range(2, n):
            for _ in range(5):
                s = rng.dirichlet(np.ones(n))
                q = R.q_transform(s, m)
                assert q.shape == (m,) and abs(q.sum() - 1) < 1e-12 and np.all(q >= 0)
                for f in surjections(n, m):
                    c = np.bincount(f, weights=s, minlength=m)
                    assert brute_majorizes(list(q), list(c))


def test_conditional_information_examples():
    px, py = np.array([0.2, 0.5, 0.3]), np.array([0.6, 0.4])
    joint = np.outer(px, py)
    for phi in ALL_MEASURES:
        assert R.conditional_information(joint, phi) == pytest.approx(R.measure_eval(phi, px), abs=1e-12)
    assert R.conditional_information(np.diag([0.3, 0.7]), R.SHANNON) == 0.0
    # a zero-mass column is skipped
    j2 = np.array([[0.5, 0.0], [0.5, 0.0]])
    assert R.conditional_information(j2, R.SHANNON) == pytest.approx(math.log(2))
    with pytest.raises(DegenerateJoint):
        R.conditional_information(np.zeros((2, 2)), R.SHANNON)


@pytest.mark.parametrize("phi", [R.SHANNON, R.MeasureSpec("renyi", 0.5), R.MeasureSpec("kl_to_uniform_negated")], ids=str)
def test_conditioning_reduces_concave_measures(phi):
    rng = np.random.default_rng(5)
    for _ in range(2000):
        J = rng.dirichlet(np.full(12, 0.5)).reshape(3, 4)
        assert R.conditional_information(J, phi) <= R.measure_eval(phi, J.sum(axis=1)) + 1e-9


def _chain3():
    dag = G.from_edges(3, [(0, 1), (1, 2)])
    return B.DiscreteBayesNet.build(dag, [2, 2, 2], [
        [[0.3, 0.7]],
        [[0.9, 0.1], [0.2, 0.8]],
        [[0.6, 0.4], [0.1, 0.9]],
    ])


def test_theorem2_bound_chain_middle():
    bn = _chain3()
    joint = brute_joint(*bn_parts(bn))
    s = {}
    for x, p in joint.items():
        s[(x[0], x[2])] = s.get((x[0], x[2]), 0.0) + p
    vec = sorted(s.values(), reverse=True)
    expected = R.measure_eval(R.SHANNON, [vec[0] + vec[1] + vec[2], vec[3]])
    det = R.theorem2_bound_details(bn, 1, R.SHANNON, 2)
    assert det.argmin == (0, 2) and det.candidates == 1
    assert det.value == pytest.approx(expected, abs=1e-12)


def test_theorem2_bound_uniform_marginals():
    dag = G.empty_graph(3)
    bn = B.DiscreteBayesNet.build(dag, [2, 2, 2], [[[0.5, 0.5]]] * 3)
    assert R.theorem2_bound(bn, 2, R.SHANNON, 2) == pytest.approx(
        -(0.75 * math.log(0.75) + 0.25 * math.log(0.25)), abs=1e-12)


def test_theorem2_bound_no_admissible_set():
    bn = _chain3()
    with pytest.raises(NoAdmissibleSet):
        R.theorem2_bound(bn, 1, R.SHANNON, 1)


def test_theorem2_bound_below_merged_child():
    """A node that deterministically merges its parents' joint state has
    randomness phi(X_l) >= phi(Q(s)) >= the bound."""
    rng = np.random.default_rng(2)
    for _ in range(30):
        dag = G.from_edges(3, [(0, 2), (1, 2)])
        cards = [2, 3, 3]
        tables = [rng.dirichlet(np.ones(2))[None], rng.dirichlet(np.ones(3))[None]]
        f = rng.permutation(list(range(3)) + list(rng.integers(0, 3, size=3)))
        child = np.full((6, 3), 1e-12)
        child[np.arange(6), f] = 1.0
        child /= child.sum(axis=1, keepdims=True)
        bn = B.DiscreteBayesNet.build(dag, cards, tables + [child])
        px = B.marginal(bn, [2])
        s = B.marginal(bn, [0, 1]).ravel()
        q_val = R.measure_eval(R.SHANNON, R.q_transform(s, 3))
        assert R.measure_eval(R.SHANNON, px) >= q_val - 1e-9
        assert q_val >= R.theorem2_bound(bn, 2, R.SHANNON, 2) - 1e-12
