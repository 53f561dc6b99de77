import itertools
import math

import numpy as np
import pytest
from scipy import special, stats

from dscore import bayesnet as B
from dscore import diagnosis as D
from dscore import graph as G
from dscore.errors import InputError, NonPositiveAlpha, NonPositiveConcentration
from dscore.metrics import d_top


def order(*seq):
    return G.TopologicalOrder.from_sequence(seq)


# ----------------------------------------------------------------- CI tests

def test_balanced_independent_table():
    rows = [[a, b] for a in range(2) for b in range(2)] * 25
    res = D.ci_test(B.Dataset.of(rows, [2, 2]), 0, 1)
    assert res.statistic == pytest.approx(0.0, abs=1e-12)
    assert res.p_value == pytest.approx(1.0) and not res.reject and res.dof == 1


def test_identical_columns_reject():
    rows = [[k % 2, k % 2] for k in range(100)]
    res = D.ci_test(B.Dataset.of(rows, [2, 2]), 0, 1)
    assert res.p_value < 1e-10 and res.reject


def test_constant_column_is_degenerate():
    rows = [[0, k % 3] for k in range(30)]
    res = D.ci_test(B.Dataset.of(rows, [2, 3]), 0, 1)
    assert res.degenerate and res.p_value == 1.0 and not res.reject


def test_argument_errors():
    data = B.Dataset.of([[0, 1, 0]], [2, 2, 2])
    with pytest.raises(InputError):
        D.ci_test(data, 0, 0)
    with pytest.raises(InputError):
        D.ci_test(data, 0, 1, {1})


@pytest.mark.parametrize("kind", ["chi2", "gtest"])
def test_stratified_statistic_matches_scipy(kind):
    rng = np.random.default_rng(0)
    rows = rng.integers(0, [3, 2, 2, 3], size=(600, 4))
    rows[:, 1] = np.where(rng.random(600) < 0.3, rows[:, 0] % 2, rows[:, 1])
    data = B.Dataset.of(rows, [3, 2, 2, 3])
    res = D.ci_test(data, 0, 1, {2, 3}, kind=kind)
    stat, dof = 0.0, 0
    for z in itertools.product(range(2), range(3)):
        sub = rows[(rows[:, 2] == z[0]) & (rows[:, 3] == z[1])]
        if len(sub) == 0:
            continue
        table = np.zeros((3, 2))
        np.add.at(table, (sub[:, 0], sub[:, 1]), 1)
        # empty rows or columns carry no expected mass; dof stays (r_i - 1)(r_j - 1)
        table = table[table.sum(1) > 0][:, table.sum(0) > 0]
        lam = "log-likelihood" if kind == "gtest" else None
        s = stats.chi2_contingency(table, correction=False, lambda_=lam)[0] if min(table.shape) > 1 else 0.0
        stat += s
        dof += 2
    assert res.statistic == pytest.approx(stat, rel=1e-9)
    assert res.dof == dof
    assert res.p_value == pytest.approx(stats.chi2.sf(stat, dof), rel=1e-9)


def test_calibration_under_independence():
    # 10^4 independent 3x3 tables; one-sided binomial sd at 0.01 is ~0.001
    rng = np.random.default_rng(0)
    rejects = 0
    trials = 10_000
    for _ in range(trials):
        rows = rng.integers(0, 3, size=(400, 2))
        rejects += D.ci_test(B.Dataset.of(rows, [3, 3]), 0, 1, alpha=0.01).reject
    assert abs(rejects / trials - 0.01) <= 0.005


def test_chi2_and_g_agree_on_large_balanced_tables():
    rng = np.random.default_rng(1)
    agree = 0
    for t in range(200):
        n = 10_000
        x = rng.integers(0, 3, n)
        y = np.where(rng.random(n) < 0.02 * (t % 3), x, rng.integers(0, 3, n))
        data = B.Dataset.of(np.column_stack([x, y]), [3, 3])
        agree += D.ci_test(data, 0, 1, kind="chi2").reject == D.ci_test(data, 0, 1, kind="gtest").reject
    assert agree / 200 > 0.99


# ------------------------------------------------------- in-degree recovery

def test_in_degree_examples():
    chain = G.from_edges(3, [(0, 1), (1, 2)])
    assert D.estimate_in_degrees(D.dsep_tester(chain), order(0, 1, 2)) == [1, 1]
    empty = G.empty_graph(4)
    assert D.estimate_in_degrees(D.dsep_tester(empty), order(3, 1, 0, 2)) == [0, 0, 0]
    collider = G.from_edges(3, [(0, 2), (1, 2)])
    assert D.estimate_in_degrees(D.dsep_tester(collider), order(0, 1, 2)) == [0, 2]


def test_in_degrees_exact_with_oracle_on_valid_orders():
    rng = np.random.default_rng(0)
    for _ in range(150):
        d = int(rng.integers(2, 8))
        g = G.gen_er(d, int(rng.integers(0, d * (d - 1) // 2 + 1)), rng)
        o = G.topological_order(g)
        got = D.estimate_in_degrees(D.dsep_tester(g), o)
        assert got == [len(g.parents(v)) for v in o.seq[1:]]


def test_in_degree_bounded_by_position():
    rng = np.random.default_rng(5)
    for _ in range(50):
        g = G.gen_er(7, 12, rng)
        o = order(*rng.permutation(7))
        for k, v in enumerate(D.estimate_in_degrees(D.dsep_tester(g), o), start=1):
            assert 0 <= v <= k


def test_ci_tester_recovers_chain_in_degrees():
    bn = B.DiscreteBayesNet.build(G.from_edges(3, [(0, 1), (1, 2)]), [2, 2, 2],
                                  [[[0.5, 0.5]], [[0.85, 0.15], [0.2, 0.8]], [[0.8, 0.2], [0.25, 0.75]]])
    data = B.sample(bn, D.DEFAULT_TEST_N, np.random.default_rng(0))
    assert D.estimate_in_degrees(D.ci_tester(data), order(0, 1, 2)) == [1, 1]


def test_diagnose_order_examples():
    assert D.diagnose_order([0, 1, 2], 3).exceed_fraction == 0
    assert D.diagnose_order([4, 5], 3).exceed_fraction == 1
    assert D.diagnose_order([0, 2, 4], 3).exceed_fraction == pytest.approx(1 / 3)
    with pytest.raises(InputError):
        D.diagnose_order([1], 0)


# --------------------------------------------------- Dirichlet entropy etc.

def test_digamma_against_scipy_and_recurrence():
    for x in np.concatenate([np.linspace(0.01, 10, 500), np.geomspace(10, 1e8, 50)]):
        assert D.digamma(float(x)) == pytest.approx(float(special.digamma(x)), abs=1e-8)
    # first omitted series term at the switch point: 1 / (240 * 6**8) ~ 2.5e-9
    assert abs(D.digamma(1.0) - (-0.5772156649015329)) < 1 / (240 * 6**8)
    for x in (0.3, 2.5, 4.0):  # both sides reach the series at the same point
        assert D.digamma(x + 1) - D.digamma(x) == pytest.approx(1 / x, abs=1e-12)
    with pytest.raises(NonPositiveConcentration):
        D.digamma(0.0)


def test_two_term_approximation_is_close_for_large_arguments():
    for x in (20.0, 100.0, 1000.0):
        two = math.log(x) - 0.5 / x
        assert abs(D.digamma(x) - two) < 1 / (12 * x * x) + 1e-12


def test_expected_entropy_examples():
    assert D.expected_dirichlet_entropy(2, 2.0) == pytest.approx(0.5, abs=1e-12)
    assert abs(D.expected_dirichlet_entropy(4, 1e6) - math.log(4)) < 1e-5
    with pytest.raises(NonPositiveConcentration):
        D.expected_dirichlet_entropy(3, 0.0)


def test_expected_entropy_monte_carlo():
    rng = np.random.default_rng(0)
    for n, s in [(3, 1.5), (5, 10.0)]:
        p = rng.dirichlet(np.full(n, s / n), size=100_000)
        with np.errstate(divide="ignore", invalid="ignore"):
            h = -np.where(p > 0, p * np.log(p), 0.0).sum(axis=1)
        assert abs(h.mean() - D.expected_dirichlet_entropy(n, s)) < 0.005


def test_expected_entropy_monotone_and_bounded():
    for n in (2, 3, 6):
        grid = np.geomspace(0.01, 1e5, 200)
        vals = [D.expected_dirichlet_entropy(n, float(s)) for s in grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert all(0 < v < math.log(n) for v in vals)


def test_entropy_gap_large_s_rate():
    # ln n - E[H] ~ (n - 1) / (2 s) for large s
    for n in (2, 4):
        s = 1e4
        gap = math.log(n) - D.expected_dirichlet_entropy(n, s)
        assert gap == pytest.approx((n - 1) / (2 * s), rel=1e-3)
        assert D.entropy_gap_two_term(n, s) == pytest.approx(gap, rel=1e-3)


def test_prop1_gap_examples():
    assert D.prop1_gap(3, 3, 2, 2, 50.0) == (0.0, True)
    gap, ok = D.prop1_gap(2, 4, 4, 8, 100.0)
    assert gap == pytest.approx(math.log(2) - 0.38, abs=1e-12) and ok
    assert abs(gap - 0.3131) < 1e-4
    gap, ok = D.prop1_gap(6, 3, 1, 1, 1e9)
    assert gap == pytest.approx(math.log(0.5), abs=1e-8) and not ok
    with pytest.raises(NonPositiveAlpha):
        D.prop1_gap(2, 2, 1, 1, 0.0)


def test_prop1_antisymmetric_log_term():
    for ni, nj in itertools.product(range(2, 7), repeat=2):
        a, _ = D.prop1_gap(ni, nj, 1, 1, 1e300)
        b, _ = D.prop1_gap(nj, ni, 1, 1, 1e300)
        assert a == -b


def test_check_prop1_examples():
    assert D.check_prop1(G.empty_graph(3), [2, 3, 4], 10.0).holds
    chain = G.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    rep = D.check_prop1(chain, [2, 2, 2, 2], 1e6)
    assert not rep.holds
    (i, j, g, ok), *rest = rep.edges
    assert (i, j) == (0, 1) and not ok
    assert g == pytest.approx((1 * 3.5 - 2 * 3.5) / 1e6)
    assert all(r[3] and r[2] == 0 for r in rest)
    inc = D.check_prop1(chain, [2, 3, 4, 5], 1e6)
    assert inc.holds


def test_exact_gap_approaches_large_alpha_limit():
    # exact difference of expected entropies vs the log term as alpha0 grows
    for ni, nj, Ki, Kj in [(2, 4, 1, 2), (3, 3, 3, 3), (5, 3, 1, 5)]:
        big = D.exact_prop1_gap(ni, nj, Ki, Kj, 1e9)
        assert big == pytest.approx(math.log(nj / ni), abs=1e-6)


# ----------------------------------------------------------------- study

def test_study_constructions():
    # valid orders only -> Dtop zero
    for seed in range(20):
        rng = np.random.default_rng(seed)
        g = G.gen_er(8, 12, rng)
        assert d_top(G.topological_order(g), g) == 0
    # reversed chain: every edge violated, every node depends on its successor
    chain = G.from_edges(6, [(k, k + 1) for k in range(5)])
    rev = order(*range(5, -1, -1))
    assert d_top(rev, chain) == 5
    degs = D.estimate_in_degrees(D.dsep_tester(chain), rev)
    assert degs == [1, 1, 1, 1, 1]


def test_study_small_run_is_deterministic():
    a = D.exceed_vs_dtop_study(num_graphs=20, d_range=(5, 8), seed=3)
    b = D.exceed_vs_dtop_study(num_graphs=20, d_range=(5, 8), seed=3, workers=2)
    assert a.rows == b.rows and a.pearson == b.pearson
    for r in a.rows:
        assert 0 <= r.exceed_fraction <= 1 and 0 <= r.dtop_normalized <= 1
