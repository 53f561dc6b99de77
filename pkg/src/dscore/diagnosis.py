"""Order diagnostics: stratified independence tests, in-degree estimation
along an order, the Dirichlet large-concentration randomness check, and the
exceed-fraction versus order-error study."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from . import graph as G
from .bayesnet import Dataset
from .errors import IndexOutOfRange, InputError, NonPositiveAlpha, NonPositiveConcentration, OverlappingArguments
from .metrics import d_top

DEFAULT_ALPHA = 0.01
DEFAULT_TEST_N = 5000

Tester = Callable[[int, int, frozenset], bool]


@dataclass(frozen=True)
class CiTestResult:
    statistic: float
    dof: int
    p_value: float
    reject: bool
    low_power_strata: int = 0
    degenerate: bool = False


def _strata(rows: np.ndarray, Z: Sequence[int], cards: Sequence[int]) -> tuple[np.ndarray, int]:
    if not Z:
        return np.zeros(rows.shape[0], dtype=np.int64), 1
    _, inv = np.unique(rows[:, list(Z)], axis=0, return_inverse=True)
    inv = inv.ravel()
    return inv, int(inv.max()) + 1


def ci_test(data: Dataset, i: int, j: int, Z: Iterable[int] = (), alpha: float = DEFAULT_ALPHA,
            kind: str = "chi2") -> CiTestResult:
    """Test X_i independent of X_j given X_Z, pooling per-stratum statistics.

    ``kind`` is ``chi2`` (Pearson) or ``gtest`` (likelihood ratio).  Each
    non-empty stratum adds (r_i - 1)(r_j - 1) degrees of freedom with the
    declared cardinalities.  Strata having a cell with expected count below
    5 are counted in ``low_power_strata``.  If X_i or X_j is constant in the
    data the result is p = 1 with ``degenerate`` set.
    """
    Z = tuple(sorted(set(Z)))
    for v in (i, j, *Z):
        if not 0 <= v < data.d:
            raise IndexOutOfRange(f"node {v} outside 0..{data.d - 1}")
    if i == j or i in Z or j in Z:
        raise OverlappingArguments(f"i={i}, j={j}, Z={list(Z)} must be disjoint")
    if kind not in ("chi2", "gtest"):
        raise InputError(f"unknown test kind {kind!r}")
    rows = data.rows
    if np.all(rows[:, i] == rows[0, i]) or np.all(rows[:, j] == rows[0, j]):
        return CiTestResult(0.0, 0, 1.0, False, 0, True)
    ri, rj = data.cards[i], data.cards[j]
    strata, S = _strata(rows, Z, data.cards)
    O = np.bincount((strata * ri + rows[:, i]) * rj + rows[:, j], minlength=S * ri * rj)
    O = O.reshape(S, ri, rj).astype(float)
    n = O.sum(axis=(1, 2), keepdims=True)
    E = O.sum(axis=2, keepdims=True) * O.sum(axis=1, keepdims=True) / n
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == "chi2":
            terms = np.where(E > 0, (O - E) ** 2 / np.where(E > 0, E, 1.0), 0.0)
        else:
            terms = np.where(O > 0, 2.0 * O * np.log(O / np.where(E > 0, E, 1.0)), 0.0)
    statistic = float(max(terms.sum(), 0.0))
    dof = S * (ri - 1) * (rj - 1)
    p_value = float(stats.chi2.sf(statistic, dof)) if dof > 0 else 1.0
    low = int(np.sum(np.any(E < 5, axis=(1, 2))))
    return CiTestResult(statistic, dof, p_value, p_value < alpha, low, False)


def ci_tester(data: Dataset, alpha: float = DEFAULT_ALPHA, kind: str = "chi2") -> Tester:
    """Closure answering 'dependent?' with the stratified test."""
    def dependent(i, j, Z):
        return ci_test(data, i, j, Z, alpha, kind).reject
    return dependent


def dsep_tester(dag: G.DagStructure) -> Tester:
    """Closure answering 'dependent?' by d-connection in ``dag``."""
    def dependent(i, j, Z):
        return not G.d_separated(dag, i, j, Z)
    return dependent


def estimate_in_degrees(tester: Tester, order: G.TopologicalOrder) -> list[int]:
    """In-degree of each non-root position: predecessors that stay dependent
    on the node given all other predecessors."""
    seq = order.seq
    out = []
    for k in range(1, len(seq)):
        j = seq[k]
        preds = frozenset(seq[:k])
        out.append(sum(1 for i in seq[:k] if tester(i, j, preds - {i})))
    return out


@dataclass(frozen=True)
class OrderDiagnosis:
    in_degrees: tuple[int, ...]
    exceed_fraction: float
    deg_max: int

    def to_json(self) -> dict:
        return {"in_degrees": list(self.in_degrees), "exceed_fraction": self.exceed_fraction,
                "deg_max": self.deg_max}


def diagnose_order(in_degrees: Sequence[int], deg_max: int) -> OrderDiagnosis:
    if deg_max < 1:
        raise InputError(f"deg_max must be >= 1, got {deg_max}")
    in_degrees = tuple(int(v) for v in in_degrees)
    frac = sum(v > deg_max for v in in_degrees) / len(in_degrees) if in_degrees else 0.0
    return OrderDiagnosis(in_degrees, frac, deg_max)


# ----------------------------------------------------- Dirichlet entropy

_ASYMPTOTIC_FROM = 6.0


def digamma(x: float) -> float:
    """psi(x) for x > 0: upward recurrence to x >= 6, then the asymptotic
    series through the x^-6 term."""
    if not x > 0:
        raise NonPositiveConcentration(f"digamma argument must be positive, got {x}")
    acc = 0.0
    while x < _ASYMPTOTIC_FROM:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = math.log(x) - 0.5 / x - inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 / 252))
    return acc + series


def expected_dirichlet_entropy(n: int, s: float) -> float:
    """Mean Shannon entropy of a symmetric Dirichlet with total concentration s."""
    if n < 2:
        raise InputError(f"need at least two categories, got {n}")
    if not s > 0:
        raise NonPositiveConcentration(f"concentration must be positive, got {s}")
    return digamma(s + 1.0) - digamma(s / n + 1.0)


def entropy_gap_two_term(n: int, s: float) -> float:
    """ln n minus the expected entropy, using psi(x) ~ ln x - 1/(2x)."""
    if not s > 0:
        raise NonPositiveConcentration(f"concentration must be positive, got {s}")
    def psi2(x):
        return math.log(x) - 0.5 / x
    return math.log(n) - (psi2(s + 1.0) - psi2(s / n + 1.0))


def c_coef(n: int) -> float:
    return 1.5 * n + 0.5


def prop1_gap(n_i: int, n_j: int, K_i: int, K_j: int, alpha0: float) -> tuple[float, bool]:
    """ln(n_j / n_i) + (K_i c(n_i) - K_j c(n_j)) / alpha0 and whether it is >= 0."""
    if not alpha0 > 0:
        raise NonPositiveAlpha(f"alpha0 must be positive, got {alpha0}")
    if min(n_i, n_j, K_i, K_j) <= 0:
        raise InputError("cardinalities and row counts must be positive")
    # difference of logs (not log of ratio) keeps the swap i<->j an exact negation
    gap = (math.log(n_j) - math.log(n_i)) + (K_i * c_coef(n_i) - K_j * c_coef(n_j)) / alpha0
    return gap, gap >= 0


def exact_prop1_gap(n_i: int, n_j: int, K_i: int, K_j: int, alpha0: float) -> float:
    """Difference of expected row entropies, child minus parent, with each
    row drawn from Dirichlet(alpha0 / (n K) * 1)."""
    return (expected_dirichlet_entropy(n_j, alpha0 / K_j)
            - expected_dirichlet_entropy(n_i, alpha0 / K_i))


@dataclass(frozen=True)
class Prop1Report:
    edges: tuple[tuple[int, int, float, bool], ...]
    holds: bool

    def to_json(self) -> dict:
        return {"holds": self.holds,
                "edges": [{"parent": i, "child": j, "gap": g, "holds": h} for i, j, g, h in self.edges]}


def check_prop1(dag: G.DagStructure, cards: Sequence[int], alpha0: float) -> Prop1Report:
    if len(cards) != dag.d:
        raise InputError(f"{len(cards)} cardinalities for {dag.d} nodes")
    K = [int(np.prod([cards[p] for p in dag.parents(v)], dtype=np.int64)) for v in range(dag.d)]
    rows = []
    for i, j in sorted(dag.edges()):
        gap, ok = prop1_gap(cards[i], cards[j], K[i], K[j], alpha0)
        rows.append((i, j, gap, ok))
    return Prop1Report(tuple(rows), all(r[3] for r in rows))


# ------------------------------------------------------------------ study

@dataclass(frozen=True)
class StudyRow:
    graph_id: int
    d: int
    edges: int
    deg_max: int
    exceed_fraction: float
    dtop_normalized: float


@dataclass(frozen=True)
class StudyResult:
    rows: tuple[StudyRow, ...]
    pearson: float
    pearson_p: float
    spearman: float
    spearman_p: float

    CSV_COLUMNS = ("graph_id", "d", "edges", "deg_max", "exceed_fraction", "dtop_normalized")


def _study_one(args) -> StudyRow:
    g, seed, d_range, degree_range, deg_max = args
    rng = np.random.default_rng(seed)
    d = int(rng.integers(d_range[0], d_range[1] + 1))
    k = rng.uniform(*degree_range)
    expected = min(int(round(k * d)), d * (d - 1) // 2)
    dag = G.gen_er(d, expected, rng)
    order = G.TopologicalOrder.from_sequence(rng.permutation(d))
    diag = diagnose_order(estimate_in_degrees(dsep_tester(dag), order), deg_max)
    return StudyRow(g, d, dag.num_edges, deg_max, diag.exceed_fraction, d_top(order, dag) / math.comb(d, 2))


def exceed_vs_dtop_study(num_graphs: int = 1000, d_range: tuple[int, int] = (5, 30),
                         degree_range: tuple[float, float] = (2.0, 4.0), deg_max: int = 3,
                         seed: int = 0, workers: int = 1) -> StudyResult:
    """Random ER graphs, each with a uniformly random candidate order.

    Graph g uses the generator seeded with ``seed XOR g``.  Its edge budget
    is round(k d) with k ~ U(degree_range), capped at C(d, 2).  Correlations
    are one-sided (greater) Pearson and Spearman tests.
    """
    if num_graphs < 3 or d_range[0] < 2 or d_range[0] > d_range[1] or degree_range[0] > degree_range[1]:
        raise InputError("study needs >= 3 graphs and ordered positive ranges")
    tasks = [(g, seed ^ g, tuple(d_range), tuple(degree_range), deg_max) for g in range(num_graphs)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = tuple(pool.map(_study_one, tasks, chunksize=16))
    else:
        rows = tuple(map(_study_one, tasks))
    x = np.array([r.exceed_fraction for r in rows])
    y = np.array([r.dtop_normalized for r in rows])
    pr = stats.pearsonr(x, y, alternative="greater")
    sr = stats.spearmanr(x, y, alternative="greater")
    return StudyResult(rows, float(pr.statistic), float(pr.pvalue), float(sr.statistic), float(sr.pvalue))
