"""Discrete Bayesian networks: CPT storage, generators, ancestral sampling
and exact inference by enumeration.

CPT rows follow one convention everywhere in the package: parents sorted
ascending by node index, row-major, last parent varying fastest.  Reshaping
the (K_i, n_i) table to ``cards[parents] + (n_i,)`` therefore yields a factor
whose axes are the parents followed by the node itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import graph as G
from .errors import (
    CardinalityMismatch,
    GenerationFailed,
    IndexOutOfRange,
    InputError,
    LengthMismatch,
    NonPositiveAlpha,
    StateOutOfRange,
    StateSpaceTooLarge,
    ZeroContext,
)
from .randomness import MeasureSpec, measure_rows

DEFAULT_CAP = 10**7
PROB_FLOOR = 1e-12
_ROW_TOL = 1e-9
_EINSUM_MAX_LABELS = 52


@dataclass(frozen=True, eq=False)
class DiscreteBayesNet:
    dag: G.DagStructure
    cards: tuple[int, ...]
    cpts: tuple[np.ndarray, ...]

    def __post_init__(self):
        d = self.dag.d
        if len(self.cards) != d or len(self.cpts) != d:
            raise LengthMismatch(f"need {d} cardinalities and CPTs")
        for i in range(d):
            n = self.cards[i]
            if n < 2:
                raise CardinalityMismatch(f"node {i} has cardinality {n} < 2")
            table = self.cpts[i]
            K = self.num_rows(i)
            if table.shape != (K, n):
                raise CardinalityMismatch(f"CPT of node {i} has shape {table.shape}, expected {(K, n)}")
            if np.any(table < 0) or not np.all(np.isfinite(table)):
                raise InputError(f"CPT of node {i} has negative or non-finite entries")
            bad = np.flatnonzero(np.abs(table.sum(axis=1) - 1.0) > _ROW_TOL)
            if bad.size:
                raise InputError(f"CPT row {int(bad[0])} of node {i} does not sum to 1")
            table.flags.writeable = False

    @classmethod
    def build(cls, dag: G.DagStructure, cards: Sequence[int], cpts: Iterable) -> "DiscreteBayesNet":
        cards = tuple(int(c) for c in cards)
        cpts = list(cpts)
        if len(cpts) != len(cards):
            raise LengthMismatch(f"{len(cpts)} CPTs for {len(cards)} cardinalities")
        tables = tuple(np.array(t, dtype=float).reshape(-1, cards[i]) for i, t in enumerate(cpts))
        return cls(dag, cards, tables)

    @property
    def d(self) -> int:
        return self.dag.d

    def parents(self, i: int) -> tuple[int, ...]:
        return self.dag.parents(i)

    def num_rows(self, i: int) -> int:
        return int(np.prod([self.cards[p] for p in self.dag.parents(i)], dtype=np.int64))

    def factor(self, i: int) -> np.ndarray:
        shape = tuple(self.cards[p] for p in self.dag.parents(i)) + (self.cards[i],)
        return self.cpts[i].reshape(shape)

    def state_space_size(self) -> int:
        return int(np.prod(self.cards, dtype=object))

    def __eq__(self, other):
        if not isinstance(other, DiscreteBayesNet):
            return NotImplemented
        return (self.dag == other.dag and self.cards == other.cards
                and all(np.array_equal(a, b) for a, b in zip(self.cpts, other.cpts)))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Dataset:
    rows: np.ndarray
    cards: tuple[int, ...]

    def __post_init__(self):
        rows = self.rows
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise InputError("dataset needs a non-empty N x d matrix")
        if rows.shape[1] != len(self.cards):
            raise LengthMismatch(f"{rows.shape[1]} columns but {len(self.cards)} cardinalities")
        if np.any(rows < 0) or np.any(rows >= np.asarray(self.cards)):
            r, c = np.argwhere((rows < 0) | (rows >= np.asarray(self.cards)))[0]
            raise StateOutOfRange(f"entry ({r}, {c}) = {rows[r, c]} outside [0, {self.cards[c]})")
        rows.flags.writeable = False

    @classmethod
    def of(cls, rows, cards) -> "Dataset":
        return cls(np.array(rows, dtype=np.int64, copy=True), tuple(int(c) for c in cards))

    @property
    def N(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def columns(self, idx: Sequence[int]) -> "Dataset":
        idx = list(idx)
        return Dataset.of(self.rows[:, idx], [self.cards[i] for i in idx])

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.cards == other.cards and np.array_equal(self.rows, other.rows)

    __hash__ = None


def parent_config_index(assignment: Sequence[int], parent_cards: Sequence[int]) -> int:
    """Mixed-radix row index, last parent fastest."""
    if len(assignment) != len(parent_cards):
        raise LengthMismatch("assignment and cardinality vectors differ in length")
    idx = 0
    for x, n in zip(assignment, parent_cards):
        if not 0 <= x < n:
            raise StateOutOfRange(f"state {x} outside [0, {n})")
        idx = idx * n + int(x)
    return idx


def config_indices(rows: np.ndarray, cols: Sequence[int], cards: Sequence[int]) -> np.ndarray:
    """Vectorised :func:`parent_config_index` for every row of a data matrix."""
    idx = np.zeros(rows.shape[0], dtype=np.int64)
    for c in cols:
        idx = idx * cards[c] + rows[:, c]
    return idx


def random_cards(d: int, rng: np.random.Generator, low: int = 3, high: int = 6) -> tuple[int, ...]:
    if not 2 <= low <= high:
        raise InputError(f"bad cardinality range [{low}, {high}]")
    return tuple(int(c) for c in rng.integers(low, high + 1, size=d))


def _floor(table: np.ndarray) -> np.ndarray:
    table = np.maximum(table, PROB_FLOOR)
    return table / table.sum(axis=-1, keepdims=True)


def _check_cards(dag: G.DagStructure, cards) -> tuple[int, ...]:
    cards = tuple(int(c) for c in cards)
    if len(cards) != dag.d:
        raise LengthMismatch(f"{len(cards)} cardinalities for {dag.d} nodes")
    if any(c < 2 for c in cards):
        raise CardinalityMismatch("every cardinality must be >= 2")
    return cards


def _num_rows(dag, cards, i) -> int:
    return int(np.prod([cards[p] for p in dag.parents(i)], dtype=np.int64))


def gen_uniform_cpts(dag: G.DagStructure, cards, rng: np.random.Generator) -> DiscreteBayesNet:
    """Rows of i.i.d. Uniform(0, 1) weights, normalised."""
    cards = _check_cards(dag, cards)
    cpts = []
    for i in range(dag.d):
        w = rng.random((_num_rows(dag, cards, i), cards[i]))
        cpts.append(_floor(w / w.sum(axis=1, keepdims=True)))
    return DiscreteBayesNet(dag, cards, tuple(cpts))


def gen_dirichlet_cpts(dag: G.DagStructure, cards, alpha0: float, rng: np.random.Generator) -> DiscreteBayesNet:
    """Rows drawn from a symmetric Dirichlet with concentration alpha0 / (n_i K_i)."""
    if not alpha0 > 0:
        raise NonPositiveAlpha(f"alpha0 must be positive, got {alpha0}")
    cards = _check_cards(dag, cards)
    cpts = []
    for i in range(dag.d):
        K, n = _num_rows(dag, cards, i), cards[i]
        cpts.append(_floor(rng.dirichlet(np.full(n, alpha0 / (n * K)), size=K)))
    return DiscreteBayesNet(dag, cards, tuple(cpts))


# ---------------------------------------------------------------- inference

def _marginal_of(dag, cards, factor_of, S: Sequence[int], cap: int) -> np.ndarray:
    S = list(S)
    if not S:
        return np.ones(())
    if len(set(S)) != len(S):
        raise InputError(f"repeated node in {S}")
    size = int(np.prod([cards[v] for v in S], dtype=object))
    if size > cap:
        raise StateSpaceTooLarge(f"marginal over {len(S)} nodes has {size} states (cap {cap})")
    closure = sorted(G.ancestors(dag, S))
    if len(closure) > _EINSUM_MAX_LABELS:
        raise StateSpaceTooLarge(f"ancestral closure of {len(closure)} nodes is too large to contract")
    operands = []
    for v in closure:
        operands.append(factor_of(v))
        operands.append(list(dag.parents(v)) + [v])
    return np.einsum(*operands, S, optimize="greedy")


def marginal(bn: DiscreteBayesNet, S: Sequence[int], cap: int = DEFAULT_CAP) -> np.ndarray:
    """Exact marginal table of X_S with axes in the order given by ``S``."""
    for v in S:
        if not 0 <= v < bn.d:
            raise IndexOutOfRange(f"node {v} outside 0..{bn.d - 1}")
    return _marginal_of(bn.dag, bn.cards, bn.factor, S, cap)


def joint_table(bn: DiscreteBayesNet, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Full joint distribution as a d-dimensional array indexed by states."""
    size = bn.state_space_size()
    if size > cap:
        raise StateSpaceTooLarge(f"joint has {size} states (cap {cap})")
    if bn.d > _EINSUM_MAX_LABELS:
        raise StateSpaceTooLarge("too many variables for dense enumeration")
    return marginal(bn, list(range(bn.d)), cap)


def _check_assignment(bn: DiscreteBayesNet, x: Sequence[int]) -> tuple[int, ...]:
    if len(x) != bn.d:
        raise LengthMismatch(f"assignment has {len(x)} entries, network has {bn.d} nodes")
    for i, (v, n) in enumerate(zip(x, bn.cards)):
        if not 0 <= v < n:
            raise StateOutOfRange(f"node {i}: state {v} outside [0, {n})")
    return tuple(int(v) for v in x)


def _row(bn: DiscreteBayesNet, i: int, x: Sequence[int]) -> np.ndarray:
    pa = bn.parents(i)
    return bn.cpts[i][parent_config_index([x[p] for p in pa], [bn.cards[p] for p in pa])]


def joint_prob(bn: DiscreteBayesNet, x: Sequence[int]) -> float:
    x = _check_assignment(bn, x)
    p = 1.0
    for i in range(bn.d):
        p *= _row(bn, i, x)[x[i]]
    return float(p)


def exact_singleton_conditional(bn: DiscreteBayesNet, i: int, ctx: Sequence[int]) -> np.ndarray:
    """p(X_i | x_{-i}).

    ``ctx`` is either a full length-d assignment (entry i ignored) or the
    d-1 states of the other nodes in index order.  The joint is evaluated
    for each substituted value of x_i; only n_i configurations are visited.
    """
    if not 0 <= i < bn.d:
        raise IndexOutOfRange(f"node {i} outside 0..{bn.d - 1}")
    ctx = list(ctx)
    if len(ctx) == bn.d - 1:
        ctx.insert(i, 0)
    x = list(_check_assignment(bn, ctx))
    weights = np.empty(bn.cards[i])
    for k in range(bn.cards[i]):
        x[i] = k
        weights[k] = joint_prob(bn, x)
    total = weights.sum()
    if total <= 0:
        raise ZeroContext(f"context for node {i} has zero probability under every value")
    return weights / total


def conditional_randomness(bn: DiscreteBayesNet, i: int, phi: MeasureSpec, cap: int = DEFAULT_CAP) -> float:
    """phi(X_i | X_pa_i): CPT-row randomness weighted by exact parent marginals."""
    pa = bn.parents(i)
    weights = marginal(bn, pa, cap).ravel()
    return float(np.dot(weights, measure_rows(phi, bn.cpts[i])))


@dataclass(frozen=True)
class Condition2Report:
    holds: bool
    violations: tuple[tuple[int, int, float], ...]
    values: tuple[float, ...]


def verify_condition2(bn: DiscreteBayesNet, phi: MeasureSpec, cap: int = DEFAULT_CAP,
                      tol: float = 1e-12) -> Condition2Report:
    """Check phi(X_i | X_pa_i) <= phi(X_j | X_pa_j) along every edge i -> j.

    ``tol`` absorbs float noise when the two sides are mathematically equal.
    """
    values = tuple(conditional_randomness(bn, v, phi, cap) for v in range(bn.d))
    violations = tuple(
        (i, j, values[j] - values[i]) for i, j in sorted(bn.dag.edges()) if values[j] - values[i] < -tol
    )
    return Condition2Report(not violations, violations, values)


# ------------------------------------------------- monotone-randomness generator

def gen_condition2_bn(dag: G.DagStructure, cards, phi: MeasureSpec, rng: np.random.Generator,
                      max_tries: int = 50, margin: float = 5e-3, root_weight: float = 0.1,
                      base_concentration: float = 0.3, grid: int = 400,
                      cap: int = DEFAULT_CAP) -> DiscreteBayesNet:
    """Random BN whose conditional randomness increases along every edge.

    Each row mixes a sparse Dirichlet draw with the uniform vector.  Roots use
    the fixed weight ``root_weight``.  Every other node, visited in
    topological order, takes the smallest weight on a grid that puts its
    conditional randomness at least ``margin`` above each parent's.  The
    result is checked with :func:`verify_condition2` before it is returned.
    """
    cards = _check_cards(dag, cards)
    order = G.topological_order(dag).seq
    weights_grid = np.linspace(0.0, 0.999, grid)
    for _ in range(max(0, max_tries)):
        cpts: list = [None] * dag.d
        level = [0.0] * dag.d
        ok = True
        for v in order:
            n, K = cards[v], _num_rows(dag, cards, v)
            base = _floor(rng.dirichlet(np.full(n, base_concentration), size=K))
            pa = dag.parents(v)
            if not pa:
                cpts[v] = _floor((1 - root_weight) * base + root_weight / n)
                level[v] = float(measure_rows(phi, cpts[v])[0])
                continue
            pm = _marginal_of(dag, cards, lambda u: cpts[u].reshape(
                tuple(cards[p] for p in dag.parents(u)) + (cards[u],)), pa, cap).ravel()
            target = max(level[p] for p in pa) + margin
            candidates = (1 - weights_grid)[:, None, None] * base + weights_grid[:, None, None] / n
            scores = measure_rows(phi, candidates) @ pm
            hit = np.flatnonzero(scores >= target)
            if not hit.size:
                ok = False
                break
            cpts[v] = _floor(candidates[hit[0]])
            level[v] = float(scores[hit[0]])
        if not ok:
            continue
        bn = DiscreteBayesNet(dag, cards, tuple(cpts))
        if verify_condition2(bn, phi, cap).holds:
            return bn
    raise GenerationFailed(f"no CPT draw satisfied the randomness ordering within {max_tries} tries")


# ----------------------------------------------------------------- sampling

def sample(bn: DiscreteBayesNet, N: int, rng: np.random.Generator) -> Dataset:
    """Ancestral sampling by inverse CDF, nodes visited in topological order."""
    if N < 1:
        raise InputError(f"sample size must be >= 1, got {N}")
    rows = np.zeros((N, bn.d), dtype=np.int64)
    for v in G.topological_order(bn.dag).seq:
        idx = config_indices(rows, bn.parents(v), bn.cards)
        cdf = np.cumsum(bn.cpts[v], axis=1)[idx]
        u = rng.random(N)
        rows[:, v] = np.minimum((u[:, None] >= cdf).sum(axis=1), bn.cards[v] - 1)
    return Dataset(rows, bn.cards)


# ---------------------------------------------------------------------- I/O

def bn_to_json(bn: DiscreteBayesNet) -> dict:
    return {
        "cards": list(bn.cards),
        "edges": [list(e) for e in sorted(bn.dag.edges())],
        "cpts": {str(i): bn.cpts[i].tolist() for i in range(bn.d)},
    }


def bn_from_json(obj: dict) -> DiscreteBayesNet:
    try:
        cards = [int(c) for c in obj["cards"]]
        dag = G.from_edges(len(cards), [(int(a), int(b)) for a, b in obj["edges"]])
        cpts = [np.asarray(obj["cpts"][str(i)], dtype=float) for i in range(len(cards))]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed network JSON: {exc}") from exc
    for i, t in enumerate(cpts):
        if t.ndim != 2:
            raise CardinalityMismatch(f"CPT of node {i} must be a list of rows")
    return DiscreteBayesNet(dag, tuple(cards), tuple(cpts))


def dumps_json(obj) -> str:
    """Canonical JSON text: sorted keys, shortest round-trip floats."""
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"
