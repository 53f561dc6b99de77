"""From an order to a graph: forbidden edges, decomposable scores, greedy
hill climbing, order-based pruning and edge insertion."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import gammaln

from . import graph as G
from .bayesnet import Dataset
from .errors import CardinalityMismatch, ConfigError, InputError

_IMPROVE_TOL = 1e-9
_KEY_LIMIT = 2**62


@dataclass(frozen=True)
class ScoreKind:
    kind: str = "bdeu"
    ess: float = 1.0

    def __post_init__(self):
        if self.kind not in ("bdeu", "bic"):
            raise ConfigError(f"unknown score {self.kind!r}")
        if self.kind == "bdeu" and not self.ess > 0:
            raise ConfigError(f"equivalent sample size must be positive, got {self.ess}")

    def __str__(self):
        return f"bdeu:{self.ess!r}" if self.kind == "bdeu" else "bic"


BDEU = ScoreKind("bdeu", 1.0)
BIC = ScoreKind("bic")


def parse_score(text: str | ScoreKind) -> ScoreKind:
    """``bic``, ``bdeu`` or ``bdeu:<ess>``."""
    if isinstance(text, ScoreKind):
        return text
    name, _, arg = text.strip().lower().partition(":")
    if name == "bic" and not arg:
        return BIC
    if name == "bdeu":
        try:
            return ScoreKind("bdeu", float(arg) if arg else 1.0)
        except ValueError:
            raise ConfigError(f"bad equivalent sample size in {text!r}") from None
    raise ConfigError(f"unknown score {text!r}")


def forbidden_edges(order: G.TopologicalOrder) -> frozenset:
    """Every pair (j, i) with j placed after i; the edge j -> i is disallowed."""
    seq = order.seq
    return frozenset((seq[b], seq[a]) for a in range(len(seq)) for b in range(a + 1, len(seq)))


def prune_with_order(candidate, order: G.TopologicalOrder) -> G.DagStructure:
    """Drop forbidden edges from a DAG or any square boolean digraph."""
    adj = np.array(candidate.adj if isinstance(candidate, G.DagStructure) else candidate, dtype=bool)
    if adj.shape != (len(order), len(order)):
        raise InputError(f"candidate of shape {adj.shape} does not match order of length {len(order)}")
    pos = np.asarray(order.pos)
    adj &= pos[:, None] < pos[None, :]
    return G.validate_dag(adj)


def _group_ids(rows: np.ndarray, cols, cards):
    if not cols:
        return np.zeros(rows.shape[0], dtype=np.int64), 1
    size = 1
    for c in cols:
        size *= int(cards[c])
    if size < _KEY_LIMIT:
        key = np.zeros(rows.shape[0], dtype=np.int64)
        for c in cols:
            key = key * cards[c] + rows[:, c]
        _, inv = np.unique(key, return_inverse=True)
    else:
        _, inv = np.unique(rows[:, list(cols)], axis=0, return_inverse=True)
    inv = inv.ravel()
    return inv, int(inv.max()) + 1


def family_counts(data: Dataset, i: int, parents: Iterable[int]) -> np.ndarray:
    """Counts N_ijk over the parent configurations that occur in the data."""
    inv, groups = _group_ids(data.rows, sorted(parents), data.cards)
    n = data.cards[i]
    return np.bincount(inv * n + data.rows[:, i], minlength=groups * n).reshape(groups, n)


def family_score(data: Dataset, i: int, parents: Iterable[int], kind: ScoreKind = BDEU) -> float:
    parents = tuple(sorted(parents))
    counts = family_counts(data, i, parents).astype(float)
    r = data.cards[i]
    q = float(np.prod([data.cards[p] for p in parents])) if parents else 1.0
    n_ij = counts.sum(axis=1)
    if kind.kind == "bdeu":
        a_j = kind.ess / q
        a_jk = kind.ess / (r * q)
        # configurations absent from the data contribute zero
        return float(np.sum(gammaln(a_j) - gammaln(a_j + n_ij))
                     + np.sum(gammaln(a_jk + counts) - gammaln(a_jk)))
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = np.where(counts > 0, counts * np.log(counts / n_ij[:, None]), 0.0).sum()
    return float(ll - 0.5 * np.log(data.N) * (r - 1) * q)


class FamilyScorer:
    """Memoised family scores for one dataset and score kind."""

    def __init__(self, data: Dataset, kind: ScoreKind = BDEU):
        self.data = data
        self.kind = kind
        self._cache: dict = {}

    def __call__(self, i: int, parents: Iterable[int]) -> float:
        key = (i, tuple(sorted(parents)))
        val = self._cache.get(key)
        if val is None:
            val = self._cache[key] = family_score(self.data, i, key[1], self.kind)
        return val

    def total(self, dag: G.DagStructure) -> float:
        return float(sum(self(i, dag.parents(i)) for i in range(dag.d)))


def _check_dims(dag: G.DagStructure, data: Dataset) -> None:
    if dag.d != data.d:
        raise CardinalityMismatch(f"graph has {dag.d} nodes, data has {data.d} columns")


def score_graph(dag: G.DagStructure, data: Dataset, kind: ScoreKind = BDEU) -> float:
    _check_dims(dag, data)
    return FamilyScorer(data, kind).total(dag)


def _reaches(adj: np.ndarray, src: int, dst: int) -> bool:
    seen = np.zeros(adj.shape[0], dtype=bool)
    queue = deque([src])
    seen[src] = True
    while queue:
        v = queue.popleft()
        if v == dst:
            return True
        for c in np.flatnonzero(adj[v] & ~seen):
            seen[c] = True
            queue.append(c)
    return False


def _parents(adj, j):
    return tuple(np.flatnonzero(adj[:, j]).tolist())


def hill_climb(data: Dataset, kind: ScoreKind = BDEU, forbidden: Iterable = (), max_parents: int = 4,
               start: G.DagStructure | None = None, scorer: FamilyScorer | None = None) -> G.DagStructure:
    """Greedy search over single-edge additions, deletions and reversals.

    The best strictly improving move is applied until none is left.  Ties
    go to the first move in (kind, i, j) order with kind add < delete <
    reverse.  Forbidden pairs (a, b) block the edge a -> b.
    """
    d = data.d
    forbidden = frozenset(tuple(p) for p in forbidden)
    scorer = scorer or FamilyScorer(data, kind)
    adj = np.zeros((d, d), dtype=bool) if start is None else np.array(start.adj)
    if start is not None:
        _check_dims(start, data)
    while True:
        best_delta, best_move = _IMPROVE_TOL, None
        for i in range(d):
            for j in range(d):
                if i == j or adj[i, j] or adj[j, i] or (i, j) in forbidden:
                    continue
                pa = _parents(adj, j)
                if len(pa) >= max_parents or _reaches(adj, j, i):
                    continue
                delta = scorer(j, pa + (i,)) - scorer(j, pa)
                if delta > best_delta:
                    best_delta, best_move = delta, ("add", i, j)
        for i, j in zip(*np.nonzero(adj)):
            pa = _parents(adj, j)
            delta = scorer(j, tuple(p for p in pa if p != i)) - scorer(j, pa)
            if delta > best_delta:
                best_delta, best_move = delta, ("delete", int(i), int(j))
        for i, j in zip(*np.nonzero(adj)):
            i, j = int(i), int(j)
            pa_i = _parents(adj, i)
            if (j, i) in forbidden or len(pa_i) >= max_parents:
                continue
            adj[i, j] = False
            cyclic = _reaches(adj, i, j)
            adj[i, j] = True
            if cyclic:
                continue
            pa_j = _parents(adj, j)
            delta = (scorer(j, tuple(p for p in pa_j if p != i)) - scorer(j, pa_j)
                     + scorer(i, pa_i + (j,)) - scorer(i, pa_i))
            if delta > best_delta:
                best_delta, best_move = delta, ("reverse", i, j)
        if best_move is None:
            return G.validate_dag(adj)
        move, i, j = best_move
        if move == "add":
            adj[i, j] = True
        elif move == "delete":
            adj[i, j] = False
        else:
            adj[i, j] = False
            adj[j, i] = True


def edge_insertion(base: G.DagStructure, order: G.TopologicalOrder, data: Dataset, kind: ScoreKind = BDEU,
                   fixpoint: bool = False, scorer: FamilyScorer | None = None) -> G.DagStructure:
    """Add predecessor -> node edges that strictly improve the score.

    Nodes are visited in order position; for each, predecessors are tried
    nearest first.  An edge closing a cycle in ``base`` is skipped.  With
    ``fixpoint`` the pass repeats until nothing changes.
    """
    _check_dims(base, data)
    if len(order) != base.d:
        raise InputError(f"order of length {len(order)} for a graph on {base.d} nodes")
    scorer = scorer or FamilyScorer(data, kind)
    adj = np.array(base.adj)
    seq = order.seq
    changed = True
    while changed:
        changed = False
        for k, node in enumerate(seq):
            for pred in reversed(seq[:k]):
                if adj[pred, node] or _reaches(adj, node, pred):
                    continue
                pa = _parents(adj, node)
                if scorer(node, pa + (pred,)) - scorer(node, pa) > _IMPROVE_TOL:
                    adj[pred, node] = True
                    changed = True
        if not fixpoint:
            break
    return G.validate_dag(adj)
