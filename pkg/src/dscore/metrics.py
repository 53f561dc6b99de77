"""Graph comparison: SHD, SID, skeleton/directed F1 and order divergence."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import graph as G
from .errors import DimensionMismatch


def _same_d(a: G.DagStructure, b: G.DagStructure) -> None:
    if a.d != b.d:
        raise DimensionMismatch(f"graphs have {a.d} and {b.d} nodes")


def shd(est: G.DagStructure, truth: G.DagStructure) -> int:
    """Unordered pairs whose edge status differs (extra, missing or reversed)."""
    _same_d(est, truth)
    a, b = est.adj, truth.adj
    differs = (a != b) | (a.T != b.T)
    return int(np.triu(differs, k=1).sum())


def _causal_nodes(truth: G.DagStructure, i: int, j: int) -> frozenset:
    """Nodes other than i lying on a directed path from i to j."""
    return frozenset(G.descendants(truth, i) & G.ancestors(truth, [j]))


def valid_parent_adjustment(truth: G.DagStructure, i: int, j: int, Z: frozenset) -> bool:
    """Adjustment criterion for the effect of i on j with set Z in ``truth``.

    Z may contain no descendant of a node (other than i) on a causal path,
    and must d-separate i and j once the first edges of causal paths are cut.
    """
    on_path = _causal_nodes(truth, i, j)
    forbidden = set(on_path)
    for w in on_path:
        forbidden |= G.descendants(truth, w)
    if Z & forbidden:
        return False
    adj = np.array(truth.adj)
    for w in on_path:
        adj[i, w] = False
    return G.d_separated(G.validate_dag(adj), i, j, Z)


def sid(est: G.DagStructure, truth: G.DagStructure) -> int:
    """Ordered pairs (i, j) whose interventional distribution p(x_j | do(x_i))
    is wrongly inferred when adjusting for the parents of i in ``est``."""
    _same_d(est, truth)
    d = truth.d
    desc = [G.descendants(truth, i) for i in range(d)]
    errors = 0
    for i in range(d):
        Z = frozenset(est.parents(i))
        for j in range(d):
            if i == j:
                continue
            if j in Z:
                errors += j in desc[i]
            elif not valid_parent_adjustment(truth, i, j, Z):
                errors += 1
    return errors


def _f1(est: set, true: set) -> float:
    if not est and not true:
        return 1.0
    hit = len(est & true)
    if hit == 0:
        return 0.0
    p, r = hit / len(est), hit / len(true)
    return 2 * p * r / (p + r)


def f1(est: G.DagStructure, truth: G.DagStructure) -> tuple[float, float, float]:
    """(skeleton F1, directed F1, their mean); both empty counts as perfect."""
    _same_d(est, truth)
    e, t = set(est.edges()), set(truth.edges())
    skel = _f1({frozenset(x) for x in e}, {frozenset(x) for x in t})
    directed = _f1(e, t)
    return skel, directed, (skel + directed) / 2


def d_top(order: G.TopologicalOrder, truth: G.DagStructure) -> int:
    """True edges whose head precedes their tail in ``order``."""
    if len(order) != truth.d:
        raise DimensionMismatch(f"order has {len(order)} nodes, graph has {truth.d}")
    pos = order.pos
    return sum(1 for a, b in truth.edges() if pos[a] > pos[b])


@dataclass(frozen=True)
class MetricsReport:
    shd: int
    shd_normalized: float
    sid: int
    sid_normalized: float
    f1_skeleton: float
    f1_directed: float
    f1_avg: float
    dtop: int | None = None

    def to_json(self) -> dict:
        out = asdict(self)
        if self.dtop is None:
            del out["dtop"]
        return out


def evaluate(est: G.DagStructure, truth: G.DagStructure, order: G.TopologicalOrder | None = None) -> MetricsReport:
    """All metrics; normalised counts divide by the true edge count (raw if zero)."""
    s, i = shd(est, truth), sid(est, truth)
    m = truth.num_edges or 1
    skel, directed, avg = f1(est, truth)
    return MetricsReport(s, s / m, i, i / m, skel, directed, avg,
                         None if order is None else d_top(order, truth))
