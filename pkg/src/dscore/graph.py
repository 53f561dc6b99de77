"""DAG representation, orders, d-separation and random DAG generators."""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    CycleDetected,
    IndexOutOfRange,
    InputError,
    InvalidAttachment,
    LengthMismatch,
    OverlappingArguments,
    SelfLoop,
    TooManyEdges,
)


@dataclass(frozen=True, eq=False)
class DagStructure:
    """Acyclic directed graph; ``adj[i, j]`` is True for an edge i -> j.

    Build instances through :func:`validate_dag` (or the generators), which
    check acyclicity.  The adjacency array is made read-only.
    """

    adj: np.ndarray
    _parents: tuple = field(repr=False, compare=False, default=())
    _children: tuple = field(repr=False, compare=False, default=())

    @property
    def d(self) -> int:
        return self.adj.shape[0]

    def parents(self, i: int) -> tuple[int, ...]:
        return self._parents[i]

    def children(self, i: int) -> tuple[int, ...]:
        return self._children[i]

    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.adj))]

    @property
    def num_edges(self) -> int:
        return int(self.adj.sum())

    def in_degrees(self) -> np.ndarray:
        return self.adj.sum(axis=0).astype(int)

    def __eq__(self, other):
        if not isinstance(other, DagStructure):
            return NotImplemented
        return self.adj.shape == other.adj.shape and bool(np.array_equal(self.adj, other.adj))

    def __hash__(self):
        return hash((self.d, self.adj.tobytes()))

    def key(self) -> bytes:
        return self.d.to_bytes(4, "little") + np.packbits(self.adj).tobytes()


@dataclass(frozen=True)
class TopologicalOrder:
    """A permutation of nodes; ``seq[k]`` is the node at position k."""

    seq: tuple[int, ...]
    pos: tuple[int, ...]

    @classmethod
    def from_sequence(cls, seq: Iterable[int]) -> "TopologicalOrder":
        seq = tuple(int(v) for v in seq)
        d = len(seq)
        if sorted(seq) != list(range(d)):
            raise InputError(f"order {seq} is not a permutation of 0..{d - 1}")
        pos = [0] * d
        for k, v in enumerate(seq):
            pos[v] = k
        return cls(seq, tuple(pos))

    def __len__(self):
        return len(self.seq)


class Relations(NamedTuple):
    parents: frozenset
    children: frozenset
    descendants: frozenset
    markov_blanket: frozenset


def _find_cycle(adj: np.ndarray) -> list[int] | None:
    d = adj.shape[0]
    color = [0] * d
    stack_parent = [-1] * d
    succ = [np.flatnonzero(adj[i]).tolist() for i in range(d)]
    for start in range(d):
        if color[start]:
            continue
        stack = [(start, iter(succ[start]))]
        color[start] = 1
        while stack:
            v, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[v] = 2
                stack.pop()
                continue
            if color[nxt] == 1:
                cycle = [nxt]
                u = v
                while u != nxt:
                    cycle.append(u)
                    u = stack_parent[u]
                cycle.append(nxt)
                return cycle[::-1]
            if color[nxt] == 0:
                color[nxt] = 1
                stack_parent[nxt] = v
                stack.append((nxt, iter(succ[nxt])))
    return None


def _build(adj: np.ndarray) -> DagStructure:
    adj = np.array(adj, dtype=bool, copy=True)
    adj.flags.writeable = False
    d = adj.shape[0]
    parents = tuple(tuple(np.flatnonzero(adj[:, j]).tolist()) for j in range(d))
    children = tuple(tuple(np.flatnonzero(adj[i]).tolist()) for i in range(d))
    return DagStructure(adj, parents, children)


def validate_dag(adj) -> DagStructure:
    adj = np.asarray(adj)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise InputError(f"adjacency matrix must be square, got shape {adj.shape}")
    if adj.shape[0] < 1:
        raise InputError("graph needs at least one node")
    adj = adj.astype(bool)
    loops = np.flatnonzero(np.diag(adj))
    if loops.size:
        raise SelfLoop(f"self loop on node {int(loops[0])}")
    cycle = _find_cycle(adj)
    if cycle is not None:
        raise CycleDetected(cycle)
    return _build(adj)


def from_edges(d: int, edges: Iterable[Sequence[int]]) -> DagStructure:
    adj = np.zeros((d, d), dtype=bool)
    for i, j in edges:
        if not (0 <= i < d and 0 <= j < d):
            raise IndexOutOfRange(f"edge ({i}, {j}) outside 0..{d - 1}")
        adj[i, j] = True
    return validate_dag(adj)


def empty_graph(d: int) -> DagStructure:
    return _build(np.zeros((d, d), dtype=bool))


def _check_node(dag: DagStructure, i: int) -> None:
    if not 0 <= i < dag.d:
        raise IndexOutOfRange(f"node {i} outside 0..{dag.d - 1}")


def descendants(dag: DagStructure, i: int) -> frozenset:
    seen = set()
    queue = deque(dag.children(i))
    while queue:
        v = queue.popleft()
        if v not in seen:
            seen.add(v)
            queue.extend(dag.children(v))
    return frozenset(seen)


def ancestors(dag: DagStructure, nodes: Iterable[int]) -> frozenset:
    """Ancestors of ``nodes``, the nodes themselves included."""
    seen = set()
    queue = deque(nodes)
    while queue:
        v = queue.popleft()
        if v not in seen:
            seen.add(v)
            queue.extend(dag.parents(v))
    return frozenset(seen)


def relations(dag: DagStructure, i: int) -> Relations:
    _check_node(dag, i)
    pa = frozenset(dag.parents(i))
    ch = frozenset(dag.children(i))
    coparents = {p for c in ch for p in dag.parents(c)} - {i}
    return Relations(pa, ch, descendants(dag, i), frozenset(pa | ch | coparents))


def topological_order(dag: DagStructure) -> TopologicalOrder:
    """Kahn elimination, lowest node index first among the available nodes."""
    indeg = dag.in_degrees().tolist()
    heap = [v for v in range(dag.d) if indeg[v] == 0]
    heapq.heapify(heap)
    seq = []
    while heap:
        v = heapq.heappop(heap)
        seq.append(v)
        for c in dag.children(v):
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    return TopologicalOrder.from_sequence(seq)


def is_valid_order(dag: DagStructure, order: TopologicalOrder) -> bool:
    if len(order) != dag.d:
        raise LengthMismatch(f"order has {len(order)} nodes, graph has {dag.d}")
    pos = order.pos
    return all(pos[i] < pos[j] for i, j in dag.edges())


def d_separated(dag: DagStructure, i: int, j: int, Z: Iterable[int] = ()) -> bool:
    """True when every path between i and j is blocked by Z.

    Reachability ("Bayes ball") over (node, direction) states: a trail may
    pass a non-collider only outside Z and a collider only if it is an
    ancestor of Z.
    """
    Z = frozenset(Z)
    for v in (i, j, *Z):
        _check_node(dag, v)
    if i == j or i in Z or j in Z:
        raise OverlappingArguments(f"i={i}, j={j} and Z={sorted(Z)} must be disjoint")
    anc_z = ancestors(dag, Z)
    # direction True: arrived from a child (moving up); False: from a parent
    visited = set()
    queue = deque([(i, True)])
    while queue:
        v, up = queue.popleft()
        if (v, up) in visited:
            continue
        visited.add((v, up))
        if v == j:
            return False
        if up:
            if v not in Z:
                queue.extend((p, True) for p in dag.parents(v))
                queue.extend((c, False) for c in dag.children(v))
        else:
            if v not in Z:
                queue.extend((c, False) for c in dag.children(v))
            if v in anc_z:
                queue.extend((p, True) for p in dag.parents(v))
    return True


def gen_er(d: int, expected_edges: float, rng: np.random.Generator) -> DagStructure:
    """Erdos-Renyi DAG: a uniform random ranking, then each of the
    d(d-1)/2 rank-respecting pairs kept independently."""
    max_edges = d * (d - 1) // 2
    if expected_edges < 0 or expected_edges > max_edges:
        raise TooManyEdges(f"expected_edges={expected_edges} outside [0, {max_edges}]")
    p = expected_edges / max_edges if max_edges else 0.0
    perm = rng.permutation(d)
    keep = np.triu(rng.random((d, d)) < p, k=1)
    adj = np.zeros((d, d), dtype=bool)
    adj[np.ix_(perm, perm)] = keep
    return _build(adj)


def gen_sf(d: int, attach_m: int, rng: np.random.Generator) -> DagStructure:
    """Preferential-attachment DAG grown in index order.

    The first ``attach_m`` nodes form a complete DAG; every later node draws
    ``attach_m`` distinct parents among earlier nodes with probability
    proportional to degree + 1.  Edges point from old to new nodes.
    """
    if not 1 <= attach_m < d:
        raise InvalidAttachment(f"attach_m={attach_m} must satisfy 1 <= attach_m < d={d}")
    adj = np.zeros((d, d), dtype=bool)
    adj[:attach_m, :attach_m] = np.triu(np.ones((attach_m, attach_m), dtype=bool), k=1)
    degree = adj.sum(axis=0) + adj.sum(axis=1)
    for new in range(attach_m, d):
        w = degree[:new] + 1.0
        chosen = rng.choice(new, size=attach_m, replace=False, p=w / w.sum())
        adj[chosen, new] = True
        degree[chosen] += 1
        degree[new] += attach_m
    return _build(adj)


def graph_to_json(dag: DagStructure) -> dict:
    return {"d": dag.d, "edges": [list(e) for e in sorted(dag.edges())]}


def graph_from_json(obj: dict) -> DagStructure:
    try:
        d = int(obj["d"])
        edges = [(int(a), int(b)) for a, b in obj["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed graph JSON: {exc}") from exc
    return from_edges(d, edges)
