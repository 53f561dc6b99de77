"""Topological order recovery by repeated leaf removal.

At every step the surviving node with the largest criterion V is declared a
leaf, removed, and prepended to the order.  The first node removed ends up
in the last position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .bayesnet import DEFAULT_CAP, Dataset, DiscreteBayesNet, joint_table
from .errors import EmptyCandidateSet, NonFiniteCriterion
from .graph import TopologicalOrder
from .randomness import MeasureSpec
from .score import DEFAULT_LAMBDA, EmpiricalScore, empirical_criterion, exact_criteria, fit_empirical


@dataclass(frozen=True)
class Iteration:
    candidates: dict[int, float]
    selected: int


@dataclass(frozen=True)
class OrderSearchTrace:
    order: TopologicalOrder
    iterations: tuple[Iteration, ...]

    def to_json(self) -> dict:
        return {
            "order": list(self.order.seq),
            "iterations": [
                {"candidates": {str(k): v for k, v in it.candidates.items()}, "selected": it.selected}
                for it in self.iterations
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "OrderSearchTrace":
        its = tuple(
            Iteration({int(k): float(v) for k, v in it["candidates"].items()}, int(it["selected"]))
            for it in obj.get("iterations", [])
        )
        return cls(TopologicalOrder.from_sequence(obj["order"]), its)


def select_leaf(V: Mapping[int, float]) -> int:
    """Argmax of V; ties go to the lowest node index."""
    if not V:
        raise EmptyCandidateSet("no candidate nodes left")
    best = None
    for node in sorted(V):
        v = V[node]
        if not math.isfinite(v):
            raise NonFiniteCriterion(f"criterion of node {node} is {v}")
        if best is None or v > V[best]:
            best = node
    return best


def _finish(removed: list[int], iterations: list[Iteration]) -> OrderSearchTrace:
    return OrderSearchTrace(TopologicalOrder.from_sequence(removed[::-1]), tuple(iterations))


def order_search(data: Dataset, phi: MeasureSpec, lam: float = DEFAULT_LAMBDA,
                 refit: bool = True) -> OrderSearchTrace:
    """Leaf removal driven by the smoothed count estimator.

    With ``refit`` the estimator is rebuilt from the surviving columns at
    every step.  Without it the data are compressed once and each step only
    regroups the stored rows by surviving columns; the counts, and hence the
    criteria, are the same either way.
    """
    survivors = list(range(data.d))
    removed: list[int] = []
    iterations: list[Iteration] = []
    base = None if refit else fit_empirical(data, lam)
    while survivors:
        if refit:
            src = fit_empirical(data.columns(survivors), lam)
        else:
            src = _projected(base, survivors)
        V = {node: empirical_criterion(src, k, phi) for k, node in enumerate(survivors)}
        leaf = select_leaf(V)
        iterations.append(Iteration(V, leaf))
        removed.append(leaf)
        survivors.remove(leaf)
    return _finish(removed, iterations)


def _projected(base: EmpiricalScore, survivors: list[int]) -> EmpiricalScore:
    """Project the distinct rows of ``base`` onto ``survivors``, merging multiplicities."""
    uniq, inv = np.unique(base.rows[:, survivors], axis=0, return_inverse=True)
    freq = np.bincount(inv.ravel(), weights=base.freq, minlength=len(uniq))
    return EmpiricalScore(uniq, freq, tuple(base.cards[s] for s in survivors), base.lam)


def exact_order_search(bn: DiscreteBayesNet, phi: MeasureSpec, cap: int = DEFAULT_CAP) -> OrderSearchTrace:
    """Leaf removal with exact criteria computed from the joint table.

    Removing a node sums its axis out of the table, which is the exact
    marginal network over the survivors.
    """
    table = joint_table(bn, cap)
    survivors = list(range(bn.d))
    removed: list[int] = []
    iterations: list[Iteration] = []
    while survivors:
        vals = exact_criteria(table, phi)
        V = {node: float(vals[k]) for k, node in enumerate(survivors)}
        leaf = select_leaf(V)
        iterations.append(Iteration(V, leaf))
        removed.append(leaf)
        k = survivors.index(leaf)
        survivors.pop(k)
        table = table.sum(axis=k)
    return _finish(removed, iterations)
