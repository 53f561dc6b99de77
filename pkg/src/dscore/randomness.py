"""Randomness measures on probability vectors, majorization and the
Q-transform lower bound.

All logarithms are natural and ``0 * log 0`` is taken as 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateJoint, InvalidM, InvalidMeasureParam, NoAdmissibleSet

KINDS = ("shannon", "renyi", "neg_log_variance", "kl_to_uniform_negated")

_ALIASES = {
    "shannon": "shannon",
    "entropy": "shannon",
    "renyi": "renyi",
    "neg-log-var": "neg_log_variance",
    "neg_log_variance": "neg_log_variance",
    "variance": "neg_log_variance",
    "neg-kl-uniform": "kl_to_uniform_negated",
    "kl_to_uniform_negated": "kl_to_uniform_negated",
}


@dataclass(frozen=True)
class MeasureSpec:
    kind: str = "shannon"
    order: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidMeasureParam(f"unknown measure kind {self.kind!r}")
        if self.kind == "renyi":
            if self.order is None or not np.isfinite(self.order) or self.order <= 0 or self.order == 1:
                raise InvalidMeasureParam(f"Renyi order must be positive and != 1, got {self.order}")
        elif self.order is not None:
            raise InvalidMeasureParam(f"measure {self.kind} takes no order parameter")

    def __str__(self):
        if self.kind == "renyi":
            return f"renyi:{self.order!r}"
        return {"shannon": "shannon", "neg_log_variance": "neg-log-var",
                "kl_to_uniform_negated": "neg-kl-uniform"}[self.kind]


SHANNON = MeasureSpec("shannon")
NEG_LOG_VARIANCE = MeasureSpec("neg_log_variance")


def parse_measure(text: str | MeasureSpec) -> MeasureSpec:
    """Parse ``shannon``, ``renyi:2.0``, ``neg-log-var`` or ``neg-kl-uniform``."""
    if isinstance(text, MeasureSpec):
        return text
    name, _, param = text.strip().partition(":")
    kind = _ALIASES.get(name.strip().lower())
    if kind is None:
        raise InvalidMeasureParam(f"unknown measure {text!r}")
    if kind == "renyi":
        try:
            order = float(param)
        except ValueError:
            raise InvalidMeasureParam(f"bad Renyi order in {text!r}") from None
        return MeasureSpec("renyi", order)
    if param:
        raise InvalidMeasureParam(f"measure {name!r} takes no parameter")
    return MeasureSpec(kind)


def _xlogx(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)


def measure_rows(phi: MeasureSpec, P: np.ndarray, axis: int = -1) -> np.ndarray:
    """Evaluate ``phi`` on every probability vector of ``P`` along ``axis``."""
    P = np.asarray(P, dtype=float)
    P = np.moveaxis(P, axis, -1)
    n = P.shape[-1]
    if phi.kind == "shannon":
        return -_xlogx(P).sum(axis=-1)
    if phi.kind == "kl_to_uniform_negated":
        return -_xlogx(P).sum(axis=-1) - np.log(n) * P.sum(axis=-1)
    if phi.kind == "renyi":
        a = phi.order
        with np.errstate(divide="ignore"):
            powered = np.where(P > 0, np.power(np.where(P > 0, P, 1.0), a), 0.0)
        return np.log(powered.sum(axis=-1)) / (1.0 - a)
    # neg_log_variance: minus the variance of log p under p
    with np.errstate(divide="ignore"):
        logp = np.where(P > 0, np.log(np.where(P > 0, P, 1.0)), 0.0)
    mu = (P * logp).sum(axis=-1, keepdims=True)
    return -(P * (logp - mu) ** 2).sum(axis=-1)


def measure_eval(phi: MeasureSpec, p: Sequence[float]) -> float:
    return float(measure_rows(phi, np.asarray(p, dtype=float)))


def _sorted_padded(a, b):
    a = np.sort(np.asarray(a, dtype=float))[::-1]
    b = np.sort(np.asarray(b, dtype=float))[::-1]
    n = max(a.size, b.size)
    return np.pad(a, (0, n - a.size)), np.pad(b, (0, n - b.size))


def majorizes(a, b, tol: float = 1e-12) -> bool:
    """True iff ``a`` majorizes ``b`` (prefix sums of the sorted vectors)."""
    a, b = _sorted_padded(a, b)
    return bool(np.all(np.cumsum(a) >= np.cumsum(b) - tol))


def q_transform(p, m: int) -> np.ndarray:
    """Keep the m-1 smallest entries of sorted ``p`` and lump the rest
    into the first component."""
    p = np.sort(np.asarray(p, dtype=float))[::-1]
    n = p.size
    if not 2 <= m < n:
        raise InvalidM(f"need 2 <= m < n, got m={m}, n={n}")
    return np.concatenate(([p[: n - m + 1].sum()], p[n - m + 1:]))


def conditional_information(joint, phi: MeasureSpec) -> float:
    """phi(X | Y) for a joint table with X on rows and Y on columns.

    Columns with zero mass get weight zero.
    """
    joint = np.asarray(joint, dtype=float)
    py = joint.sum(axis=0)
    if not np.any(py > 0):
        raise DegenerateJoint("joint table has no mass")
    live = py > 0
    cond = joint[:, live] / py[live]
    return float(np.dot(py[live], measure_rows(phi, cond, axis=0)))


@dataclass(frozen=True)
class Theorem2Bound:
    value: float
    argmin: tuple[int, ...]
    candidates: int


def theorem2_bound_details(bn, i: int, phi: MeasureSpec, deg_max: int) -> Theorem2Bound:
    from .bayesnet import marginal  # bayesnet imports this module

    if deg_max < 1:
        raise NoAdmissibleSet("deg_max must be >= 1")
    n_i = bn.cards[i]
    others = [v for v in range(bn.d) if v != i]
    best = None
    count = 0
    for size in range(1, min(deg_max, len(others)) + 1):
        for S in itertools.combinations(others, size):
            if int(np.prod([bn.cards[v] for v in S])) <= n_i:
                continue
            count += 1
            s = marginal(bn, S).ravel()
            value = measure_eval(phi, q_transform(s, n_i))
            if best is None or value < best[0]:
                best = (value, S)
    if best is None:
        raise NoAdmissibleSet(f"no candidate set of size <= {deg_max} has more than {n_i} states")
    return Theorem2Bound(best[0], best[1], count)


def theorem2_bound(bn, i: int, phi: MeasureSpec, deg_max: int) -> float:
    """Minimum of phi(Q_{n_i}(s)) over candidate parent sets S of node i
    (|S| <= deg_max, more joint states than n_i), s the exact marginal of X_S."""
    return theorem2_bound_details(bn, i, phi, deg_max).value
