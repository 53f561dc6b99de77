"""Sources of the singleton conditionals p(X_i | x_{-i}) and the leaf
criterion V_i = E[phi(p(X_i | X_{-i}))].

Two sources are provided: the exact network oracle and a count-based
estimator with additive smoothing.  Both return the conditional itself,
not its entrywise reciprocal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bayesnet import DEFAULT_CAP, Dataset, DiscreteBayesNet, exact_singleton_conditional, joint_table
from .errors import IndexOutOfRange, LengthMismatch, NonPositiveLambda, StateOutOfRange
from .randomness import MeasureSpec, measure_rows

DEFAULT_LAMBDA = 0.5
_KEY_LIMIT = 2**62


@dataclass(frozen=True, eq=False)
class ExactScore:
    bn: DiscreteBayesNet
    cap: int = DEFAULT_CAP

    @property
    def cards(self):
        return self.bn.cards


@dataclass(frozen=True, eq=False)
class EmpiricalScore:
    """Counts of every data row, compressed to distinct rows.

    ``rows`` holds the distinct rows in lexicographic order and ``freq``
    their multiplicities.  Contexts of node i are keyed by the mixed-radix
    code of the row with column i removed.
    """

    rows: np.ndarray
    freq: np.ndarray
    cards: tuple[int, ...]
    lam: float
    _tables: dict = field(default_factory=dict, repr=False)

    @property
    def N(self) -> int:
        return int(self.freq.sum())

    @property
    def d(self) -> int:
        return len(self.cards)

    def context_table(self, i: int):
        """(keys, counts): sorted unique context keys and their (C, n_i) counts."""
        if i not in self._tables:
            keys = context_keys(self.rows, i, self.cards)
            uniq, inv = _unique_inverse(keys)
            n = self.cards[i]
            counts = np.bincount(inv * n + self.rows[:, i], weights=self.freq,
                                 minlength=len(uniq) * n).reshape(len(uniq), n)
            self._tables[i] = (uniq, counts)
        return self._tables[i]


def _unique_inverse(keys):
    if keys.ndim == 1:
        return np.unique(keys, return_inverse=True)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    return uniq, inv.ravel()


def context_keys(rows: np.ndarray, i: int, cards: Sequence[int]) -> np.ndarray:
    """Mixed-radix code of each row without column i.

    Falls back to the raw sub-rows (compared lexicographically) when the
    code would not fit in 63 bits.
    """
    others = [c for c in range(len(cards)) if c != i]
    size = 1
    for c in others:
        size *= int(cards[c])
    if size >= _KEY_LIMIT:
        return np.ascontiguousarray(rows[:, others])
    key = np.zeros(rows.shape[0], dtype=np.int64)
    for c in others:
        key = key * cards[c] + rows[:, c]
    return key


def fit_empirical(data: Dataset, lam: float = DEFAULT_LAMBDA) -> EmpiricalScore:
    if not lam > 0:
        raise NonPositiveLambda(f"smoothing must be positive, got {lam}")
    uniq, freq = np.unique(data.rows, axis=0, return_counts=True)
    return EmpiricalScore(uniq, freq.astype(float), data.cards, float(lam))


def _smoothed(counts: np.ndarray, lam: float) -> np.ndarray:
    n = counts.shape[-1]
    return (counts + lam) / (counts.sum(axis=-1, keepdims=True) + lam * n)


def _lookup(uniq, query):
    """Positions of ``query`` keys in sorted ``uniq``; -1 where absent."""
    if uniq.ndim == 1:
        pos = np.searchsorted(uniq, query)
        pos = np.minimum(pos, len(uniq) - 1)
        return np.where(uniq[pos] == query, pos, -1)
    index = {tuple(r): k for k, r in enumerate(uniq.tolist())}
    return np.array([index.get(tuple(r), -1) for r in query.tolist()], dtype=np.int64)


def reciprocal_score(src, i: int, ctx: Sequence[int]) -> np.ndarray:
    """Conditional p(X_i | x_{-i}) from either source.

    ``ctx`` is a full assignment (entry i ignored) or the d-1 other states.
    """
    if isinstance(src, ExactScore):
        return exact_singleton_conditional(src.bn, i, ctx)
    d = src.d
    if not 0 <= i < d:
        raise IndexOutOfRange(f"node {i} outside 0..{d - 1}")
    ctx = [int(v) for v in ctx]
    if len(ctx) == d - 1:
        ctx.insert(i, 0)
    if len(ctx) != d:
        raise LengthMismatch(f"context has {len(ctx)} entries for {d} nodes")
    for c, (v, n) in enumerate(zip(ctx, src.cards)):
        if c != i and not 0 <= v < n:
            raise StateOutOfRange(f"node {c}: state {v} outside [0, {n})")
    ctx[i] = 0
    uniq, counts = src.context_table(i)
    pos = _lookup(uniq, context_keys(np.array([ctx]), i, src.cards))[0]
    n = src.cards[i]
    if pos < 0:
        return np.full(n, 1.0 / n)
    return _smoothed(counts[pos], src.lam)


def exact_criteria(table: np.ndarray, phi: MeasureSpec) -> np.ndarray:
    """V for every axis of a joint probability table.

    V_a = sum over contexts of Pr(context) * phi(conditional of axis a);
    contexts with zero mass are skipped.
    """
    out = np.empty(table.ndim)
    for a in range(table.ndim):
        ctx = table.sum(axis=a, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(ctx > 0, table / np.where(ctx > 0, ctx, 1.0), 1.0 / table.shape[a])
        vals = measure_rows(phi, cond, axis=a)
        out[a] = float(np.sum(np.squeeze(ctx, axis=a) * vals))
    return out


def empirical_criterion(src: EmpiricalScore, i: int, phi: MeasureSpec, weights: Dataset | None = None) -> float:
    """Sample average of phi(p_hat(X_i | x_{-i})) over the rows of ``weights``
    (the fitted data by default)."""
    uniq, counts = src.context_table(i)
    probs = _smoothed(counts, src.lam)
    vals = measure_rows(phi, probs)
    if weights is None:
        tot = counts.sum(axis=1)
        return float(np.dot(tot, vals) / tot.sum())
    if weights.cards != src.cards:
        raise LengthMismatch("weighting data and score source disagree on cardinalities")
    pos = _lookup(uniq, context_keys(weights.rows, i, src.cards))
    uniform = measure_rows(phi, np.full(src.cards[i], 1.0 / src.cards[i]))
    per_row = np.where(pos >= 0, vals[np.maximum(pos, 0)], uniform)
    return float(per_row.mean())


def leaf_criterion(src, i: int, phi: MeasureSpec, weights: Dataset | None = None) -> float:
    if isinstance(src, ExactScore):
        if not 0 <= i < src.bn.d:
            raise IndexOutOfRange(f"node {i} outside 0..{src.bn.d - 1}")
        return float(exact_criteria(joint_table(src.bn, src.cap), phi)[i])
    if not 0 <= i < src.d:
        raise IndexOutOfRange(f"node {i} outside 0..{src.d - 1}")
    return empirical_criterion(src, i, phi, weights)
