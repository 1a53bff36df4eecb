"""Stein operator for the ECOMP family.

X ~ ECOMP(nu, p, alpha, beta) if and only if

    E[X^alpha g(X) - p (X + nu)^beta g(X + 1)] = 0

for every bounded g on the nonnegative integers. Indicator test functions
reduce the identity to the successive-ratio recurrence, which is what
:func:`verify_recurrence` checks directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import MAX_TERMS, EcompParams, PmfTable, build_table, ratio
from .errors import UnboundedTestFunction

OPERATOR_TAIL_TOL = 1e-14


@dataclass(frozen=True)
class SteinReport:
    residuals: tuple  # of (test function id, residual)
    max_abs: float
    table_tail_bound: float
    truncation_bound: float

    def as_dict(self) -> dict:
        return {
            "residuals": [{"g": name, "residual": value} for name, value in self.residuals],
            "max_abs": self.max_abs,
            "table_tail_bound": self.table_tail_bound,
            "truncation_bound": self.truncation_bound,
        }


def _operator_coefficients(params: EcompParams, k: np.ndarray):
    # the X^alpha factor vanishes at X = 0 for every alpha, including alpha = 0;
    # otherwise E[g(X) - p g(X+1)] = (1-p) g(0) on the geometric law
    return np.power(k, params.alpha) * (k > 0), params.p * np.power(k + params.nu, params.beta)


def _truncation_bound(table: PmfTable, g_bound: float) -> float:
    """Bound on the operator mass above K: sum_{k>K} pmf(k) (k^alpha + p (k+nu)^beta)."""
    params = table.params
    start = table.K + 1
    shift = (1.0 + params.nu / start) ** params.beta
    mass = table.tail_power_bound(params.alpha) + params.p * shift * table.tail_power_bound(
        params.beta
    )
    return g_bound * mass


def _summation_table(table: PmfTable, g_bound: float) -> PmfTable:
    """Same law tabulated far enough that the operator-weighted tail is negligible.

    A certified mass tail still leaves a boundary term p (K+nu)^beta pmf(K)
    g(K+1), which K^beta can inflate well above the mass tail.
    """
    target = OPERATOR_TAIL_TOL * max(1.0, g_bound)
    ext = table
    while _truncation_bound(ext, g_bound) > target and ext.K < MAX_TERMS:
        ext = build_table(table.params, table.tail_tol, min_k=int(ext.K * 1.25) + 16)
    return ext


def _residual(probs: np.ndarray, params: EcompParams, g_values: np.ndarray) -> float:
    k = np.arange(probs.size, dtype=float)
    down, up = _operator_coefficients(params, k)
    return float(np.sum(probs * (down * g_values[:-1] - up * g_values[1:])))


def _evaluate(g: Callable, n: int, bound: float | None) -> np.ndarray:
    values = np.array([float(g(k)) for k in range(n)])
    if bound is not None and np.any(np.abs(values) > bound):
        worst = int(np.argmax(np.abs(values)))
        raise UnboundedTestFunction(
            f"|g({worst})| = {abs(values[worst]):g} exceeds declared bound {bound:g}"
        )
    return values


def stein_expectation(table: PmfTable, g: Callable[[int], float], bound: float = 1.0) -> float:
    """E[X^alpha g(X) - p (X+nu)^beta g(X+1)].

    The sum runs over 0..K' with K' >= K chosen so the operator-weighted
    remainder is below 1e-14 times ``bound``. ``g`` is evaluated on 0..K'+1
    and must stay within ``bound`` there.
    """
    ext = _summation_table(table, bound)
    g_values = _evaluate(g, ext.K + 2, bound)
    return _residual(ext.probabilities, table.params, g_values)


def _suite(J: int):
    yield from ((f"indicator[{j}]", (lambda k, j=j: 1.0 if k == j else 0.0), 1.0) for j in range(J + 1))
    yield "constant", (lambda k: 1.0), 1.0
    yield f"min[{J}]", (lambda k: float(min(k, J))), float(J)
    yield "alternating", (lambda k: -1.0 if k % 2 else 1.0), 1.0


def stein_suite(table: PmfTable, J: int = 50, probabilities: np.ndarray | None = None) -> SteinReport:
    """Residuals over indicators of 0..J plus constant, min(k, J) and (-1)^k.

    ``probabilities`` overrides the pmf on 0..K (used to test perturbed
    candidates against the table's parameters); entries past K, if the sum
    is extended, come from the closed form.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    ext = _summation_table(table, float(J))
    probs = ext.probabilities
    if probabilities is not None:
        head = np.asarray(probabilities, dtype=float)
        if head.size != table.K + 1:
            raise ValueError("probabilities must cover 0..K")
        probs = np.concatenate([head, probs[table.K + 1 :]])
    residuals = []
    for name, g, bound in _suite(J):
        values = _evaluate(g, ext.K + 2, bound)
        residuals.append((name, _residual(probs, table.params, values)))
    max_abs = max(abs(r) for _, r in residuals)
    return SteinReport(tuple(residuals), max_abs, table.tail_bound, _truncation_bound(ext, float(J)))


def verify_recurrence(candidate, params: EcompParams, tol: float = 1e-12) -> bool:
    """True iff candidate[k+1] / candidate[k] matches the ECOMP ratio to relative ``tol``."""
    cand = np.asarray(candidate, dtype=float)
    if np.any(cand <= 0):
        raise ValueError("candidate must be strictly positive")
    if cand.size < 2:
        return True
    observed = cand[1:] / cand[:-1]
    expected = ratio(params, np.arange(cand.size - 1))
    return bool(np.all(np.abs(observed - expected) <= tol * np.abs(expected)))
