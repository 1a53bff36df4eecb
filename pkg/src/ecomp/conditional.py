"""Sums of two independent ECOMP variables and the conditional law given the sum.

For X ~ ECOMP(nu1, p, alpha, beta) and Y ~ ECOMP(nu2, p, alpha, beta) the law of
X given X + Y = s is the extended negative hypergeometric distribution

    P(Z = k) ∝ [Gamma(nu1+k) Gamma(nu2+s-k)]^beta / [k! (s-k)!]^alpha,   k = 0..s

which does not involve p. :func:`reconstruct_marginals` runs the converse
construction: from a family of conditional tables it rebuilds the marginal
weights up to the exponential tilt p^x, which has to be supplied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .core import PmfTable, log_rising_factorial, log_weights
from .errors import DegenerateConditional, MismatchedParams, ZeroEvent

MAX_SUM = 10**4


@dataclass(frozen=True)
class EnhgParams:
    s: int
    nu1: float
    nu2: float
    alpha: float
    beta: float

    def __post_init__(self):
        if int(self.s) != self.s or not 0 <= self.s <= MAX_SUM:
            raise ValueError(f"s must be an integer in [0, {MAX_SUM}], got {self.s}")
        object.__setattr__(self, "s", int(self.s))
        if not (self.alpha >= self.beta >= 0):
            raise ValueError(f"need alpha >= beta >= 0, got alpha={self.alpha}, beta={self.beta}")
        if self.nu1 < 0 or self.nu2 < 0:
            raise ValueError("shape parameters must be >= 0")


@dataclass(frozen=True, eq=False)
class FiniteDist:
    """A distribution on 0..s."""

    probabilities: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probabilities must be a non-empty 1-D sequence")
        if np.any(probs < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probabilities", probs)

    @property
    def s(self) -> int:
        return self.probabilities.size - 1

    def __getitem__(self, k):
        return self.probabilities[k]

    def __len__(self):
        return self.probabilities.size


def _normalize_log(logw: np.ndarray) -> np.ndarray:
    total = logsumexp(logw)
    if not np.isfinite(total):
        raise ZeroEvent("every outcome has zero weight")
    probs = np.exp(logw - total)
    return probs / probs.sum()


def _check_shared(tx: PmfTable, ty: PmfTable) -> None:
    a, b = tx.params, ty.params
    if (a.p, a.alpha, a.beta) != (b.p, b.alpha, b.beta):
        raise MismatchedParams(
            f"components must share (p, alpha, beta): {(a.p, a.alpha, a.beta)} vs {(b.p, b.alpha, b.beta)}"
        )


def convolve_sum_pmf(tx: PmfTable, ty: PmfTable, s: int) -> float:
    """P(X + Y = s) from the two truncated tables.

    Terms beyond either table's truncation index are dropped, so the values
    over s = 0..Kx+Ky sum to the product of the tabulated masses.
    """
    _check_shared(tx, ty)
    if s < 0:
        return 0.0
    lo = max(0, s - ty.K)
    hi = min(s, tx.K)
    if lo > hi:
        return 0.0
    k = np.arange(lo, hi + 1)
    terms = tx.log_weights[k] + ty.log_weights[s - k]
    return float(np.exp(logsumexp(terms) - tx.log_Z - ty.log_Z))


def enhg_log_weights(ep: EnhgParams) -> np.ndarray:
    k = np.arange(ep.s + 1, dtype=float)
    out = -ep.alpha * (gammaln(k + 1) + gammaln(ep.s - k + 1))
    if ep.beta != 0:
        out = out + ep.beta * (
            log_rising_factorial(ep.nu1, k) + log_rising_factorial(ep.nu2, ep.s - k)
        )
    return out


def enhg_pmf(ep: EnhgParams) -> FiniteDist:
    """The extended negative hypergeometric law on 0..s.

    Gamma(nu)^beta factors are divided out (they cancel in the normalizer),
    which keeps nu = 0 finite.
    """
    return FiniteDist(_normalize_log(enhg_log_weights(ep)))


def conditional_bruteforce(tx: PmfTable, ty: PmfTable, s: int) -> FiniteDist:
    """P(X = k | X + Y = s) computed directly from the two marginal pmfs.

    Marginal weights past a table's truncation index continue along the same
    recurrence; the normalizing constants cancel.
    """
    _check_shared(tx, ty)
    k = np.arange(s + 1)
    lx = log_weights(tx.params, k)
    ly = log_weights(ty.params, s - k)
    return FiniteDist(_normalize_log(lx + ly))


def _conditional_lookup(c) -> callable:
    if callable(c):
        return c
    if isinstance(c, Mapping):
        return lambda x, s: c[s][x]
    rows = list(c)
    return lambda x, s: rows[s][x]


def reconstruct_marginals(
    c: Sequence[Sequence[float]] | Mapping[int, Sequence[float]] | callable,
    p: float,
    max_k: int | None = None,
    *,
    h1: float = 1.0,
):
    """Rebuild unnormalized marginal weights from conditional-given-sum tables.

    Parameters
    ----------
    c
        ``c[s][x] = P(X = x | X + Y = s)`` for s = 0..max_k (a sequence of rows,
        a mapping keyed by s, or a callable ``c(x, s)``).
    p
        Exponential tilt ``p = exp(theta)``; the conditionals cannot identify it.
    max_k
        Largest value to reconstruct. Defaults to the number of rows minus one.
    h1
        Value assigned to h(1). The conditional tables pin h only up to a
        factor t^x, which trades off against p; choosing ``h1 = nu1**beta``
        reproduces the rising-factorial normalization h(x) = (nu1)_x^beta / (x!)^alpha.

    Returns
    -------
    f, g
        Arrays of length max_k + 1 with f(0) = g(0) = 1, where
        f(x) = h(x) p^x and g(y) = h(y) c(0, y) / c(y, y) p^y.
    """
    lookup = _conditional_lookup(c)
    if max_k is None:
        if callable(c):
            raise ValueError("max_k is required when c is a callable")
        max_k = len(c) - 1
    if max_k < 0:
        raise ValueError("max_k must be >= 0")
    if p <= 0 or h1 <= 0:
        raise ValueError("p and h1 must be positive")

    def logc(x, s):
        value = float(lookup(x, s))
        if not value > 0:
            raise DegenerateConditional(f"c({x}, {s}) = {value} must be strictly positive")
        return math.log(value)

    log_h = np.zeros(max_k + 1)
    if max_k >= 1:
        log_h[1] = math.log(h1)
        # y = 1 in h(x+1) / (h(x) h(1)) = c(x+1,x+1) c(0,1) / (c(x,x+1) c(1,1))
        step = logc(0, 1) - logc(1, 1)
        for x in range(1, max_k):
            log_h[x + 1] = log_h[x] + log_h[1] + logc(x + 1, x + 1) - logc(x, x + 1) + step

    ys = np.arange(max_k + 1)
    log_g_shape = np.array([logc(0, y) - logc(y, y) for y in ys])
    tilt = ys * math.log(p)
    return np.exp(log_h + tilt), np.exp(log_h + log_g_shape + tilt)


def functional_equation_residual(c, log_h: np.ndarray) -> float:
    """Largest |log| mismatch in c(x+y,x+y) c(0,y) / (c(x,x+y) c(y,y)) = h(x+y) / (h(x) h(y)).

    Checks every x, y >= 1 with x + y < len(log_h).
    """
    lookup = _conditional_lookup(c)
    n = len(log_h)
    worst = 0.0
    for x in range(1, n):
        for y in range(1, n - x):
            lhs = (
                math.log(lookup(x + y, x + y))
                + math.log(lookup(0, y))
                - math.log(lookup(x, x + y))
                - math.log(lookup(y, y))
            )
            rhs = log_h[x + y] - log_h[x] - log_h[y]
            worst = max(worst, abs(lhs - rhs))
    return worst
