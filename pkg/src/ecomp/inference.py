"""Log-likelihood and maximum-likelihood fitting of ECOMP to count data.

The optimizer works on unconstrained coordinates and never leaves one branch
of the parameter space:

* ``"general"``: nu = e^a, p = e^b, beta = e^c, alpha = beta + e^d
* ``"equal"``:   nu = e^a, p = sigmoid(b), alpha = beta = e^c
* ``"beta0"``:   beta = 0, p = e^b, alpha = e^d (nu has no effect)

Any parameter may be held fixed; fixing alpha on the general branch while
beta is free maps beta = alpha * sigmoid(c).
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import expit, logit

from .core import DEFAULT_TAIL_TOL, MAX_TERMS, EcompParams, build_table
from .errors import EcompError, EmptyData, NoImprovement, SupportViolation

log = logging.getLogger(__name__)

BRANCHES = ("general", "equal", "beta0")
COORD_BOUND = 20.0
FIT_MAX_TERMS = 10**6


@dataclass(frozen=True, eq=False)
class CountData:
    """Observed counts as sorted (value, frequency) pairs."""

    values: np.ndarray
    freqs: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64)
        freqs = np.asarray(self.freqs, dtype=np.int64)
        if values.shape != freqs.shape or values.ndim != 1:
            raise ValueError("values and freqs must be 1-D arrays of equal length")
        if values.size == 0:
            raise EmptyData("no observations")
        if np.any(values < 0):
            raise ValueError("counts must be nonnegative")
        if np.any(freqs < 1):
            raise ValueError("frequencies must be >= 1")
        if np.unique(values).size != values.size:
            raise ValueError("duplicate values; merge frequencies first")
        order = np.argsort(values)
        object.__setattr__(self, "values", values[order])
        object.__setattr__(self, "freqs", freqs[order])

    @classmethod
    def from_counts(cls, counts: Iterable[int]) -> "CountData":
        tally = Counter(int(c) for c in counts)
        if not tally:
            raise EmptyData("no observations")
        return cls(list(tally), list(tally.values()))

    @classmethod
    def from_pairs(cls, pairs: Mapping[int, int] | Iterable[tuple[int, int]]) -> "CountData":
        items = pairs.items() if isinstance(pairs, Mapping) else pairs
        tally = Counter()
        for value, freq in items:
            tally[int(value)] += int(freq)
        if not tally:
            raise EmptyData("no observations")
        return cls(list(tally), list(tally.values()))

    @property
    def n(self) -> int:
        return int(self.freqs.sum())

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.freqs) / self.n)

    def as_dict(self) -> dict:
        return {int(v): int(f) for v, f in zip(self.values, self.freqs)}


def log_likelihood(
    params: EcompParams,
    data: CountData,
    tail_tol: float = DEFAULT_TAIL_TOL,
    max_terms: int = MAX_TERMS,
) -> float:
    """Sum of freq(k) * log pmf(k)."""
    top = int(data.values[-1])
    table = build_table(params, tail_tol, min_k=top, max_terms=max_terms)
    if top > table.K:
        raise SupportViolation(f"count {top} lies beyond the certified table (K={table.K})")
    return float(np.dot(data.freqs, table.log_weights[data.values]) - data.n * table.log_Z)


@dataclass
class FitResult:
    params: EcompParams
    loglik: float
    iterations: int
    converged: bool
    n_free: int
    branch: str
    starts: list = field(default_factory=list)

    @property
    def aic(self) -> float:
        return 2.0 * self.n_free - 2.0 * self.loglik

    def as_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "loglik": self.loglik,
            "aic": self.aic,
            "iterations": self.iterations,
            "converged": self.converged,
            "branch": self.branch,
            "n_free": self.n_free,
        }


class _Transform:
    """Maps free unconstrained coordinates to EcompParams on one branch."""

    def __init__(self, branch: str, init: EcompParams, fixed: Mapping[str, float]):
        if branch not in BRANCHES:
            raise ValueError(f"branch must be one of {BRANCHES}")
        unknown = set(fixed) - {"nu", "p", "alpha", "beta"}
        if unknown:
            raise ValueError(f"cannot fix unknown parameters {sorted(unknown)}")
        self.branch = branch
        self.fixed = {k: float(v) for k, v in fixed.items()}
        self.init = init
        if branch == "beta0":
            self.fixed["beta"] = 0.0
            self.fixed.setdefault("nu", init.nu)
        if branch == "equal":
            if "alpha" in self.fixed and "beta" in self.fixed and self.fixed["alpha"] != self.fixed["beta"]:
                raise ValueError("equal branch needs alpha == beta")
            shared = self.fixed.get("alpha", self.fixed.get("beta"))
            if shared is not None:
                self.fixed["alpha"] = self.fixed["beta"] = shared
        self.free = [
            name
            for name in ("nu", "p", "beta", "alpha")
            if name not in self.fixed and not (branch == "equal" and name == "alpha")
        ]

    def to_params(self, x) -> EcompParams:
        v = dict(self.fixed)
        coords = dict(zip(self.free, x))
        if "nu" in coords:
            v["nu"] = math.exp(coords["nu"])
        if "p" in coords:
            v["p"] = float(expit(coords["p"])) if self.branch == "equal" else math.exp(coords["p"])
        if self.branch == "equal":
            if "beta" in coords:
                v["alpha"] = v["beta"] = math.exp(coords["beta"])
        elif self.branch == "beta0":
            if "alpha" in coords:
                v["alpha"] = math.exp(coords["alpha"])
        else:
            if "beta" in coords and "alpha" in coords:
                v["beta"] = math.exp(coords["beta"])
                v["alpha"] = v["beta"] + math.exp(coords["alpha"])
            elif "beta" in coords:
                v["beta"] = v["alpha"] * float(expit(coords["beta"]))
            elif "alpha" in coords:
                v["alpha"] = v["beta"] + math.exp(coords["alpha"])
        return EcompParams(v["nu"], v["p"], v["alpha"], v["beta"])

    def from_params(self, params: EcompParams) -> np.ndarray:
        out = []
        for name in self.free:
            if name == "nu":
                out.append(math.log(params.nu))
            elif name == "p":
                out.append(float(logit(params.p)) if self.branch == "equal" else math.log(params.p))
            elif name == "beta":
                if self.branch == "general" and "alpha" in self.fixed:
                    out.append(float(logit(params.beta / params.alpha)))
                else:
                    out.append(math.log(params.beta))
            else:
                base = 0.0 if self.branch == "beta0" else params.beta
                out.append(math.log(params.alpha - base))
        return np.clip(np.asarray(out, dtype=float), -COORD_BOUND, COORD_BOUND)


def _moment_matched(transform: _Transform, data: CountData) -> EcompParams | None:
    """Shift p so the model mean equals the sample mean, other coordinates held."""
    if "p" not in transform.free:
        return None
    target = data.mean
    x0 = transform.from_params(transform.init)
    idx = transform.free.index("p")

    def gap(b):
        x = x0.copy()
        x[idx] = b
        return build_table(transform.to_params(x), 1e-12, max_terms=FIT_MAX_TERMS).mean - target

    try:
        lo = -COORD_BOUND + 1
        hi = COORD_BOUND - 1 if transform.branch == "equal" else math.log(10.0 * (target + 1.0))
        if gap(lo) * gap(hi) > 0:
            return None
        b = brentq(gap, lo, hi, xtol=1e-10)
    except (EcompError, ValueError, OverflowError):
        return None
    x = x0.copy()
    x[idx] = b
    return transform.to_params(x)


def fit_mle(
    data: CountData,
    init: EcompParams,
    *,
    branch: str | None = None,
    fixed: Mapping[str, float] | None = None,
    n_starts: int = 5,
    maxiter: int = 2000,
    rtol: float = 1e-10,
    seed: int = 0,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> FitResult:
    """Maximum-likelihood fit by multi-start Nelder-Mead on transformed coordinates.

    Start 0 is ``init`` itself, start 1 matches the sample mean by adjusting p,
    and the rest perturb start 1 with N(0, 0.5^2) noise from ``seed``. The
    best start wins; ties go to the lower start index.
    """
    if branch is None:
        branch = "equal" if init.alpha == init.beta else ("beta0" if init.beta == 0 else "general")
    transform = _Transform(branch, init, fixed or {})
    x_init = transform.from_params(init)
    init_ll = log_likelihood(init, data, tail_tol)

    if not transform.free:
        return FitResult(init, init_ll, 0, True, 0, branch)

    def objective(x):
        try:
            return -log_likelihood(transform.to_params(x), data, tail_tol, FIT_MAX_TERMS)
        except (EcompError, ValueError, OverflowError, FloatingPointError):
            return math.inf

    starts = [x_init]
    matched = _moment_matched(transform, data)
    base = transform.from_params(matched) if matched is not None else x_init
    if n_starts > 1:
        starts.append(base)
    rng = np.random.default_rng(seed)
    while len(starts) < n_starts:
        starts.append(np.clip(base + rng.normal(0.0, 0.5, size=base.size), -COORD_BOUND, COORD_BOUND))

    bounds = [(-COORD_BOUND, COORD_BOUND)] * len(transform.free)
    best = None
    records = []
    for index, x0 in enumerate(starts):
        f0 = objective(x0)
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "maxiter": maxiter,
                "xatol": 1e-9,
                "fatol": rtol * max(1.0, abs(init_ll)),
                "adaptive": len(transform.free) > 2,
            },
        )
        ll = -float(res.fun)
        records.append({"start": index, "loglik": ll, "nit": int(res.nit), "success": bool(res.success)})
        log.debug("start %d: loglik %.10g (from %.10g) nit=%d", index, ll, -f0, res.nit)
        if np.isfinite(ll) and (best is None or ll > best[0]):
            best = (ll, index, res)

    if best is None:
        raise NoImprovement("no start produced a finite likelihood")
    ll, index, res = best
    params = transform.to_params(res.x)
    if ll < init_ll:
        params, ll = init, init_ll
    if not any(r["success"] for r in records) and ll <= init_ll:
        raise NoImprovement("the simplex collapsed without improving on the initial point")
    return FitResult(
        params,
        ll,
        int(res.nit),
        bool(res.success),
        len(transform.free),
        branch,
        records,
    )
