"""Birth-death chains whose stationary law is ECOMP.

With arrival rate (nu + k)^beta * lam in state k and service rate k^alpha * mu,
detailed balance gives pi(k+1)/pi(k) = p (nu+k)^beta / (k+1)^alpha with
p = lam / mu, the ECOMP recurrence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import EcompParams, build_table

BD_TAIL_TOL = 1e-12


@dataclass(frozen=True)
class BdRates:
    lambda_scale: float
    mu_scale: float
    params: EcompParams
    K: int

    def arrival(self, k):
        """Birth rate out of state k (zero at the reflecting boundary K)."""
        k = np.asarray(k, dtype=float)
        out = np.where(k < self.K, np.power(self.params.nu + k, self.params.beta) * self.lambda_scale, 0.0)
        return float(out) if out.ndim == 0 else out

    def service(self, k):
        k = np.asarray(k, dtype=float)
        out = np.power(k, self.params.alpha) * self.mu_scale * (k > 0)
        return float(out) if out.ndim == 0 else out

    @property
    def p(self) -> float:
        return self.lambda_scale / self.mu_scale


def make_rates(params: EcompParams, mu_scale: float = 1.0, K: int | None = None) -> BdRates:
    """Rates with lambda = p * mu.

    If ``K`` is omitted it is taken from a pmf table whose mass above K is
    below 1e-12 (at least 2).
    """
    if not mu_scale > 0:
        raise ValueError("mu_scale must be positive")
    if K is None:
        K = max(2, build_table(params, BD_TAIL_TOL).K)
    if K < 1:
        raise ValueError("K must be >= 1")
    return BdRates(params.p * mu_scale, float(mu_scale), params, int(K))


def stationary(rates: BdRates) -> np.ndarray:
    """Detailed-balance stationary pmf on 0..K."""
    k = np.arange(rates.K)
    with np.errstate(divide="ignore"):
        log_steps = np.log(rates.arrival(k)) - np.log(rates.service(k + 1))
    log_pi = np.concatenate([[0.0], np.cumsum(log_steps)])
    return np.exp(log_pi - logsumexp(log_pi))


def simulate(rates: BdRates, horizon: float, seed: int = 0, initial: int = 0) -> np.ndarray:
    """Time-weighted state occupancy of one continuous-time trajectory.

    Exponential holding times with jumps up/down in proportion to the rates;
    the state space is reflected at K. Returns occupancy fractions on 0..K.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if not 0 <= initial <= rates.K:
        raise ValueError("initial state outside 0..K")
    rng = np.random.default_rng(seed)
    states = np.arange(rates.K + 1)
    up = rates.arrival(states).tolist()
    down = rates.service(states).tolist()
    occupancy = [0.0] * (rates.K + 1)

    batch = 1 << 16
    exps = rng.standard_exponential(batch).tolist()
    unis = rng.random(batch).tolist()
    i = 0
    t = 0.0
    state = initial
    while True:
        if i == batch:
            exps = rng.standard_exponential(batch).tolist()
            unis = rng.random(batch).tolist()
            i = 0
        a, d = up[state], down[state]
        total = a + d
        if total == 0.0:
            occupancy[state] += horizon - t
            break
        hold = exps[i] / total
        if t + hold >= horizon:
            occupancy[state] += horizon - t
            break
        occupancy[state] += hold
        t += hold
        state += 1 if unis[i] * total < a else -1
        i += 1
    return np.asarray(occupancy) / horizon


def total_variation(a, b) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(a) - np.asarray(b))))
