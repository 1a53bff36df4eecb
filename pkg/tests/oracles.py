"""High-precision reference values computed with mpmath, independent of ecomp."""

import mpmath as mp

mp.mp.dps = 40


def poisson_pmf(lam, k):
    return mp.e ** (-mp.mpf(lam)) * mp.mpf(lam) ** k / mp.factorial(k)


def geometric_pmf(p, k):
    p = mp.mpf(p)
    return (1 - p) * p**k


def negbin_pmf(nu, p, k):
    nu, p = mp.mpf(nu), mp.mpf(p)
    return mp.gamma(nu + k) / (mp.gamma(nu) * mp.factorial(k)) * p**k * (1 - p) ** nu


def compoisson_pmf(lam, exponent, k):
    lam, exponent = mp.mpf(lam), mp.mpf(exponent)
    Z = mp.nsum(lambda i: lam**i / mp.factorial(i) ** exponent, [0, mp.inf])
    return lam**k / mp.factorial(k) ** exponent / Z


def ecomp_weight(nu, p, alpha, beta, k):
    return mp.rf(mp.mpf(nu), k) ** mp.mpf(beta) * mp.mpf(p) ** k / mp.factorial(k) ** mp.mpf(alpha)


def ecomp_Z(nu, p, alpha, beta):
    """Brute-force series sum, stopping once terms are negligible and shrinking."""
    total = mp.mpf(0)
    k = 0
    prev = None
    while True:
        w = ecomp_weight(nu, p, alpha, beta, k)
        total += w
        if k > 10 and w < total * mp.mpf(10) ** -35 and prev is not None and w < prev:
            return total
        prev = w
        k += 1


def ecomp_pmf(nu, p, alpha, beta, k):
    return ecomp_weight(nu, p, alpha, beta, k) / ecomp_Z(nu, p, alpha, beta)


def reduction_pmf(family, nu, p, alpha, beta, k):
    if family == "poisson":
        return poisson_pmf(p, k)
    if family == "geometric":
        return geometric_pmf(p, k)
    if family == "negbin":
        return negbin_pmf(nu, p, k)
    if family == "compoisson":
        return compoisson_pmf(p, alpha - beta, k)
    raise ValueError(family)
