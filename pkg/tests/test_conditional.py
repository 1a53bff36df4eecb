import math

import numpy as np
import pytest
from scipy.stats import binom

from ecomp.conditional import (
    EnhgParams,
    FiniteDist,
    conditional_bruteforce,
    convolve_sum_pmf,
    enhg_pmf,
    functional_equation_residual,
    reconstruct_marginals,
)
from ecomp.core import build_table, ratio, validate_params
from ecomp.errors import DegenerateConditional, MismatchedParams, ZeroEvent

from grid import GRID


def _pair(nu1, nu2, p, alpha, beta):
    return (
        build_table(validate_params(nu1, p, alpha, beta)),
        build_table(validate_params(nu2, p, alpha, beta)),
    )


def _bruteforce_sum(tx, ty, s):
    # plain double loop over the tabulated pmfs
    px, py = tx.probabilities, ty.probabilities
    return sum(px[k] * py[s - k] for k in range(s + 1) if k <= tx.K and s - k <= ty.K)


class TestConvolution:
    def test_poisson_additivity(self):
        tx, ty = _pair(1, 1, 1.0, 1, 0)
        assert convolve_sum_pmf(tx, ty, 0) == pytest.approx(math.exp(-2), rel=1e-13)

    def test_geometric_to_negbin(self):
        tx, ty = _pair(1, 1, 0.5, 1, 1)
        assert convolve_sum_pmf(tx, ty, 2) == pytest.approx(0.1875, rel=1e-13)
        assert _bruteforce_sum(tx, ty, 2) == pytest.approx(0.1875, rel=1e-13)

    def test_zero_sum(self):
        tx, ty = _pair(2, 0.5, 0.3, 2, 1)
        assert convolve_sum_pmf(tx, ty, 0) == pytest.approx(tx.pmf(0) * ty.pmf(0), rel=1e-14)

    def test_mismatch(self):
        tx = build_table(validate_params(1, 0.5, 1, 1))
        ty = build_table(validate_params(1, 0.4, 1, 1))
        with pytest.raises(MismatchedParams):
            convolve_sum_pmf(tx, ty, 1)

    @pytest.mark.parametrize("nu1,nu2,p,alpha,beta", [(1, 2, 0.5, 1, 1), (0.5, 3, 1.5, 2, 1), (1, 1, 2.0, 1, 0)])
    def test_marginal_consistency(self, nu1, nu2, p, alpha, beta):
        tx, ty = _pair(nu1, nu2, p, alpha, beta)
        total = sum(convolve_sum_pmf(tx, ty, s) for s in range(tx.K + ty.K + 1))
        assert 1 - 2 * tx.tail_tol - 1e-13 <= total <= 1 + 1e-13

    @pytest.mark.parametrize("s", [0, 3, 11])
    def test_matches_double_loop(self, s):
        tx, ty = _pair(0.7, 2.2, 0.9, 1.5, 0.5)
        assert convolve_sum_pmf(tx, ty, s) == pytest.approx(_bruteforce_sum(tx, ty, s), rel=1e-12)


class TestEnhg:
    def test_two_point(self):
        # weights: k=0 -> Gamma(2)Gamma(4) = 6, k=1 -> Gamma(3)Gamma(3) = 4 (beta=1, any alpha)
        for alpha in (1.0, 2.5):
            d = enhg_pmf(EnhgParams(1, 2.0, 3.0, alpha, 1.0))
            assert d[0] == pytest.approx(0.6, rel=1e-14)

    def test_uniform(self):
        d = enhg_pmf(EnhgParams(2, 1.0, 1.0, 1.0, 1.0))
        np.testing.assert_allclose(d.probabilities, [1 / 3] * 3, rtol=1e-14)

    def test_point_mass(self):
        d = enhg_pmf(EnhgParams(0, 2.0, 3.0, 1.0, 1.0))
        assert d.probabilities.tolist() == [1.0]

    def test_poisson_binomial(self):
        d = enhg_pmf(EnhgParams(9, 1.0, 1.0, 1.0, 0.0))
        np.testing.assert_allclose(d.probabilities, binom.pmf(np.arange(10), 9, 0.5), atol=1e-14)

    def test_nu_zero_component(self):
        d = enhg_pmf(EnhgParams(4, 0.0, 2.0, 2.0, 1.0))
        assert d[0] == 1.0

    def test_both_degenerate(self):
        with pytest.raises(ZeroEvent):
            enhg_pmf(EnhgParams(3, 0.0, 0.0, 2.0, 1.0))

    @pytest.mark.parametrize("bad", [dict(s=-1), dict(s=10**4 + 1), dict(alpha=0.5, beta=1.0), dict(nu1=-1.0)])
    def test_invalid(self, bad):
        kwargs = dict(s=3, nu1=1.0, nu2=1.0, alpha=1.0, beta=1.0)
        kwargs.update(bad)
        with pytest.raises(ValueError):
            EnhgParams(**kwargs)

    def test_finite_dist_validation(self):
        with pytest.raises(ValueError):
            FiniteDist([0.5, 0.6])
        with pytest.raises(ValueError):
            FiniteDist([1.5, -0.5])


class TestBruteforce:
    def test_uniform(self):
        tx, ty = _pair(1, 1, 0.5, 1, 1)
        np.testing.assert_allclose(conditional_bruteforce(tx, ty, 2).probabilities, [1 / 3] * 3, atol=1e-14)

    @pytest.mark.parametrize("s", [0, 1, 5, 20])
    def test_poisson_binomial(self, s):
        tx, ty = _pair(1, 1, 1.7, 1, 0)
        d = conditional_bruteforce(tx, ty, s)
        np.testing.assert_allclose(d.probabilities, binom.pmf(np.arange(s + 1), s, 0.5), atol=1e-14)

    def test_point_mass(self):
        tx, ty = _pair(2, 3, 0.4, 1, 1)
        assert conditional_bruteforce(tx, ty, 0).probabilities.tolist() == [1.0]

    def test_zero_event(self):
        tx, ty = _pair(0, 0, 1.0, 2, 1)
        with pytest.raises(ZeroEvent):
            conditional_bruteforce(tx, ty, 2)

    def test_p_invariance(self):
        a = conditional_bruteforce(*_pair(0.6, 2.5, 0.3, 2.0, 1.0), 12)
        b = conditional_bruteforce(*_pair(0.6, 2.5, 4.0, 2.0, 1.0), 12)
        np.testing.assert_allclose(a.probabilities, b.probabilities, atol=1e-12)


@pytest.mark.parametrize("params", GRID[::3], ids=lambda p: f"{p.nu:g}-{p.p:g}-{p.alpha:g}-{p.beta:g}")
def test_enhg_equals_bruteforce(params):
    nu2 = 1.7
    tx = build_table(params)
    ty = build_table(validate_params(nu2, params.p, params.alpha, params.beta))
    for s in range(31):
        ep = EnhgParams(s, params.nu, nu2, params.alpha, params.beta)
        np.testing.assert_allclose(
            enhg_pmf(ep).probabilities, conditional_bruteforce(tx, ty, s).probabilities, rtol=0, atol=1e-12
        )


def _enhg_rows(nu1, nu2, alpha, beta, max_s):
    return [enhg_pmf(EnhgParams(s, nu1, nu2, alpha, beta)).probabilities for s in range(max_s + 1)]


class TestReconstruct:
    def test_negbin_round_trip(self):
        c = _enhg_rows(2.0, 3.0, 1.0, 1.0, 25)
        f, g = reconstruct_marginals(c, 0.4, h1=2.0)
        k = np.arange(25)
        np.testing.assert_allclose(f[1:] / f[:-1], ratio(validate_params(2, 0.4, 1, 1), k), rtol=1e-10)
        np.testing.assert_allclose(g[1:] / g[:-1], ratio(validate_params(3, 0.4, 1, 1), k), rtol=1e-10)

    def test_weights_are_negbin(self):
        c = _enhg_rows(2.0, 3.0, 1.0, 1.0, 10)
        f, _ = reconstruct_marginals(c, 0.4, h1=2.0)
        t = build_table(validate_params(2, 0.4, 1, 1))
        np.testing.assert_allclose(f / f.sum(), t.probabilities[:11] / t.probabilities[:11].sum(), rtol=1e-10)

    def test_symmetric(self):
        c = _enhg_rows(1.5, 1.5, 2.0, 1.0, 15)
        f, g = reconstruct_marginals(c, 1.3, h1=1.5)
        np.testing.assert_allclose(f, g, rtol=1e-12)

    def test_beta_zero_is_compoisson(self):
        c = _enhg_rows(0.7, 4.0, 1.8, 0.0, 15)
        f, g = reconstruct_marginals(c, 2.0)
        target = ratio(validate_params(1, 2.0, 1.8, 0), np.arange(15))
        np.testing.assert_allclose(f[1:] / f[:-1], target, rtol=1e-10)
        np.testing.assert_allclose(g[1:] / g[:-1], target, rtol=1e-10)

    def test_tilt_trades_against_p(self):
        c = _enhg_rows(2.0, 3.0, 1.0, 1.0, 12)
        f_a, g_a = reconstruct_marginals(c, 0.4, h1=2.0)
        f_b, g_b = reconstruct_marginals(c, 0.2, h1=4.0)
        np.testing.assert_allclose(f_a, f_b, rtol=1e-12)
        np.testing.assert_allclose(g_a, g_b, rtol=1e-12)

    def test_mapping_and_callable_inputs(self):
        rows = _enhg_rows(2.0, 3.0, 2.0, 1.0, 8)
        base = reconstruct_marginals(rows, 0.7, h1=2.0)
        as_map = reconstruct_marginals(dict(enumerate(rows)), 0.7, h1=2.0)
        as_fn = reconstruct_marginals(lambda x, s: rows[s][x], 0.7, 8, h1=2.0)
        for other in (as_map, as_fn):
            np.testing.assert_array_equal(base[0], other[0])
            np.testing.assert_array_equal(base[1], other[1])

    def test_functional_equation_holds(self):
        rows = _enhg_rows(0.6, 2.0, 1.5, 1.0, 12)
        f, _ = reconstruct_marginals(rows, 1.0, h1=0.6)
        assert functional_equation_residual(rows, np.log(f)) < 1e-10

    def test_degenerate(self):
        rows = _enhg_rows(2.0, 3.0, 1.0, 1.0, 5)
        rows[3] = np.array([0.5, 0.5, 0.0, 0.0])
        with pytest.raises(DegenerateConditional):
            reconstruct_marginals(rows, 0.5)

    def test_round_trip_grid(self):
        for params in GRID:
            if params.nu == 0:
                continue
            rows = _enhg_rows(params.nu, 2.0, params.alpha, params.beta, 30)
            f, g = reconstruct_marginals(rows, params.p, h1=params.nu**params.beta)
            k = np.arange(30)
            np.testing.assert_allclose(f[1:] / f[:-1], ratio(params, k), rtol=1e-10)
            other = validate_params(2.0, params.p, params.alpha, params.beta)
            np.testing.assert_allclose(g[1:] / g[:-1], ratio(other, k), rtol=1e-10)
