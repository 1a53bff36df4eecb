import math

import numpy as np
import pytest
from scipy.special import gammaln

from ecomp.core import SampleConfig, build_table, validate_params
from ecomp.errors import EmptyData, SupportViolation
from ecomp.inference import CountData, FitResult, fit_mle, log_likelihood

POISSON1 = validate_params(1, 1, 1, 0)
GEOM = validate_params(1, 0.5, 1, 1)


def _sample(params, n, seed):
    return CountData.from_counts(build_table(params).sample(SampleConfig(seed=seed, n=n)))


@pytest.fixture(scope="module")
def geometric_data():
    return _sample(GEOM, 10**4, 2024)


@pytest.fixture(scope="module")
def poisson_data():
    return _sample(validate_params(1, 2.3, 1, 0), 2000, 77)


class TestCountData:
    def test_from_counts(self):
        d = CountData.from_counts([0, 1, 1])
        assert d.as_dict() == {0: 1, 1: 2} and d.n == 3

    def test_from_pairs(self):
        d = CountData.from_pairs({3: 5, 0: 2})
        assert d.n == 7 and d.values.tolist() == [0, 3]
        assert d.mean == pytest.approx(15 / 7)

    def test_pairs_merge(self):
        assert CountData.from_pairs([(1, 2), (1, 3)]).as_dict() == {1: 5}

    @pytest.mark.parametrize(
        "values,freqs",
        [([-1], [1]), ([1], [0]), ([1, 1], [1, 1]), ([1, 2], [1])],
    )
    def test_invalid(self, values, freqs):
        with pytest.raises(ValueError):
            CountData(values, freqs)

    def test_empty(self):
        with pytest.raises(EmptyData):
            CountData.from_counts([])


class TestLogLikelihood:
    def test_poisson_zero(self):
        assert log_likelihood(POISSON1, CountData.from_pairs({0: 1})) == pytest.approx(-1.0, abs=1e-14)

    def test_geometric(self):
        ll = log_likelihood(GEOM, CountData.from_pairs({0: 1, 1: 1}))
        assert ll == pytest.approx(math.log(0.5) + math.log(0.25), abs=1e-13)
        assert ll == pytest.approx(-2.0794, abs=1e-4)

    def test_doubling(self):
        data = CountData.from_pairs({0: 3, 2: 1, 5: 4})
        doubled = CountData.from_pairs({0: 6, 2: 2, 5: 8})
        params = validate_params(0.7, 1.3, 2, 1)
        assert log_likelihood(params, doubled) == 2 * log_likelihood(params, data)

    def test_large_count_extends_table(self):
        data = CountData.from_pairs({60: 1})
        expected = -1 - gammaln(61)
        assert log_likelihood(POISSON1, data) == pytest.approx(expected, rel=1e-12)

    def test_support_violation(self):
        data = CountData.from_pairs({5: 1})
        with pytest.raises(SupportViolation):
            log_likelihood(validate_params(0, 2, 2, 1), data)


class TestFit:
    def test_geometric_recovery(self, geometric_data):
        fit = fit_mle(geometric_data, validate_params(1, 0.3, 1, 1), fixed={"nu": 1, "alpha": 1, "beta": 1})
        assert abs(fit.params.p - 0.5) <= 0.02
        assert fit.branch == "equal" and fit.n_free == 1
        # closed-form geometric MLE: p = mean / (1 + mean)
        m = geometric_data.mean
        assert fit.params.p == pytest.approx(m / (1 + m), abs=1e-6)

    def test_poisson_submodel(self, poisson_data):
        fit = fit_mle(poisson_data, POISSON1, branch="beta0", fixed={"alpha": 1})
        m = poisson_data.mean
        v, f = poisson_data.values, poisson_data.freqs
        closed = float(np.dot(f, v * math.log(m) - m - gammaln(v + 1)))
        assert fit.loglik == pytest.approx(closed, abs=1e-6)
        assert fit.params.p == pytest.approx(m, rel=1e-4)

    def test_all_zeros(self):
        data = CountData.from_pairs({0: 50})
        fit = fit_mle(data, validate_params(1, 1, 1.5, 0), branch="beta0")
        assert fit.params.p < 1e-6
        assert -1e-6 < fit.loglik < 0

    def test_refit_stable(self, poisson_data):
        init = validate_params(1.5, 1.0, 1.5, 0.5)
        first = fit_mle(poisson_data, init, n_starts=3)
        again = fit_mle(poisson_data, first.params, n_starts=3)
        assert abs(again.loglik - first.loglik) < 1e-6

    @pytest.mark.parametrize(
        "init,branch",
        [
            (validate_params(2, 0.4, 1.5, 1.5), "equal"),
            (validate_params(1, 2.0, 1.0, 0.0), "beta0"),
            (validate_params(1.5, 1.0, 1.5, 0.5), "general"),
        ],
    )
    def test_monotone_improvement(self, poisson_data, init, branch):
        fit = fit_mle(poisson_data, init, branch=branch, n_starts=3)
        assert fit.loglik >= log_likelihood(init, poisson_data) - 1e-9
        assert fit.loglik == pytest.approx(log_likelihood(fit.params, poisson_data), abs=1e-9)
        assert fit.params.branch == ("alpha=beta" if branch == "equal" else "alpha>beta")

    def test_all_fixed(self, poisson_data):
        fit = fit_mle(poisson_data, POISSON1, fixed={"nu": 1, "p": 1, "alpha": 1, "beta": 0})
        assert fit.params == POISSON1 and fit.n_free == 0

    def test_aic(self):
        fit = FitResult(POISSON1, -10.0, 0, True, 2, "beta0")
        assert fit.aic == 24.0
        assert fit.as_dict()["aic"] == 24.0

    def test_deterministic(self, poisson_data):
        init = validate_params(1, 2.0, 1.0, 0.0)
        a = fit_mle(poisson_data, init, n_starts=4, seed=9)
        b = fit_mle(poisson_data, init, n_starts=4, seed=9)
        assert a.params == b.params and a.loglik == b.loglik

    @pytest.mark.parametrize("kwargs", [dict(branch="sideways"), dict(fixed={"gamma": 1.0})])
    def test_bad_options(self, poisson_data, kwargs):
        with pytest.raises(ValueError):
            fit_mle(poisson_data, POISSON1, **kwargs)
