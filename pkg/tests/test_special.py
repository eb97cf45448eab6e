import math
import threading

import numpy as np
import pytest
from scipy import integrate

from analysis.special import (
    VarianceModel,
    closed_form_available,
    example1_derivative,
    example1_display,
    example1_rate,
    example2_integral,
    example2_rate,
    example2_series,
    g_u,
    inc_gamma_lower,
    inc_gamma_star,
    ruin_time_rate,
    sigma2,
    sigma2_derivative,
)
from errors import DomainError
from process.discount import DiscountSpec
from process.kernels import CovKernel

from conftest import DISPLAY_AT_1, DSIGMA2_AT_1, RATE_AT_1, SIGMA2_AT_1, SIGMA_AT_1


def _model(kernel, discount=None):
    return VarianceModel(kernel, discount or DiscountSpec.linear(1.0))


class TestIncompleteGamma:
    @pytest.mark.parametrize("t", [0.1, 1.0, 3.0])
    def test_lower_a1_is_exponential(self, t):
        assert inc_gamma_lower(1.0, t) == pytest.approx(-math.expm1(-t), rel=1e-12)

    def test_lower_known_value(self):
        assert inc_gamma_lower(2.0, 1.0) == pytest.approx(1.0 - 2.0 / math.e, rel=1e-12)

    def test_star_known_value(self):
        assert inc_gamma_star(2.0, 1.0) == pytest.approx(1.0, rel=1e-13)

    @pytest.mark.parametrize("a,t", [(1.5, 0.7), (2.5, 2.0), (0.6, 3.0), (3.9, 5.0)])
    def test_star_against_quadrature(self, a, t):
        expected, _ = integrate.quad(lambda x: x ** (a - 1.0) * math.exp(x), 0.0, t,
                                     epsabs=0.0, epsrel=1e-13)
        assert inc_gamma_star(a, t) == pytest.approx(expected, rel=1e-11)

    def test_invalid_a(self):
        with pytest.raises(DomainError):
            inc_gamma_lower(0.0, 1.0)
        with pytest.raises(DomainError):
            inc_gamma_star(-1.0, 1.0)


class TestSigma2:
    def test_zero_at_zero(self, example_model):
        assert sigma2(example_model, 0.0) == 0.0

    def test_example_value(self, example_model):
        assert sigma2(example_model, 1.0) == pytest.approx(SIGMA2_AT_1, rel=1e-9)
        assert example1_display(0.5, 1.0) == pytest.approx(DISPLAY_AT_1, rel=1e-9)
        assert example1_display(0.5, 1.0) == pytest.approx((1 - 2 / math.e) ** 2 + math.exp(-2),
                                                           rel=1e-12)

    @pytest.mark.parametrize("hurst", [0.25, 0.5, 0.75])
    @pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
    def test_closed_form_matches_quadrature(self, hurst, t):
        model = _model(CovKernel.fbm(hurst))
        closed = sigma2(model, t, method="closed")
        quad = sigma2(model, t, method="quadrature")
        assert closed == pytest.approx(quad, rel=1e-6)
        assert closed == pytest.approx(0.5 * example1_display(hurst, t), rel=1e-15)

    def test_constant_discount_closed_form(self):
        model = _model(CovKernel.fbm(0.3), DiscountSpec.constant(0.2))
        assert sigma2(model, 1.3, method="closed") == pytest.approx(
            sigma2(model, 1.3, method="quadrature"), rel=1e-7)

    def test_bm_without_discount(self):
        model = _model(CovKernel.bm(), DiscountSpec.constant(0.0))
        assert sigma2(model, 1.5, method="quadrature") == pytest.approx(1.5**3 / 3, rel=1e-9)

    def test_closed_unavailable(self):
        model = _model(CovKernel.ou())
        assert not closed_form_available(model)
        with pytest.raises(DomainError, match="no closed form"):
            sigma2(model, 1.0, method="closed")

    def test_negative_time(self, example_model):
        with pytest.raises(DomainError):
            sigma2(example_model, -0.1)

    @pytest.mark.parametrize("kernel", [CovKernel.fbm(0.3), CovKernel.bm(), CovKernel.ou(),
                                        CovKernel.slepian(), CovKernel.scaled_bm()])
    def test_strictly_increasing(self, kernel):
        model = _model(kernel)
        values = [sigma2(model, t) for t in np.linspace(0.1, 2.0, 12)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_cache_is_thread_safe(self, example_model):
        results = []

        def work():
            results.append(sigma2(example_model, 0.8, method="quadrature"))

        threads = [threading.Thread(target=work) for _ in range(4)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        assert len(set(results)) == 1


class TestDerivative:
    def test_example_value(self, example_model):
        assert sigma2_derivative(example_model, 1.0) == pytest.approx(DSIGMA2_AT_1, rel=1e-9)
        assert sigma2_derivative(example_model, 1.0, method="quadrature") == pytest.approx(
            DSIGMA2_AT_1, rel=1e-9)

    def test_bm_without_discount(self):
        model = _model(CovKernel.bm(), DiscountSpec.constant(0.0))
        assert sigma2_derivative(model, 0.7, method="quadrature") == pytest.approx(0.49, rel=1e-10)

    @pytest.mark.parametrize("kernel", [CovKernel.ou(2.0), CovKernel.fbm(0.7), CovKernel.scaled_bm()])
    def test_finite_difference(self, kernel):
        model = _model(kernel)
        h = 1e-4
        fd = (sigma2(model, 0.7 + h) - sigma2(model, 0.7 - h)) / (2 * h)
        assert sigma2_derivative(model, 0.7) == pytest.approx(fd, rel=1e-6)

    def test_closed_forms_agree_with_quadrature(self):
        for hurst in (0.25, 0.75):
            model = _model(CovKernel.fbm(hurst))
            assert example1_derivative(hurst, 1.2) == pytest.approx(
                sigma2_derivative(model, 1.2, method="quadrature"), rel=1e-8)

    def test_rate_identity(self, example_model):
        var = sigma2(example_model, 1.0)
        expected = sigma2_derivative(example_model, 1.0) / (2 * var * var)
        assert ruin_time_rate(example_model, 1.0) == pytest.approx(expected, rel=1e-12)
        assert example1_rate(0.5, 1.0) == pytest.approx(RATE_AT_1, rel=1e-7)

    def test_rate_by_finite_differences(self, example_model):
        h = 1e-4
        slope = (sigma2(example_model, 1 + h, method="quadrature")
                 - sigma2(example_model, 1 - h, method="quadrature")) / (2 * h)
        var = sigma2(example_model, 1.0, method="quadrature")
        assert slope / (2 * var * var) == pytest.approx(example1_rate(0.5, 1.0), rel=1e-4)

    def test_requires_positive_time(self, example_model):
        with pytest.raises(DomainError):
            sigma2_derivative(example_model, 0.0)


class TestExample2:
    def test_zero(self):
        assert example2_series(0.0) == 0.0

    def test_leading_coefficient(self):
        t = 1e-3
        assert example2_series(t) / t**2 == pytest.approx(2.0 / 3.0, rel=1e-3)

    @pytest.mark.parametrize("t", [0.25, 1.0, 2.0])
    def test_series_matches_quadrature(self, t):
        model = _model(CovKernel.scaled_bm())
        assert example2_series(t) == pytest.approx(sigma2(model, t, method="quadrature"), abs=1e-8)

    @pytest.mark.parametrize("t", [0.5, 2.5, 4.0])
    def test_integral_form_matches_quadrature(self, t):
        model = _model(CovKernel.scaled_bm())
        assert example2_integral(t) == pytest.approx(sigma2(model, t, method="quadrature"),
                                                     rel=1e-8)

    def test_outside_radius(self):
        with pytest.raises(DomainError, match="validated"):
            example2_series(3.5)

    def test_truncation(self):
        assert example2_series(1.0, k_max=2) == pytest.approx(2.0 / 3.0)

    def test_rate_positive(self):
        assert example2_rate(1.0) > 0


class TestGu:
    def test_example_value(self, example_model):
        expected = (10.0 + 1.0 - math.exp(-1.0)) / SIGMA_AT_1
        assert g_u(example_model, 1.0, 10.0, 1.0) == pytest.approx(expected, rel=1e-9)

    def test_zero_premium(self, example_model):
        assert g_u(example_model, 0.0, 2.0, 1.0) == pytest.approx(2.0 / SIGMA_AT_1, rel=1e-9)

    def test_decreasing_without_premium(self, example_model):
        values = [g_u(example_model, 0.0, 1.0, t) for t in np.linspace(0.2, 2.0, 10)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_requires_positive_time(self, example_model):
        with pytest.raises(DomainError):
            g_u(example_model, 1.0, 1.0, 0.0)
