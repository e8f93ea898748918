"""Quadrature pdf, moment relations, and Wigner functions."""

import math

import numpy as np
import pytest
from scipy.special import eval_hermite, gammaln

from photonsub import (
    CompoundPoissonParams,
    CompoundPoissonState,
    DomainError,
    MomentIncompatibilityError,
    hermite_phi,
    kurtosis_band,
    moments_from_params,
    params_from_moments,
    quadrature_pdf,
    wigner,
)

CP = CompoundPoissonParams


def gaussian(q, var):
    return np.exp(-q * q / (2 * var)) / np.sqrt(2 * np.pi * var)


def numeric_moments(params, eta=1.0, tail=1e-15):
    """Independent oracle: variance and kurtosis by trapezoid integration."""
    sigma = math.sqrt(eta * params.mu + 0.5)
    span = 14.0 * sigma
    q = np.linspace(-span, span, 20001)
    pdf = quadrature_pdf(params, eta, q, tail=tail)
    norm = np.trapezoid(pdf, q)
    var = np.trapezoid(q * q * pdf, q) / norm
    kurt = np.trapezoid(q**4 * pdf, q) / norm / var**2
    return var, kurt


class TestHermitePhi:
    def test_ground_state_value(self):
        assert hermite_phi(0, 0.0) == pytest.approx(np.pi ** (-0.25), abs=1e-15)

    def test_odd_parity_zero(self):
        assert hermite_phi(1, 0.0) == 0.0

    def test_n2_value(self):
        expected = -1.0 / (math.sqrt(2.0) * np.pi**0.25)
        assert hermite_phi(2, 0.0) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("n", [0, 1, 2, 5, 10, 25])
    def test_recurrence_matches_direct_formula(self, n):
        q = np.linspace(-6.0, 6.0, 241)
        norm = np.sqrt(2.0**n * np.exp(gammaln(n + 1)) * np.sqrt(np.pi))
        direct = eval_hermite(n, q) * np.exp(-q * q / 2.0) / norm
        assert np.max(np.abs(hermite_phi(n, q) - direct)) < 1e-12

    @pytest.mark.parametrize("n", [0, 3, 40, 400])
    def test_unit_norm(self, n):
        q = np.linspace(-60.0, 60.0, 60001)
        phi = hermite_phi(n, q)
        assert np.trapezoid(phi * phi, q) == pytest.approx(1.0, abs=1e-8)

    def test_negative_order(self):
        with pytest.raises(DomainError):
            hermite_phi(-1, 0.0)


class TestQuadraturePdf:
    def test_vacuum_peak(self):
        assert quadrature_pdf(CP(0.0, 1.0), 1.0, 0.0) == pytest.approx(
            1.0 / math.sqrt(math.pi), abs=1e-14
        )

    def test_thermal_peak_matches_gaussian(self):
        value = quadrature_pdf(CP(1.63, 1.0), 1.0, 0.0)
        assert value == pytest.approx(1.0 / math.sqrt(2 * math.pi * 2.13), abs=1e-12)

    @pytest.mark.parametrize("mu", [0.0, 1.63, 10.0])
    @pytest.mark.parametrize("eta", [0.78, 1.0])
    def test_gaussian_limit_sup_norm(self, mu, eta):
        q = np.linspace(-12.0, 12.0, 1001)
        series = quadrature_pdf(CP(mu, 1.0), eta, q, tail=1e-14)
        assert np.max(np.abs(series - gaussian(q, eta * mu + 0.5))) < 1e-10

    def test_efficiency_scales_variance(self):
        var, _ = numeric_moments(CP(3.26, 2.0), eta=0.78)
        assert var == pytest.approx(0.78 * 3.26 + 0.5, abs=1e-6)

    @pytest.mark.parametrize("mu", [0.0, 1.0, 10.0])
    @pytest.mark.parametrize("a", [1.0, 4.0, 12.0])
    @pytest.mark.parametrize("eta", [0.5, 0.78, 1.0])
    def test_normalization(self, mu, a, eta):
        sigma = math.sqrt(eta * mu + 0.5)
        q = np.linspace(-12 * sigma, 12 * sigma, 8001)
        pdf = quadrature_pdf(CP(mu, a), eta, q)
        assert np.all(pdf >= 0.0)
        assert np.trapezoid(pdf, q) == pytest.approx(1.0, abs=1e-6)

    def test_parity(self):
        q = np.linspace(0.1, 6.0, 40)
        pdf_pos = quadrature_pdf(CP(2.5, 3.0), 0.9, q)
        pdf_neg = quadrature_pdf(CP(2.5, 3.0), 0.9, -q)
        assert np.array_equal(pdf_pos, pdf_neg)

    @pytest.mark.parametrize("eta", [0.0, -0.1, 1.5])
    def test_eta_domain(self, eta):
        with pytest.raises(DomainError):
            quadrature_pdf(CP(1.0, 1.0), eta, 0.0)

    def test_unknown_mode(self):
        with pytest.raises(DomainError):
            quadrature_pdf(CP(1.0, 1.0), 1.0, 0.0, mode="blur")


class TestKernelMode:
    def test_matches_bernoulli_at_unit_efficiency(self):
        q = np.linspace(-6, 6, 301)
        exact = quadrature_pdf(CP(2.0, 2.0), 1.0, q)
        smoothed = quadrature_pdf(CP(2.0, 2.0), 1.0, q, mode="kernel")
        assert np.allclose(exact, smoothed, atol=1e-12)

    def test_literal_kernel_variance(self):
        # The historical recipe convolves the eta = 1 pdf with
        # exp(-q^2 eta/(1-eta)), i.e. adds variance (1-eta)/(2 eta).
        params, eta = CP(3.26, 2.0), 0.78
        q = np.linspace(-12, 12, 4801)
        pdf = quadrature_pdf(params, eta, q, mode="kernel")
        var = np.trapezoid(q * q * pdf, q) / np.trapezoid(pdf, q)
        expected = 3.26 + 0.5 + (1 - eta) / (2 * eta)
        assert var == pytest.approx(expected, abs=2e-3)

    def test_differs_from_bernoulli_below_unit_efficiency(self):
        q = np.linspace(-6, 6, 301)
        exact = quadrature_pdf(CP(3.26, 2.0), 0.78, q)
        smoothed = quadrature_pdf(CP(3.26, 2.0), 0.78, q, mode="kernel")
        assert np.max(np.abs(exact - smoothed)) > 1e-3


class TestMomentRelations:
    def test_initial_thermal_state(self):
        m = moments_from_params(CP(1.63, 1.0))
        assert m.variance == pytest.approx(2.13, abs=1e-12)
        assert m.kurtosis == pytest.approx(3.0, abs=1e-12)

    def test_two_subtraction_state(self):
        m = moments_from_params(CP(3.26, 2.0))
        assert m.variance == pytest.approx(3.76, abs=1e-12)
        assert m.kurtosis == pytest.approx(2.4362055794477, abs=1e-10)

    def test_vacuum(self):
        m = moments_from_params(CP(0.0, 7.0))
        assert (m.variance, m.kurtosis) == (0.5, 3.0)

    @pytest.mark.parametrize("mu", [0.5, 1.63, 5.0])
    @pytest.mark.parametrize("a", [1.0, 2.0, 11.0])
    def test_closed_form_matches_integration(self, mu, a):
        var, kurt = numeric_moments(CP(mu, a))
        m = moments_from_params(CP(mu, a))
        assert var == pytest.approx(m.variance, abs=1e-8)
        assert kurt == pytest.approx(m.kurtosis, abs=1e-8)

    @pytest.mark.parametrize("mu", [0.3, 1.63, 9.4])
    @pytest.mark.parametrize("a", [1.0, 3.7, 40.0])
    def test_round_trip_identity(self, mu, a):
        m = moments_from_params(CP(mu, a))
        back = params_from_moments(m.variance, m.kurtosis)
        assert back.mu == pytest.approx(mu, abs=1e-10)
        assert back.a == pytest.approx(a, rel=1e-10)

    def test_inverse_at_paper_state(self):
        params = params_from_moments(2.13, 3.0)
        assert params.mu == pytest.approx(1.63, abs=1e-12)
        assert params.a == 1.0

    def test_near_vacuum_inverse(self):
        eps = 1e-6
        params = params_from_moments(0.5 + eps, 3.0)
        assert params.mu == pytest.approx(eps, abs=1e-15)
        assert params.a == 1.0

    def test_kurtosis_above_band(self):
        with pytest.raises(MomentIncompatibilityError):
            params_from_moments(2.13, 3.2)

    def test_kurtosis_below_band(self):
        lo, _ = kurtosis_band(2.13)
        with pytest.raises(MomentIncompatibilityError):
            params_from_moments(2.13, lo - 0.01)

    def test_subvacuum_variance(self):
        with pytest.raises(MomentIncompatibilityError):
            params_from_moments(0.4, 3.0)

    @pytest.mark.parametrize("mu", [0.2, 1.63, 8.0])
    @pytest.mark.parametrize("a", [1.0, 2.0, 50.0])
    def test_kurtosis_within_band(self, mu, a):
        m = moments_from_params(CP(mu, a))
        lo, hi = kurtosis_band(m.variance)
        assert lo < m.kurtosis <= hi


class TestWigner:
    def test_vacuum_origin(self):
        assert wigner(CP(0.0, 1.0), 0.0, 0.0) == pytest.approx(1.0 / math.pi, abs=1e-14)

    @pytest.mark.parametrize(
        "mu, a",
        [(1.63, 1.0), (3.26, 2.0), (9.78, 6.0), (0.5, 1.0), (10.0, 11.0)],
    )
    def test_origin_equals_generating_function(self, mu, a):
        origin = wigner(CP(mu, a), 0.0, 0.0)
        g_minus_one = CompoundPoissonState(mu, a).generating(-1.0)
        assert origin * math.pi == pytest.approx(g_minus_one, abs=1e-10)

    def test_thermal_origin_value(self):
        assert wigner(CP(1.63, 1.0), 0.0, 0.0) == pytest.approx(
            1.0 / (math.pi * 4.26), rel=1e-12
        )

    def test_ring_radius_grows_with_subtraction(self):
        radii = np.linspace(0.0, 16.0, 3201)
        argmax = []
        for k in (1, 5, 10):
            profile = wigner(CP(1.63 * (k + 1), float(k + 1)), radii, 0.0)
            argmax.append(radii[np.argmax(profile)])
        assert argmax[0] > 0.0
        assert argmax[0] < argmax[1] < argmax[2]

    def test_thermal_profile_peaks_at_origin(self):
        radii = np.linspace(0.0, 10.0, 501)
        profile = wigner(CP(1.63, 1.0), radii, 0.0)
        assert np.argmax(profile) == 0

    def test_phase_symmetry(self):
        r = 1.7
        values = [
            wigner(CP(3.26, 2.0), r * math.cos(t), r * math.sin(t))
            for t in np.linspace(0, 2 * math.pi, 9)
        ]
        assert np.allclose(values, values[0], atol=1e-12)

    def test_normalization_in_phase_space(self):
        x = np.linspace(-8, 8, 401)
        w = wigner(CP(1.63, 2.0), x[:, None], x[None, :])
        integral = np.trapezoid(np.trapezoid(w, x, axis=1), x)
        assert integral == pytest.approx(1.0, abs=1e-6)
