"""Generating-function calculus: state families, subtraction, moments."""

import json
import math

import numpy as np
import pytest

from photonsub import (
    CoherentState,
    CompoundPoissonParams,
    CompoundPoissonState,
    DomainError,
    FockState,
    NumericState,
    SqueezedVacuumState,
    ThermalState,
    correlation_g,
    make_state,
    mean_photon,
    pmf,
    pmf_to_csv,
    squeezed_gn,
    state_from_json,
    state_to_json,
    subtract_photons,
    subtracted_thermal_params,
)
from photonsub.genfunc import gamma_ratio


def brute_force_shift(state, n_max):
    """Independent subtraction oracle: q(n) = (n+1) P(n+1) / mu on the pmf."""
    p = state.pmf(n_max + 1)
    mu = np.arange(n_max + 2) @ p
    return np.arange(1, n_max + 2) * p[1:] / mu


def factorial_moment(state, m, n_max=None):
    """Independent g^(m) oracle: sum_n n(n-1)...(n-m+1) P(n) / mu^m."""
    if n_max is None:
        n_max = state.truncation(1e-14)
    p = state.pmf(n_max)
    n = np.arange(n_max + 1, dtype=float)
    fact = np.ones_like(n)
    for j in range(m):
        fact *= np.maximum(n - j, 0.0)
    return float(fact @ p) / state.mean_photon() ** m


class TestMakeState:
    def test_thermal_bose_einstein(self):
        state = make_state("thermal", mu=1.0)
        assert np.allclose(state.pmf(2), [0.5, 0.25, 0.125], atol=1e-12)

    @pytest.mark.parametrize("xi", [0.3, 1.0, 2.0])
    def test_squeezed_odd_terms_vanish(self, xi):
        p = make_state("squeezed_vacuum", xi=xi).pmf(41)
        assert np.all(p[1::2] == 0.0)

    def test_compound_poisson_against_generating_function(self):
        # Oracle: numerically differentiate G(z) at z = 0 for P(0), P(1).
        state = make_state("compound_poisson", mu=2.0, a=2.0)
        h = 1e-6
        g0 = state.generating(0.0)
        g1 = (state.generating(h) - state.generating(-h)) / (2 * h)
        assert g0 == pytest.approx(0.25, abs=1e-12)
        assert g1 == pytest.approx(0.25, abs=1e-8)
        assert np.allclose(state.pmf(1), [0.25, 0.25], atol=1e-12)

    @pytest.mark.parametrize(
        "family, params, field",
        [
            ("fock", {"m": -1}, "m"),
            ("coherent", {"mu": -0.5}, "mu"),
            ("squeezed_vacuum", {"xi": -1.0}, "xi"),
            ("thermal", {"mu": -2.0}, "mu"),
            ("compound_poisson", {"mu": 1.0, "a": 0.0}, "a"),
            ("compound_poisson", {"mu": -1.0, "a": 2.0}, "mu"),
        ],
    )
    def test_out_of_domain_names_field(self, family, params, field):
        with pytest.raises(DomainError, match=field):
            make_state(family, **params)

    def test_unknown_family(self):
        with pytest.raises(DomainError, match="unknown"):
            make_state("gaussian", mu=1.0)


class TestPmf:
    def test_fock_delta(self):
        assert np.array_equal(pmf(FockState(3), 5), [0, 0, 0, 1, 0, 0])

    def test_coherent_poisson(self):
        p = pmf(CoherentState(1.0), 8)
        expected = [math.exp(-1.0) / math.factorial(n) for n in range(9)]
        assert np.allclose(p, expected, atol=1e-14)

    def test_negative_n_max(self):
        with pytest.raises(DomainError):
            pmf(FockState(0), -1)

    @pytest.mark.parametrize(
        "state",
        [
            ThermalState(1.63),
            CompoundPoissonState(9.78, 6.0),
            CompoundPoissonState(17.93, 11.0),
            CompoundPoissonState(3.0, 0.4),
            SqueezedVacuumState(1.2),
            CoherentState(4.0),
        ],
    )
    def test_truncated_pmf_normalized(self, state):
        p = state.pmf(state.truncation())
        assert np.all(p >= 0.0)
        assert p.sum() == pytest.approx(1.0, abs=1e-9)


class TestSubtraction:
    def test_fock_lowers(self):
        state, record = subtract_photons(FockState(3), 1)
        assert state == FockState(2)
        assert record.means == (3.0,)

    def test_fock_vacuum_error(self):
        with pytest.raises(DomainError):
            subtract_photons(FockState(2), 3)

    def test_coherent_fixed_point(self):
        state, _ = subtract_photons(CoherentState(2.0), 5)
        before = CoherentState(2.0).pmf(60)
        assert np.max(np.abs(state.pmf(60) - before)) < 1e-12

    def test_thermal_ten_subtractions(self):
        state, record = subtract_photons(ThermalState(1.63), 10)
        assert isinstance(state, CompoundPoissonState)
        assert state.a == pytest.approx(11.0, abs=1e-12)
        assert state.mu == pytest.approx(17.93, abs=1e-9)
        assert record.k == 10
        # Per-step means strictly increasing for the thermal family.
        assert all(b > a for a, b in zip(record.means, record.means[1:]))
        assert record.means[0] == 1.63

    def test_family_closure_exact(self):
        state, _ = subtract_photons(CompoundPoissonState(2.0, 4.0), 1)
        assert state == CompoundPoissonState(2.0 * 5.0 / 4.0, 5.0)

    def test_mean_growth(self):
        for k in range(6):
            state, _ = subtract_photons(ThermalState(0.7), k)
            assert mean_photon(state) == pytest.approx(0.7 * (k + 1), rel=1e-12)

    @pytest.mark.parametrize(
        "state",
        [
            FockState(5),
            CoherentState(1.3),
            SqueezedVacuumState(0.9),
            ThermalState(2.1),
            CompoundPoissonState(2.7, 3.5),
            NumericState(np.array([0.1, 0.3, 0.4, 0.15, 0.05])),
        ],
    )
    def test_shift_rule_commutation(self, state):
        n_max = max(state.truncation(), 8)
        subtracted, _ = subtract_photons(state, 1)
        expected = brute_force_shift(state, n_max)
        assert np.max(np.abs(subtracted.pmf(n_max) - expected)) < 1e-10

    def test_numeric_stays_numeric(self):
        state, _ = subtract_photons(NumericState([0.5, 0.25, 0.25]), 1)
        assert isinstance(state, NumericState)

    def test_zero_mean_numeric_error(self):
        with pytest.raises(DomainError):
            subtract_photons(NumericState([1.0]), 1)

    def test_negative_k(self):
        with pytest.raises(DomainError):
            subtract_photons(ThermalState(1.0), -1)


class TestMeanPhoton:
    def test_fock(self):
        assert mean_photon(FockState(4)) == 4.0

    def test_squeezed(self):
        assert mean_photon(SqueezedVacuumState(1.0)) == pytest.approx(
            math.sinh(1.0) ** 2, rel=1e-12
        )

    def test_compound_constructor_consistency(self):
        assert mean_photon(CompoundPoissonState(9.78, 6.0)) == 9.78

    @pytest.mark.parametrize(
        "state",
        [ThermalState(1.63), SqueezedVacuumState(1.1), CompoundPoissonState(4.0, 2.5)],
    )
    def test_matches_truncated_sum(self, state):
        n_max = state.truncation(1e-14)
        p = state.pmf(n_max)
        assert mean_photon(state) == pytest.approx(
            float(np.arange(n_max + 1) @ p), abs=1e-9
        )


class TestCorrelation:
    def test_thermal_g2(self):
        for mu in (0.3, 1.63, 7.0):
            assert correlation_g(ThermalState(mu), 2) == pytest.approx(2.0, abs=1e-12)

    def test_subtracted_g2_law(self):
        for k in range(11):
            state, _ = subtract_photons(ThermalState(1.63), k)
            assert correlation_g(state, 2) == pytest.approx(
                1.0 + 1.0 / (k + 1), abs=1e-12
            )

    def test_compound_a5(self):
        assert correlation_g(CompoundPoissonState(3.0, 5.0), 2) == pytest.approx(1.2)

    def test_thermal_g3_against_numeric_derivative(self):
        # Oracle: third derivative of G at z = 1 by central differences.
        state = ThermalState(1.0)
        h = 1e-3
        z = np.array([-3, -2, -1, 0, 1, 2, 3]) * h + 1.0
        g = np.array([state.generating(zi) for zi in z])
        d3 = (g[6] - 3 * g[4] + 3 * g[2] - g[0]) / (8 * h**3)
        assert correlation_g(state, 3) == pytest.approx(6.0, abs=1e-12)
        assert d3 / state.mu**3 == pytest.approx(6.0, rel=1e-4)

    @pytest.mark.parametrize(
        "state, m",
        [
            (ThermalState(2.0), 2),
            (ThermalState(0.8), 4),
            (CompoundPoissonState(3.0, 2.5), 3),
            (CompoundPoissonState(9.78, 6.0), 2),
            (CoherentState(2.0), 3),
            (FockState(6), 2),
            (SqueezedVacuumState(0.8), 2),
        ],
    )
    def test_matches_factorial_moments(self, state, m):
        assert correlation_g(state, m) == pytest.approx(
            factorial_moment(state, m), abs=1e-9
        )

    def test_zero_mean_error(self):
        with pytest.raises(DomainError):
            correlation_g(FockState(0), 2)

    def test_order_below_two(self):
        with pytest.raises(DomainError):
            correlation_g(ThermalState(1.0), 1)


class TestSqueezedGn:
    def brute(self, xi, n):
        state = SqueezedVacuumState(xi)
        return factorial_moment(state, n, n_max=max(state.truncation(1e-14), 600))

    def test_g2_unit_sinh(self):
        xi = math.asinh(1.0)
        assert squeezed_gn(xi, 2) == pytest.approx(4.0, abs=1e-12)
        assert squeezed_gn(xi, 2) == pytest.approx(self.brute(xi, 2), abs=1e-9)

    def test_g2_closed_form(self):
        for xi in (0.5, 1.0, 2.0):
            expected = 3.0 + 1.0 / math.sinh(xi) ** 2
            assert squeezed_gn(xi, 2) == pytest.approx(expected, rel=1e-12)

    def test_g2_large_squeezing_limit(self):
        values = [squeezed_gn(xi, 2) for xi in (1.0, 2.0, 4.0, 8.0)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] == pytest.approx(3.0, abs=1e-3)

    def test_g3_unit_sinh(self):
        xi = math.asinh(1.0)
        assert squeezed_gn(xi, 3) == pytest.approx(24.0, rel=1e-12)
        assert squeezed_gn(xi, 3) == pytest.approx(self.brute(xi, 3), rel=1e-9)

    def test_vacuum_error(self):
        with pytest.raises(DomainError):
            squeezed_gn(0.0, 2)


class TestSubtractedThermalParams:
    def test_paper_initial_state(self):
        assert subtracted_thermal_params(1.63, 0) == CompoundPoissonParams(1.63, 1.0)

    def test_five_subtractions(self):
        params = subtracted_thermal_params(1.63, 5)
        assert params.mu == pytest.approx(9.78)
        assert params.a == 6.0

    def test_identity_at_k0(self):
        for mu0 in (0.2, 1.0, 8.5):
            params = subtracted_thermal_params(mu0, 0)
            assert (params.mu, params.a) == (mu0, 1.0)


class TestGammaRatio:
    def test_small_matches_direct(self):
        assert gamma_ratio(2.5, 3) == pytest.approx(2.5 * 3.5 * 4.5, rel=1e-15)

    def test_log_space_consistent(self):
        direct = math.exp(sum(math.log(0.7 + j) for j in range(25)))
        assert gamma_ratio(0.7, 25) == pytest.approx(direct, rel=1e-12)


class TestSerialization:
    @pytest.mark.parametrize(
        "state",
        [
            FockState(2),
            CoherentState(1.5),
            SqueezedVacuumState(0.7),
            ThermalState(1.63),
            CompoundPoissonState(9.78, 6.0),
            NumericState([0.5, 0.5]),
        ],
    )
    def test_json_round_trip(self, state):
        blob = json.dumps(state_to_json(state))
        assert state_from_json(blob) == state

    def test_thermal_keeps_family_tag(self):
        assert state_to_json(ThermalState(2.0))["family"] == "thermal"

    def test_pmf_csv(self, tmp_path):
        path = tmp_path / "pmf.csv"
        pmf_to_csv(path, ThermalState(1.0).pmf(3))
        lines = path.read_text().splitlines()
        assert lines[0] == "n,P"
        assert lines[1] == "0,0.5"
        assert len(lines) == 5
