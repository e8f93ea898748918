"""Quadrature and phase-space descriptions of diagonal photon-number states.

For a phase-averaged state with photon statistics P(n), the homodyne
quadrature density is the mixture P(q) = sum_n P(n) |phi_n(q)|^2 of harmonic
oscillator eigenfunctions, and the Wigner function is the matching Laguerre
series W(q, p) = (1/pi) sum_n P(n) (-1)^n L_n(2 r^2) exp(-r^2).  Conventions
are fixed so the vacuum quadrature variance is 1/2 (a coherent state of
amplitude alpha has mean quadrature sqrt(2) Re alpha).

Detection efficiency eta is exact Bernoulli loss for the compound-Poisson
family: it maps (mu, a) -> (eta mu, a) and leaves the family invariant.  A
literal Gaussian-kernel smoothing mode is kept for comparison with the
historical convolution recipe exp(-q^2 eta / (1 - eta)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, MomentIncompatibilityError
from .genfunc import (
    TAIL_MASS,
    CompoundPoissonParams,
    CompoundPoissonState,
    compound_poisson_pmf,
)


@dataclass(frozen=True)
class MomentSummary:
    """Quadrature variance and kurtosis (central fourth moment / variance^2)."""

    variance: float
    kurtosis: float


def hermite_phi(n: int, q) -> np.ndarray | float:
    """Unit-norm harmonic-oscillator eigenfunction phi_n(q).

    Uses the normalized three-term recurrence
    phi_{n+1} = q sqrt(2/(n+1)) phi_n - sqrt(n/(n+1)) phi_{n-1},
    which is stable to n ~ several thousand (raw Hermite polynomials times
    factorials overflow long before that).
    """
    if n < 0 or n != int(n):
        raise DomainError(f"n must be a nonnegative integer, got n={n}")
    q_arr = np.asarray(q, dtype=float)
    phi_prev = np.pi ** (-0.25) * np.exp(-0.5 * q_arr * q_arr)
    if n == 0:
        return phi_prev if np.ndim(q) else float(phi_prev)
    phi = math.sqrt(2.0) * q_arr * phi_prev
    for k in range(1, int(n)):
        phi, phi_prev = (
            q_arr * math.sqrt(2.0 / (k + 1)) * phi - math.sqrt(k / (k + 1.0)) * phi_prev,
            phi,
        )
    return phi if np.ndim(q) else float(phi)


def _weighted_phi_sq_sum(weights: np.ndarray, q: np.ndarray) -> np.ndarray:
    """sum_n weights[n] * phi_n(q)^2, streaming the recurrence over n."""
    phi_prev = np.pi ** (-0.25) * np.exp(-0.5 * q * q)
    out = weights[0] * phi_prev * phi_prev
    if len(weights) == 1:
        return out
    phi = math.sqrt(2.0) * q * phi_prev
    out += weights[1] * phi * phi
    for k in range(1, len(weights) - 1):
        phi, phi_prev = (
            q * math.sqrt(2.0 / (k + 1)) * phi - math.sqrt(k / (k + 1.0)) * phi_prev,
            phi,
        )
        out += weights[k + 1] * phi * phi
    return out


def quadrature_pdf(
    params: CompoundPoissonParams,
    eta: float,
    q,
    mode: str = "bernoulli",
    tail: float = TAIL_MASS,
) -> np.ndarray | float:
    """Homodyne quadrature density of a compound-Poisson state.

    Args:
        params: state parameters (mu, a).
        eta: detection efficiency in (0, 1].
        q: quadrature value(s).
        mode: "bernoulli" applies the exact loss map (mu, a) -> (eta mu, a)
            before summing the eigenfunction series; "kernel" reproduces the
            literal Gaussian smoothing of the eta = 1 density with the kernel
            exp(-q^2 eta / (1 - eta)).
        tail: neglected pmf tail mass controlling the series truncation.
    """
    if not (0.0 < eta <= 1.0):
        raise DomainError(f"eta must lie in (0, 1], got eta={eta}")
    q_arr = np.atleast_1d(np.asarray(q, dtype=float))
    if mode == "bernoulli":
        damped = CompoundPoissonParams(eta * params.mu, params.a)
        out = _series_pdf(damped, q_arr, tail)
    elif mode == "kernel":
        out = _kernel_pdf(params, eta, q_arr, tail)
    else:
        raise DomainError(f"unknown efficiency mode {mode!r}")
    return out if np.ndim(q) else float(out[0])


def _series_pdf(params: CompoundPoissonParams, q: np.ndarray, tail: float) -> np.ndarray:
    n_max = CompoundPoissonState(params.mu, params.a).truncation(tail)
    weights = compound_poisson_pmf(params, n_max)
    return _weighted_phi_sq_sum(weights, q)


def _kernel_pdf(
    params: CompoundPoissonParams, eta: float, q: np.ndarray, tail: float
) -> np.ndarray:
    if eta == 1.0:
        return _series_pdf(params, q, tail)
    var_kernel = (1.0 - eta) / (2.0 * eta)
    sigma_kernel = math.sqrt(var_kernel)
    sigma_state = math.sqrt(params.mu + 0.5)
    span = max(np.max(np.abs(q)), 10.0 * sigma_state) + 8.0 * sigma_kernel
    step = min(0.02, sigma_kernel / 8.0)
    grid = np.arange(-span, span + step, step)
    base = _series_pdf(params, grid, tail)
    half = int(math.ceil(8.0 * sigma_kernel / step))
    kq = np.arange(-half, half + 1) * step
    kernel = np.exp(-kq * kq / (2.0 * var_kernel))
    kernel /= kernel.sum()
    smoothed = np.convolve(base, kernel, mode="same")
    return CubicSpline(grid, smoothed)(q)


def moments_from_params(params: CompoundPoissonParams) -> MomentSummary:
    """Closed-form quadrature variance and kurtosis of the (mu, a) state."""
    mu, a = params.mu, params.a
    variance = mu + 0.5
    kurtosis = 3.0 - 6.0 * (mu / (2.0 * mu + 1.0)) ** 2 * (a - 1.0) / a
    return MomentSummary(variance=variance, kurtosis=kurtosis)


def kurtosis_band(variance: float) -> tuple[float, float]:
    """Kurtosis range attainable over a in [1, inf) at fixed variance."""
    mu = variance - 0.5
    return 3.0 - 6.0 * (mu / (2.0 * mu + 1.0)) ** 2, 3.0


def params_from_moments(variance: float, kurtosis: float) -> CompoundPoissonParams:
    """Invert the moment relations: mu = variance - 1/2 and a from kurtosis.

    Raises MomentIncompatibilityError when the pair (variance, kurtosis)
    cannot arise from any (mu, a >= 1) state, so callers can fall back to a
    full likelihood fit.
    """
    if not variance > 0.5:
        raise MomentIncompatibilityError(
            f"variance must exceed the vacuum value 1/2, got {variance}",
            variance,
            kurtosis,
        )
    mu = variance - 0.5
    lo, hi = kurtosis_band(variance)
    if not (lo < kurtosis <= hi):
        raise MomentIncompatibilityError(
            f"kurtosis {kurtosis} outside attainable band ({lo}, {hi}] "
            f"at variance {variance}",
            variance,
            kurtosis,
        )
    c = (3.0 - kurtosis) * (2.0 * mu + 1.0) ** 2 / (6.0 * mu * mu)
    return CompoundPoissonParams(mu=mu, a=1.0 / (1.0 - c))


def wigner(params: CompoundPoissonParams, q, p, tail: float = TAIL_MASS) -> np.ndarray | float:
    """Wigner function W(q, p) of a phase-symmetric compound-Poisson state.

    W = (1/pi) sum_n P(n) (-1)^n L_n(2 r^2) exp(-r^2) with r^2 = q^2 + p^2;
    evaluated via the recurrence for exp(-x/2) L_n(x), which keeps every
    term bounded.  At the origin this reduces to G(-1)/pi.
    """
    q_arr = np.asarray(q, dtype=float)
    p_arr = np.asarray(p, dtype=float)
    x = 2.0 * (q_arr * q_arr + p_arr * p_arr)
    n_max = CompoundPoissonState(params.mu, params.a).truncation(tail)
    weights = compound_poisson_pmf(params, n_max)

    m_prev = np.exp(-0.5 * x)
    acc = weights[0] * m_prev
    if n_max >= 1:
        m = (1.0 - x) * np.exp(-0.5 * x)
        acc = acc - weights[1] * m
        sign = 1.0
        for n in range(1, n_max):
            m, m_prev = ((2.0 * n + 1.0 - x) * m - n * m_prev) / (n + 1.0), m
            acc = acc + sign * weights[n + 1] * m
            sign = -sign
    out = acc / np.pi
    return out if (np.ndim(q) or np.ndim(p)) else float(out)
