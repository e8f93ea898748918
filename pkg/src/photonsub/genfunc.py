"""Generating-function calculus over photon-number distributions.

A photon-number distribution P(n) is encoded by its generating function
G(z) = sum_n P(n) z^n.  Photon subtraction acts as normalized differentiation,
G_1(z) = G'(z) / G'(1), which in pmf space is the exact shift rule
q(n) = (n+1) P(n+1) / mu.  The state families implemented here (Fock,
coherent, squeezed vacuum, thermal, compound Poisson) all have closed-form
generating functions; everything else is carried as a truncated pmf vector.

The compound-Poisson family P_{mu,a}(n) (a Poisson distribution mixed over a
Gamma-distributed intensity, i.e. a negative binomial with mean mu and shape
a) is closed under photon subtraction: (mu, a) -> (mu (a+1)/a, a+1).  A
thermal state is the a = 1 member, so subtracting k photons from Thermal(mu0)
lands on (mu0 (k+1), k+1).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

# Truncation policy: extend the pmf until the neglected tail mass drops
# below TAIL_MASS, never exceeding N_CAP entries.
TAIL_MASS = 1e-12
N_CAP = 4096


@dataclass(frozen=True)
class CompoundPoissonParams:
    """Mean photon number mu >= 0 and coherence parameter a > 0."""

    mu: float
    a: float

    def __post_init__(self):
        if not (self.mu >= 0.0) or not math.isfinite(self.mu):
            raise DomainError(f"mu must be a nonnegative real, got mu={self.mu}")
        if not (self.a > 0.0) or not math.isfinite(self.a):
            raise DomainError(f"a must be a positive real, got a={self.a}")


@dataclass(frozen=True)
class SubtractionRecord:
    """Per-step bookkeeping of a k-fold photon subtraction.

    ``means`` holds the mean photon numbers (mu, mu_1, ..., mu_{k-1}) of the
    states each subtraction acted on; their product is the k-th derivative
    normalizer G^(k)(1).
    """

    k: int
    means: tuple[float, ...]

    @property
    def normalizer(self) -> float:
        return float(np.prod(self.means)) if self.means else 1.0


class PhotonState:
    """Base class for diagonal photon-number states."""

    def pmf(self, n_max: int) -> np.ndarray:
        """Probabilities (P(0), ..., P(n_max))."""
        raise NotImplementedError

    def mean_photon(self) -> float:
        raise NotImplementedError

    def generating(self, z: float) -> float:
        """Evaluate G(z) = sum_n P(n) z^n."""
        raise NotImplementedError

    def truncation(self, tail: float = TAIL_MASS) -> int:
        """Smallest n_max whose neglected tail mass is below ``tail``."""
        n = max(32, int(self.mean_photon()) + 16)
        while n < N_CAP:
            if 1.0 - self.pmf(n).sum() < tail:
                return n
            n *= 2
        return N_CAP

    def _subtract_once(self) -> "PhotonState":
        """One application of the subtraction rule; must stay normalized."""
        mu = self.mean_photon()
        if mu <= 0.0:
            raise DomainError("cannot subtract a photon from a zero-mean state")
        n_max = self.truncation()
        p = self.pmf(n_max)
        mu_trunc = float(np.arange(n_max + 1) @ p)
        shifted = np.arange(1, n_max + 1) * p[1:] / mu_trunc
        return NumericState(shifted)


@dataclass(frozen=True)
class FockState(PhotonState):
    """Number state |m>: P(n) = delta_{m,n}, G(z) = z^m."""

    m: int

    def __post_init__(self):
        if self.m < 0 or self.m != int(self.m):
            raise DomainError(f"m must be a nonnegative integer, got m={self.m}")

    def pmf(self, n_max: int) -> np.ndarray:
        p = np.zeros(n_max + 1)
        if self.m <= n_max:
            p[self.m] = 1.0
        return p

    def mean_photon(self) -> float:
        return float(self.m)

    def generating(self, z: float) -> float:
        return z**self.m

    def truncation(self, tail: float = TAIL_MASS) -> int:
        return self.m

    def _subtract_once(self) -> PhotonState:
        if self.m == 0:
            raise DomainError("cannot subtract a photon from the vacuum Fock(0)")
        return FockState(self.m - 1)


@dataclass(frozen=True)
class CoherentState(PhotonState):
    """Poissonian state with mean mu: G(z) = exp(mu (z - 1))."""

    mu: float

    def __post_init__(self):
        if not (self.mu >= 0.0):
            raise DomainError(f"mu must be nonnegative, got mu={self.mu}")

    def pmf(self, n_max: int) -> np.ndarray:
        if self.mu == 0.0:
            return FockState(0).pmf(n_max)
        n = np.arange(n_max + 1)
        return np.exp(n * math.log(self.mu) - self.mu - gammaln(n + 1))

    def mean_photon(self) -> float:
        return self.mu

    def generating(self, z: float) -> float:
        return math.exp(self.mu * (z - 1.0))

    def _subtract_once(self) -> PhotonState:
        if self.mu <= 0.0:
            raise DomainError("cannot subtract a photon from the vacuum")
        return self  # Poisson statistics are a fixed point of subtraction


@dataclass(frozen=True)
class SqueezedVacuumState(PhotonState):
    """Squeezed vacuum with squeezing modulus xi >= 0.

    Only even photon numbers are populated:
    P(2n) = (1/cosh xi) (2n)!/(n!)^2 (tanh(xi)/2)^(2n), P(2n+1) = 0.
    """

    xi: float

    def __post_init__(self):
        if not (self.xi >= 0.0):
            raise DomainError(f"xi must be nonnegative, got xi={self.xi}")

    def pmf(self, n_max: int) -> np.ndarray:
        p = np.zeros(n_max + 1)
        if self.xi == 0.0:
            p[0] = 1.0
            return p
        n = np.arange(0, n_max // 2 + 1)
        log_even = (
            -math.log(math.cosh(self.xi))
            + gammaln(2 * n + 1)
            - 2.0 * gammaln(n + 1)
            + 2.0 * n * math.log(math.tanh(self.xi) / 2.0)
        )
        p[0 : 2 * n[-1] + 1 : 2] = np.exp(log_even)
        return p

    def mean_photon(self) -> float:
        return math.sinh(self.xi) ** 2

    def generating(self, z: float) -> float:
        t2 = math.tanh(self.xi) ** 2
        return 1.0 / (math.cosh(self.xi) * math.sqrt(1.0 - z * z * t2))


@dataclass(frozen=True)
class CompoundPoissonState(PhotonState):
    """Compound-Poisson (negative binomial) state with mean mu and shape a.

    P(n) = Gamma(a+n)/Gamma(a) (mu/a)^n / n! / (1 + mu/a)^(n+a),
    G(z) = [1 + (1 - z) mu/a]^(-a).  a may be any positive real.
    """

    mu: float
    a: float = 1.0

    def __post_init__(self):
        CompoundPoissonParams(self.mu, self.a)

    @property
    def params(self) -> CompoundPoissonParams:
        return CompoundPoissonParams(self.mu, self.a)

    def pmf(self, n_max: int) -> np.ndarray:
        return compound_poisson_pmf(self.params, n_max)

    def mean_photon(self) -> float:
        return self.mu

    def generating(self, z: float) -> float:
        return (1.0 + (1.0 - z) * self.mu / self.a) ** (-self.a)

    def _subtract_once(self) -> PhotonState:
        if self.mu <= 0.0:
            raise DomainError("cannot subtract a photon from a zero-mean state")
        return CompoundPoissonState(self.mu * (self.a + 1.0) / self.a, self.a + 1.0)


@dataclass(frozen=True)
class ThermalState(CompoundPoissonState):
    """Bose-Einstein state: the a = 1 compound-Poisson member."""

    def __post_init__(self):
        if self.a != 1.0:
            raise DomainError("a thermal state has a = 1 by definition")
        super().__post_init__()


@dataclass(frozen=True)
class NumericState(PhotonState):
    """State given by an explicit truncated pmf vector (no family claimed)."""

    probs: tuple[float, ...] = field(repr=False)

    def __init__(self, probs):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise DomainError("probs must be a nonempty 1-d probability vector")
        if np.any(p < 0.0):
            raise DomainError("probabilities must be nonnegative")
        total = p.sum()
        if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=1e-6):
            raise DomainError(f"pmf must sum to 1 (got {total!r})")
        object.__setattr__(self, "probs", tuple(p / total))

    def pmf(self, n_max: int) -> np.ndarray:
        p = np.zeros(n_max + 1)
        k = min(n_max + 1, len(self.probs))
        p[:k] = self.probs[:k]
        return p

    def mean_photon(self) -> float:
        p = np.asarray(self.probs)
        return float(np.arange(p.size) @ p)

    def generating(self, z: float) -> float:
        p = np.asarray(self.probs)
        return float(np.polynomial.polynomial.polyval(z, p))

    def truncation(self, tail: float = TAIL_MASS) -> int:
        return len(self.probs) - 1


def compound_poisson_pmf(params: CompoundPoissonParams, n_max: int) -> np.ndarray:
    """Closed-form pmf of the compound-Poisson family, stable for real a."""
    mu, a = params.mu, params.a
    if mu == 0.0:
        return FockState(0).pmf(n_max)
    n = np.arange(n_max + 1)
    log_p = (
        gammaln(a + n)
        - gammaln(a)
        - gammaln(n + 1)
        + n * (math.log(mu) - math.log(a))
        - (n + a) * math.log1p(mu / a)
    )
    return np.exp(log_p)


def gamma_ratio(a: float, m: int) -> float:
    """Gamma(a + m) / Gamma(a) for integer m >= 0.

    Iterated multiplication for small m; log space beyond m = 20 to avoid
    overflow at large arguments.
    """
    if m < 0:
        raise DomainError("m must be nonnegative")
    if m <= 20:
        out = 1.0
        for j in range(m):
            out *= a + j
        return out
    return math.exp(math.fsum(math.log(a + j) for j in range(m)))


_FAMILIES = {
    "fock": FockState,
    "coherent": CoherentState,
    "squeezed_vacuum": SqueezedVacuumState,
    "thermal": ThermalState,
    "compound_poisson": CompoundPoissonState,
    "numeric": NumericState,
}


def make_state(family: str, **params) -> PhotonState:
    """Construct a state by family name; raises DomainError on bad parameters.

    Families: fock(m), coherent(mu), squeezed_vacuum(xi), thermal(mu),
    compound_poisson(mu, a), numeric(probs).
    """
    key = family.strip().lower()
    if key not in _FAMILIES:
        raise DomainError(f"unknown state family {family!r}")
    return _FAMILIES[key](**params)


def pmf(state: PhotonState, n_max: int) -> np.ndarray:
    """Probabilities (P(0), ..., P(n_max)) of ``state``."""
    if n_max < 0:
        raise DomainError("n_max must be nonnegative")
    return state.pmf(n_max)


def mean_photon(state: PhotonState) -> float:
    """First factorial moment G'(1)."""
    return state.mean_photon()


def subtract_photons(state: PhotonState, k: int) -> tuple[PhotonState, SubtractionRecord]:
    """Apply k photon subtractions; returns the state and per-step means."""
    if k < 0 or k != int(k):
        raise DomainError(f"k must be a nonnegative integer, got k={k}")
    means = []
    current = state
    for _ in range(int(k)):
        means.append(current.mean_photon())
        current = current._subtract_once()
    return current, SubtractionRecord(k=int(k), means=tuple(means))


def correlation_g(state: PhotonState, m: int) -> float:
    """Normalized m-th order correlation function g^(m) = G^(m)(1) / mu^m."""
    if m < 2 or m != int(m):
        raise DomainError(f"correlation order must be an integer >= 2, got m={m}")
    m = int(m)
    mu = state.mean_photon()
    if mu <= 0.0:
        raise DomainError("g^(m) is undefined for a zero-mean state")
    if isinstance(state, CompoundPoissonState):
        return gamma_ratio(state.a, m) / state.a**m
    if isinstance(state, CoherentState):
        return 1.0
    if isinstance(state, FockState):
        if m > state.m:
            return 0.0
        return gamma_ratio(float(state.m - m + 1), m) / float(state.m) ** m
    if isinstance(state, SqueezedVacuumState):
        return squeezed_gn(state.xi, m)
    # NumericState: factorial-moment sum over the stored pmf.
    p = np.asarray(state.pmf(state.truncation()))
    n = np.arange(p.size, dtype=float)
    fact = np.ones_like(n)
    for j in range(m):
        fact *= np.maximum(n - j, 0.0)
    return float(fact @ p) / mu**m


def squeezed_gn(xi: float, n: int) -> float:
    """g^(n) of squeezed vacuum via its closed finite sum.

    g^(n) = n!/2^n * sum_{k=0}^{floor(n/2)} (2n-2k)! / (k! (n-k)! (n-2k)!)
            * sinh(xi)^(-2k).
    """
    if n < 2 or n != int(n):
        raise DomainError(f"correlation order must be an integer >= 2, got n={n}")
    if xi <= 0.0:
        raise DomainError("g^(n) of the vacuum (xi = 0) is undefined")
    n = int(n)
    s = math.sinh(xi) ** 2
    total = 0.0
    for k in range(n // 2 + 1):
        term = math.exp(
            gammaln(2 * n - 2 * k + 1)
            - gammaln(k + 1)
            - gammaln(n - k + 1)
            - gammaln(n - 2 * k + 1)
        )
        total += term * s ** (-k)
    return math.factorial(n) / 2.0**n * total


def subtracted_thermal_params(mu0: float, k: int) -> CompoundPoissonParams:
    """Parameters of a k-photon-subtracted thermal state: a = k+1, mu = mu0 (k+1)."""
    if mu0 <= 0.0:
        raise DomainError(f"mu0 must be positive, got {mu0}")
    if k < 0 or k != int(k):
        raise DomainError(f"k must be a nonnegative integer, got k={k}")
    return CompoundPoissonParams(mu=mu0 * (k + 1), a=float(k + 1))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def state_to_json(state: PhotonState) -> dict:
    """JSON-ready mapping {family, params} identifying the state."""
    if isinstance(state, FockState):
        return {"family": "fock", "params": {"m": state.m}}
    if isinstance(state, CoherentState):
        return {"family": "coherent", "params": {"mu": state.mu}}
    if isinstance(state, SqueezedVacuumState):
        return {"family": "squeezed_vacuum", "params": {"xi": state.xi}}
    if isinstance(state, ThermalState):
        return {"family": "thermal", "params": {"mu": state.mu}}
    if isinstance(state, CompoundPoissonState):
        return {"family": "compound_poisson", "params": {"mu": state.mu, "a": state.a}}
    if isinstance(state, NumericState):
        return {"family": "numeric", "params": {"probs": list(state.probs)}}
    raise DomainError(f"cannot serialize state of type {type(state).__name__}")


def state_from_json(obj: dict | str) -> PhotonState:
    """Inverse of :func:`state_to_json`; accepts a mapping or a JSON string."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    return make_state(obj["family"], **obj["params"])


def pmf_to_csv(path: str | Path, probs: np.ndarray) -> None:
    """Write a pmf vector as CSV with columns n, P."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "P"])
        for n, p in enumerate(np.asarray(probs, dtype=float)):
            writer.writerow([n, repr(float(p))])
