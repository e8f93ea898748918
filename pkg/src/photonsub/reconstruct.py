"""State estimation from homodyne quadrature samples.

The model family is the two-parameter compound-Poisson state (mu, a) observed
at a known detection efficiency eta.  Moment relations give a fast starting
point (variance pins mu, kurtosis pins a); a derivative-free simplex search
over (log mu, log a) with a Newton polish maximizes the exact sample
likelihood; the observed Fisher information supplies error bars; an
equiprobable-bin chi^2 test guards against misspecification; and the squared
Bhattacharyya overlap of photon-number distributions scores fidelity against
a reference state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize
from scipy.stats import chi2 as chi2_dist

from .errors import (
    DataError,
    DomainError,
    FitConvergenceError,
    InsufficientDataError,
    MomentIncompatibilityError,
)
from .genfunc import CompoundPoissonParams, CompoundPoissonState, subtracted_thermal_params
from .quadrature import kurtosis_band, params_from_moments, quadrature_pdf

A_CLAMP_RANGE = (1.0, 64.0)
MU_FLOOR = 1e-12
NEAR_VACUUM_MU = 1e-6
GRAD_TOL = 1e-7
SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class MomentEstimate:
    """Quick (mu, a) estimate from sample variance and kurtosis."""

    params: CompoundPoissonParams
    clamped: bool
    variance: float
    kurtosis: float


@dataclass(frozen=True)
class Chi2Result:
    statistic: float
    dof: int
    p_value: float


@dataclass(frozen=True)
class FisherErrors:
    covariance: np.ndarray
    std_mu: float
    std_a: float
    singular: bool


@dataclass
class FitResult:
    """Maximum-likelihood reconstruction of a compound-Poisson state."""

    mu: float
    a: float
    covariance: np.ndarray | None
    std_mu: float
    std_a: float
    log_likelihood: float
    chi2: Chi2Result | None
    fidelity: float | None
    n_samples: int
    eta: float
    converged: bool
    near_vacuum: bool
    singular_information: bool
    init: CompoundPoissonParams
    init_clamped: bool
    n_evaluations: int
    fixed_a: float | None = None
    data_seed: int | None = None

    @property
    def params(self) -> CompoundPoissonParams:
        return CompoundPoissonParams(self.mu, self.a)

    def to_json(self) -> dict:
        def _clean(x):
            if x is None or (isinstance(x, float) and not math.isfinite(x)):
                return None
            return x

        cov = self.covariance
        if cov is not None and not np.all(np.isfinite(cov)):
            cov = None
        return {
            "mu": self.mu,
            "a": self.a,
            "covariance": None if cov is None else cov.tolist(),
            "std_mu": _clean(self.std_mu),
            "std_a": _clean(self.std_a),
            "log_likelihood": self.log_likelihood,
            "chi2": None if self.chi2 is None else self.chi2.statistic,
            "chi2_dof": None if self.chi2 is None else self.chi2.dof,
            "p_value": None if self.chi2 is None else self.chi2.p_value,
            "fidelity": self.fidelity,
            "n_samples": self.n_samples,
            "eta": self.eta,
            "converged": self.converged,
            "near_vacuum": self.near_vacuum,
            "singular_information": self.singular_information,
            "init": {"mu": self.init.mu, "a": self.init.a},
            "init_clamped": self.init_clamped,
            "n_evaluations": self.n_evaluations,
            "fixed_a": self.fixed_a,
            "data_seed": self.data_seed,
        }


def moment_estimate(samples, eta: float = 1.0) -> MomentEstimate:
    """Estimate (mu, a) from sample variance and kurtosis.

    Out-of-band kurtosis (heavier than thermal, or lighter than any a >= 1
    state allows) clamps a into [1, 64] and flags the clamp; the detection
    efficiency is divided out of mu.
    """
    q = np.asarray(samples, dtype=float)
    if q.ndim != 1 or q.size < 30:
        raise InsufficientDataError(
            f"moment estimation needs at least 30 samples, got {q.size}"
        )
    if not (0.0 < eta <= 1.0):
        raise DomainError(f"eta must lie in (0, 1], got eta={eta}")
    centered = q - q.mean()
    m2 = float(np.mean(centered**2))
    if m2 <= 0.0:
        raise InsufficientDataError("samples show no variation; variance is zero")
    m4 = float(np.mean(centered**4))
    kurt = m4 / (m2 * m2)

    clamped = False
    try:
        raw = params_from_moments(m2, kurt)
        mu_meas, a = raw.mu, raw.a
    except MomentIncompatibilityError:
        clamped = True
        mu_meas = max(m2 - 0.5, MU_FLOOR)
        lo, _ = kurtosis_band(max(m2, 0.5 + MU_FLOOR))
        # Above the thermal kurtosis -> thermal edge; below the a->inf
        # bound -> Poissonian edge.
        a = A_CLAMP_RANGE[0] if kurt > lo else A_CLAMP_RANGE[1]
    if a > A_CLAMP_RANGE[1]:
        a = A_CLAMP_RANGE[1]
        clamped = True
    return MomentEstimate(
        params=CompoundPoissonParams(mu=mu_meas / eta, a=a),
        clamped=clamped,
        variance=m2,
        kurtosis=kurt,
    )


class _GriddedLogLik:
    """Sample log-likelihood of the quadrature model, evaluated via a fine
    pdf grid plus cubic interpolation of log pdf (keeps positivity and makes
    each evaluation O(grid + n samples) instead of O(series x n samples)."""

    _STEP = 0.02

    def __init__(self, samples: np.ndarray, eta: float):
        self.samples = samples
        self.eta = eta
        lo = min(-6.0, float(samples.min()) - 1.5)
        hi = max(6.0, float(samples.max()) + 1.5)
        n_pts = int(math.ceil((hi - lo) / self._STEP)) + 1
        self.grid = np.linspace(lo, hi, n_pts)
        self.n_evaluations = 0

    def __call__(self, mu: float, a: float) -> float:
        self.n_evaluations += 1
        pdf = quadrature_pdf(CompoundPoissonParams(mu, a), self.eta, self.grid)
        log_pdf = np.log(np.maximum(pdf, 1e-300))
        return float(np.sum(CubicSpline(self.grid, log_pdf)(self.samples)))


def _clip_params(x: np.ndarray) -> tuple[float, float]:
    mu = math.exp(min(max(x[0], math.log(MU_FLOOR)), 12.0))
    a = math.exp(min(max(x[1], -12.0), 20.0))
    return mu, a


def mle_fit(
    samples,
    eta: float,
    init: CompoundPoissonParams | None = None,
    reference: CompoundPoissonParams | None = None,
    fix_a: float | None = None,
    data_seed: int | None = None,
    max_evaluations: int = 4000,
) -> FitResult:
    """Two-parameter maximum-likelihood fit of quadrature samples.

    Args:
        samples: 1-d array of homodyne quadratures (>= 100 values).
        eta: known detection efficiency in (0, 1].
        init: optional starting parameters; defaults to the moment estimate.
        reference: optional state whose fidelity with the fit is reported.
        fix_a: if given, a is frozen (e.g. 1.0 forces a thermal fit) and only
            mu is estimated.
        data_seed: echoed into the result for reproducible reporting.
        max_evaluations: likelihood-evaluation cap before declaring failure.

    Raises FitConvergenceError (carrying the best parameters and diagnostics)
    if neither the gradient-norm nor simplex-diameter criterion is met within
    the evaluation cap.
    """
    q = np.asarray(samples, dtype=float)
    if q.ndim != 1 or q.size < 100:
        raise InsufficientDataError(f"mle_fit needs at least 100 samples, got {q.size}")
    if not (0.0 < eta <= 1.0):
        raise DomainError(f"eta must lie in (0, 1], got eta={eta}")

    loglik = _GriddedLogLik(q, eta)
    init_clamped = False
    if init is None:
        est = moment_estimate(q, eta)
        init, init_clamped = est.params, est.clamped
    if fix_a is not None and fix_a <= 0:
        raise DomainError(f"fix_a must be positive, got {fix_a}")

    x0_mu = math.log(max(init.mu, 10 * MU_FLOOR))
    if fix_a is None:
        x0 = np.array([x0_mu, math.log(init.a)])

        def objective(x):
            mu, a = _clip_params(x)
            return -loglik(mu, a)

    else:
        x0 = np.array([x0_mu])

        def objective(x):
            mu, _ = _clip_params(np.array([x[0], 0.0]))
            return -loglik(mu, fix_a)

    res = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={
            "xatol": SIMPLEX_TOL,
            "fatol": 1e-10,
            "maxfev": max_evaluations,
            "initial_simplex": _initial_simplex(x0),
        },
    )
    x_best, f_best = res.x, res.fun

    # Newton polish from finite differences; keeps the better point.
    grad = _fd_gradient(objective, x_best)
    hess = _fd_hessian(objective, x_best)
    try:
        step = -np.linalg.solve(hess, grad)
        f_new = objective(x_best + step)
        if f_new < f_best:
            x_best, f_best = x_best + step, f_new
            grad = _fd_gradient(objective, x_best)
    except np.linalg.LinAlgError:
        pass

    converged = bool(res.success) or float(np.max(np.abs(grad))) < GRAD_TOL
    if fix_a is None:
        mu_hat, a_hat = _clip_params(x_best)
    else:
        mu_hat, _ = _clip_params(np.array([x_best[0], 0.0]))
        a_hat = fix_a
    if not converged:
        raise FitConvergenceError(
            "likelihood maximization did not converge",
            best_params=CompoundPoissonParams(mu_hat, a_hat),
            diagnostics={
                "n_evaluations": loglik.n_evaluations,
                "objective": f_best,
                "grad_max": float(np.max(np.abs(grad))),
                "message": res.message,
            },
        )

    near_vacuum = mu_hat < NEAR_VACUUM_MU
    params_hat = CompoundPoissonParams(mu_hat, a_hat)
    errors = fisher_errors(params_hat, q, eta, fix_a=fix_a)

    chi2_res = None
    if q.size >= 200:
        chi2_res = chi2_gof_params(
            q, params_hat, eta, n_fitted=1 if fix_a is not None else 2
        )

    fid = None
    if reference is not None:
        fid = compound_fidelity(params_hat, reference)

    return FitResult(
        mu=mu_hat,
        a=a_hat,
        covariance=errors.covariance,
        std_mu=errors.std_mu,
        std_a=errors.std_a,
        log_likelihood=-f_best,
        chi2=chi2_res,
        fidelity=fid,
        n_samples=int(q.size),
        eta=eta,
        converged=converged,
        near_vacuum=near_vacuum,
        singular_information=errors.singular,
        init=init,
        init_clamped=init_clamped,
        n_evaluations=loglik.n_evaluations,
        fixed_a=fix_a,
        data_seed=data_seed,
    )


def _initial_simplex(x0: np.ndarray) -> np.ndarray:
    simplex = np.tile(x0, (len(x0) + 1, 1))
    for i in range(len(x0)):
        simplex[i + 1, i] += 0.05
    return simplex


def _fd_gradient(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def _fd_hessian(f, x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    n = len(x)
    hess = np.zeros((n, n))
    f0 = f(x)
    steps = [np.eye(n)[i] * h for i in range(n)]
    for i in range(n):
        hess[i, i] = (f(x + steps[i]) + f(x - steps[i]) - 2 * f0) / h**2
        for j in range(i + 1, n):
            hess[i, j] = hess[j, i] = (
                f(x + steps[i] + steps[j])
                + f(x - steps[i] - steps[j])
                - f(x + steps[i] - steps[j])
                - f(x - steps[i] + steps[j])
            ) / (4 * h**2)
    return hess


def fisher_errors(
    fit, samples, eta: float, fix_a: float | None = None
) -> FisherErrors:
    """Observed-information error bars at the fitted parameters.

    The observed information is the negative Hessian of the sample
    log-likelihood in (mu, a), by central finite differences with steps
    adapted to the parameter scale; errors are sqrt of the inverse diagonal.
    A non-invertible information matrix is flagged and the errors reported
    as infinite.
    """
    params = fit.params if isinstance(fit, FitResult) else fit
    q = np.asarray(samples, dtype=float)
    loglik = _GriddedLogLik(q, eta)
    h_mu = 1e-3 * max(params.mu, 1e-2)
    h_a = 1e-3 * max(params.a, 1e-2)

    if fix_a is not None:
        d2 = (
            loglik(params.mu + h_mu, params.a)
            + loglik(params.mu - h_mu, params.a)
            - 2 * loglik(params.mu, params.a)
        ) / h_mu**2
        info = -d2
        if not math.isfinite(info) or info <= 0:
            return FisherErrors(np.array([[math.inf]]), math.inf, 0.0, True)
        var = 1.0 / info
        return FisherErrors(np.array([[var]]), math.sqrt(var), 0.0, False)

    def f(x):
        mu = max(x[0], MU_FLOOR)
        a = max(x[1], 1e-9)
        return loglik(mu, a)

    x0 = np.array([params.mu, params.a])
    f0 = f(x0)
    e_mu = np.array([h_mu, 0.0])
    e_a = np.array([0.0, h_a])
    h11 = (f(x0 + e_mu) + f(x0 - e_mu) - 2 * f0) / h_mu**2
    h22 = (f(x0 + e_a) + f(x0 - e_a) - 2 * f0) / h_a**2
    h12 = (
        f(x0 + e_mu + e_a) + f(x0 - e_mu - e_a) - f(x0 + e_mu - e_a) - f(x0 - e_mu + e_a)
    ) / (4 * h_mu * h_a)
    info = -np.array([[h11, h12], [h12, h22]])
    det = info[0, 0] * info[1, 1] - info[0, 1] ** 2
    if (
        not np.all(np.isfinite(info))
        or det <= 0
        or info[0, 0] <= 0
        or info[1, 1] <= 0
    ):
        cov = np.full((2, 2), math.inf)
        return FisherErrors(cov, math.inf, math.inf, True)
    cov = np.array([[info[1, 1], -info[0, 1]], [-info[0, 1], info[0, 0]]]) / det
    return FisherErrors(cov, math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1]), False)


def chi2_gof(samples, fit: FitResult) -> Chi2Result:
    """Equiprobable-bin goodness-of-fit test of a fitted model."""
    return chi2_gof_params(
        samples, fit.params, fit.eta, n_fitted=1 if fit.fixed_a is not None else 2
    )


def chi2_gof_params(
    samples, params: CompoundPoissonParams, eta: float, n_fitted: int = 2
) -> Chi2Result:
    """chi^2 test with B = clamp(n/20, 10, 100) bins equiprobable under the model.

    dof = B - 1 - n_fitted; requires >= 200 samples so every expected count
    stays well above 5.
    """
    q = np.asarray(samples, dtype=float)
    n = q.size
    if n < 200:
        raise InsufficientDataError(f"chi^2 test needs at least 200 samples, got {n}")
    n_bins = int(min(100, max(10, n // 20)))
    expected = n / n_bins
    if expected < 5.0:
        raise InsufficientDataError(
            f"expected bin count {expected:.2f} below 5; too few samples"
        )
    lo = min(-8.0, float(q.min()) - 1.0)
    hi = max(8.0, float(q.max()) + 1.0)
    grid = np.linspace(lo, hi, 4001)
    pdf = quadrature_pdf(params, eta, grid)
    cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(grid))])
    cdf /= cdf[-1]
    # Strictly increasing knots for interpolation of the inverse CDF.
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    quantiles = np.arange(1, n_bins) / n_bins
    edges = np.interp(quantiles, cdf[keep], grid[keep])
    observed = np.bincount(np.searchsorted(edges, q), minlength=n_bins).astype(float)
    statistic = float(np.sum((observed - expected) ** 2) / expected)
    dof = n_bins - 1 - n_fitted
    return Chi2Result(
        statistic=statistic, dof=dof, p_value=float(chi2_dist.sf(statistic, dof))
    )


def fidelity_diag(p, q) -> float:
    """Fidelity of two diagonal states: the squared Bhattacharyya overlap
    (sum_n sqrt(p_n q_n))^2 of their photon-number distributions."""
    p_arr = np.asarray(p, dtype=float)
    q_arr = np.asarray(q, dtype=float)
    if p_arr.shape != q_arr.shape or p_arr.ndim != 1:
        raise DomainError(
            f"pmf vectors must share one truncation, got shapes "
            f"{p_arr.shape} and {q_arr.shape}"
        )
    for name, vec in (("p", p_arr), ("q", q_arr)):
        if np.any(vec < 0):
            raise DomainError(f"pmf {name} has negative entries")
        if abs(vec.sum() - 1.0) > 1e-9:
            raise DomainError(f"pmf {name} must sum to 1 within 1e-9, got {vec.sum()!r}")
    overlap = float(np.sum(np.sqrt(p_arr * q_arr)))
    return min(max(overlap * overlap, 0.0), 1.0)


def compound_fidelity(
    first: CompoundPoissonParams, second: CompoundPoissonParams, tail: float = 1e-12
) -> float:
    """Fidelity between two compound-Poisson states on a shared truncation
    chosen so both neglected tails are below ``tail``."""
    s1 = CompoundPoissonState(first.mu, first.a)
    s2 = CompoundPoissonState(second.mu, second.a)
    n_max = max(s1.truncation(tail), s2.truncation(tail))
    p1 = s1.pmf(n_max)
    p2 = s2.pmf(n_max)
    overlap = float(np.sum(np.sqrt(p1 * p2)))
    return min(max(overlap * overlap, 0.0), 1.0)


def fit_conditional_dataset(
    dataset,
    eta: float,
    mu0: float | None = None,
    k_filter: int | None = None,
    min_samples: int = 100,
    data_seed: int | None = None,
) -> dict[int, FitResult]:
    """Fit every k-subtracted dataset (or one selected k) from a
    ConditionalDataset; underpopulated k groups are skipped with a warning.

    With mu0 given, each fit's fidelity against the predicted
    (mu0 (k+1), k+1) state is included.
    """
    available = sorted(dataset.samples)
    if k_filter is not None:
        if k_filter not in dataset.samples:
            raise DataError(
                f"k={k_filter} absent from dataset (available: {available})"
            )
        available = [k_filter]
    if data_seed is None and dataset.config is not None:
        data_seed = dataset.config.seed

    results: dict[int, FitResult] = {}
    for k in available:
        q = dataset.samples[k]
        if len(q) < min_samples:
            warnings.warn(
                f"skipping k={k}: only {len(q)} samples (< {min_samples})",
                stacklevel=2,
            )
            continue
        reference = subtracted_thermal_params(mu0, k) if mu0 else None
        results[k] = mle_fit(
            q, eta, reference=reference, data_seed=data_seed
        )
    return results
