"""Quadrature data synthesis: direct sampling and a cw time-domain simulation.

Every state in scope is a classical mixture of coherent states, so a
stochastic complex field plus vacuum noise of variance 1/2 reproduces the
exact quantum homodyne statistics (semiclassical P-representation sampling).

Direct sampler.  The compound-Poisson state (mu, a) is a Poisson mixture over
a Gamma intensity, so a quadrature sample is
q = sqrt(2 eta I) cos(theta) + N(0, 1/2) with I ~ Gamma(a, mu/a) and theta
uniform.

Time-domain simulation.  A pseudo-thermal source is modeled as a complex
Ornstein-Uhlenbeck field alpha(t) with correlation time tau_coh, stepped with
the exact discrete update (no Euler bias).  Each acquisition window of width
tau_a on a periodic grid yields one quadrature through a flat-top mode
integral; a tap beam splitter drives an APD whose clicks (plus dark counts,
minus dead-time losses) give the window's subtraction count k.  Window
records with exactly k clicks are the k-photon-subtracted conditional data.

Heralding couplings.  ``herald_mode="windowed"`` (default) drives the click
rate with the intensity of the measured flat-top mode itself, which makes the
exact-k conditional states exactly compound-Poisson with a = k+1 and
mu = mu0 (k+1).  ``herald_mode="instantaneous"`` drives clicks with the
instantaneous field intensity |alpha(t)|^2; at finite tau_a/tau_coh part of
each click then heralds field components orthogonal to the measured mode, so
the conditional states pick up a small admixture of lower-k states (a real
mode-mismatch effect, kept for comparison studies).

Calibration.  Selecting windows with exactly k clicks conditions on "no
further clicks", which deflates the intensity scale of every conditional
state by the same factor 1 + m (m = mean signal clicks per window).  The
field amplitude is therefore calibrated so that the *zero-click conditional*
mode carries mean photon number mu0 -- matching how the initial thermal state
is defined operationally, via its reconstructed k = 0 data.  The absolute
click rate is not determined by mu0; it is the ``tap_flux`` knob
(auto-chosen so that m = 2 by default, which populates k = 0..5 well).
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import MISSING, asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, DataError, DomainError
from .genfunc import CompoundPoissonParams

DEFAULT_MEAN_CLICKS_PER_WINDOW = 2.0

# Windows per simulation chunk are sized for ~tens of MB of field samples;
# fixed so that a given config always consumes the RNG stream identically.
_CHUNK_TARGET_STEPS = 4_000_000


class CorrelatedBinsWarning(UserWarning):
    """Selected bins are closer than 2 tau_coh; chi^2 assumptions degrade."""


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_quadratures_direct(
    params: CompoundPoissonParams, eta: float, n: int, seed=None
) -> np.ndarray:
    """Draw n i.i.d. homodyne quadratures of the (mu, a) state at efficiency eta.

    Exact Gamma-mixture construction: I ~ Gamma(a, mu/a), theta ~ U(0, 2 pi),
    q = sqrt(2 eta I) cos(theta) + N(0, 1/2).  Deterministic given a seed.
    """
    if n < 1 or n != int(n):
        raise DomainError(f"sample count must be a positive integer, got n={n}")
    if not (0.0 < eta <= 1.0):
        raise DomainError(f"eta must lie in (0, 1], got eta={eta}")
    rng = _as_rng(seed)
    n = int(n)
    if params.mu == 0.0:
        intensity = np.zeros(n)
    else:
        intensity = rng.gamma(shape=params.a, scale=params.mu / params.a, size=n)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    vacuum = rng.normal(0.0, math.sqrt(0.5), size=n)
    return np.sqrt(2.0 * eta * intensity) * np.cos(theta) + vacuum


def sample_photon_numbers(params: CompoundPoissonParams, n: int, seed=None) -> np.ndarray:
    """Draw n photon numbers from the compound-Poisson pmf (Gamma-Poisson mixture)."""
    if n < 1 or n != int(n):
        raise DomainError(f"sample count must be a positive integer, got n={n}")
    rng = _as_rng(seed)
    n = int(n)
    if params.mu == 0.0:
        return np.zeros(n, dtype=np.int64)
    intensity = rng.gamma(shape=params.a, scale=params.mu / params.a, size=n)
    return rng.poisson(intensity)


def complex_ou_path(
    tau: float, dt: float, n_steps: int, rng: np.random.Generator, x0=None
) -> np.ndarray:
    """Unit-variance complex Ornstein-Uhlenbeck path with correlation time tau.

    Exact discrete update x_{i+1} = rho x_i + w_i, rho = exp(-dt/tau), so the
    stationary statistics are independent of dt.  E[x*(t) x(t+s)] = e^(-|s|/tau).
    """
    if tau <= 0.0 or dt <= 0.0 or n_steps < 1:
        raise DomainError("tau, dt must be positive and n_steps >= 1")
    rho = math.exp(-dt / tau)
    if x0 is None:
        x0 = complex(rng.normal(0.0, math.sqrt(0.5)), rng.normal(0.0, math.sqrt(0.5)))
    sigma_w = math.sqrt((1.0 - rho * rho) / 2.0)
    w = rng.normal(0.0, sigma_w, size=n_steps) + 1j * rng.normal(0.0, sigma_w, size=n_steps)
    path, _ = lfilter([1.0], [1.0, -rho], w, zi=np.array([rho * x0]))
    return path


@dataclass(frozen=True)
class CwExperimentConfig:
    """Parameters of the time-domain cw photon-subtraction simulation.

    Times in seconds, rates in Hz.  ``tap_flux`` (photons/s incident on the
    tap beam splitter) sets the absolute click rate; ``None`` auto-selects a
    flux giving DEFAULT_MEAN_CLICKS_PER_WINDOW mean signal clicks per window.
    """

    tau_coh: float
    tau_a: float
    reflectivity: float
    dead_time: float
    dark_rate: float
    eta: float
    mu0: float
    duration: float
    dt: float
    seed: int = 0
    tap_flux: float | None = None
    herald_mode: str = "windowed"
    window_period: float | None = None

    def validate(self) -> None:
        """Raise ConfigError naming the first violated invariant."""
        for name in ("tau_coh", "tau_a", "duration", "dt"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a positive time, got {value!r}")
        if self.dead_time < 0 or not math.isfinite(self.dead_time):
            raise ConfigError(f"dead_time must be nonnegative, got {self.dead_time!r}")
        if self.dark_rate < 0 or not math.isfinite(self.dark_rate):
            raise ConfigError(f"dark_rate must be nonnegative, got {self.dark_rate!r}")
        if not (0.0 <= self.reflectivity < 1.0):
            raise ConfigError(
                f"reflectivity must satisfy 0 <= r < 1, got {self.reflectivity!r}"
            )
        if not (0.0 < self.eta <= 1.0):
            raise ConfigError(f"eta must lie in (0, 1], got {self.eta!r}")
        if self.mu0 < 0 or not math.isfinite(self.mu0):
            raise ConfigError(f"mu0 must be nonnegative, got {self.mu0!r}")
        if not self.tau_a < self.tau_coh:
            raise ConfigError(
                f"tau_a must be smaller than tau_coh, got tau_a={self.tau_a!r} "
                f">= tau_coh={self.tau_coh!r}"
            )
        if not self.dt < self.tau_a / 20.0:
            raise ConfigError(
                f"dt must resolve the window: dt < tau_a/20, got dt={self.dt!r}"
            )
        if not self.dead_time < self.tau_a:
            raise ConfigError(
                f"dead_time must be smaller than tau_a, got {self.dead_time!r}"
            )
        if self.duration < self.tau_a:
            raise ConfigError(
                f"duration must cover at least one window, got {self.duration!r}"
            )
        if self.tap_flux is not None and not (
            math.isfinite(self.tap_flux) and self.tap_flux >= 0
        ):
            raise ConfigError(f"tap_flux must be nonnegative, got {self.tap_flux!r}")
        if self.herald_mode not in ("windowed", "instantaneous"):
            raise ConfigError(
                f"herald_mode must be 'windowed' or 'instantaneous', "
                f"got {self.herald_mode!r}"
            )
        if self.window_period is not None and self.window_period < self.tau_a:
            raise ConfigError(
                f"window_period must be >= tau_a, got {self.window_period!r}"
            )
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")

    @property
    def resolved_window_period(self) -> float:
        return 2.0 * self.tau_coh if self.window_period is None else self.window_period

    @property
    def resolved_tap_flux(self) -> float:
        if self.tap_flux is not None:
            return self.tap_flux
        if self.reflectivity <= 0.0:
            return 0.0
        return DEFAULT_MEAN_CLICKS_PER_WINDOW / (self.reflectivity * self.tau_a)

    @property
    def mean_signal_clicks_per_window(self) -> float:
        """Diagnostic: expected tap clicks per window, excluding dark counts."""
        return self.reflectivity * self.resolved_tap_flux * self.tau_a

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "CwExperimentConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        missing = {
            name
            for name, f in cls.__dataclass_fields__.items()
            if f.default is MISSING and name not in obj
        }
        if missing:
            raise ConfigError(f"missing config field(s): {sorted(missing)}")
        return cls(**obj)


@dataclass
class CwEventLog:
    """Raw per-window output of :func:`simulate_cw`.

    Click times are stored flat with CSR-style offsets: window j owns
    ``click_times[click_offsets[j]:click_offsets[j+1]]``.
    """

    window_start: np.ndarray
    quadrature: np.ndarray
    click_count: np.ndarray
    click_times: np.ndarray
    click_offsets: np.ndarray
    config: CwExperimentConfig
    tau_a_eff: float
    period_eff: float

    @property
    def n_windows(self) -> int:
        return len(self.window_start)

    def clicks_in_window(self, j: int) -> np.ndarray:
        return self.click_times[self.click_offsets[j] : self.click_offsets[j + 1]]

    def to_jsonl(self, path: str | Path) -> None:
        """One JSON record per window: start time, q, clicks, click timestamps."""
        with open(path, "w") as fh:
            for j in range(self.n_windows):
                rec = {
                    "start": self.window_start[j],
                    "q": self.quadrature[j],
                    "clicks": int(self.click_count[j]),
                    "click_times": self.clicks_in_window(j).tolist(),
                }
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def from_jsonl(cls, path: str | Path, config: CwExperimentConfig) -> "CwEventLog":
        starts, quads, counts, times = [], [], [], []
        with open(path) as fh:
            for line in fh:
                rec = json.loads(line)
                starts.append(rec["start"])
                quads.append(rec["q"])
                counts.append(rec["clicks"])
                times.extend(rec["click_times"])
        counts = np.asarray(counts, dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        n_a = max(1, round(config.tau_a / config.dt))
        n_p = max(n_a, round(config.resolved_window_period / config.dt))
        period_eff = n_p * config.dt
        if len(starts) > 1:
            period_eff = float(starts[1] - starts[0])
        return cls(
            window_start=np.asarray(starts, dtype=float),
            quadrature=np.asarray(quads, dtype=float),
            click_count=counts,
            click_times=np.asarray(times, dtype=float),
            click_offsets=offsets,
            config=config,
            tau_a_eff=n_a * config.dt,
            period_eff=period_eff,
        )


def _window_sum_norm(n_a: int, rho: float) -> float:
    """E|sum_{i<n_a} x_i|^2 for the unit-variance discrete OU sequence."""
    d = np.arange(1, n_a)
    return n_a + 2.0 * float(np.sum((n_a - d) * rho**d))


def _thin_dead_time(times: np.ndarray, dead: float) -> np.ndarray:
    """Non-paralyzable dead time: drop clicks within ``dead`` of the last kept one."""
    if dead <= 0.0 or len(times) < 2:
        return times
    if np.all(np.diff(times) >= dead):
        return times
    kept = [times[0]]
    last = times[0]
    for t in times[1:]:
        if t - last >= dead:
            kept.append(t)
            last = t
    return np.asarray(kept)


def simulate_cw(config: CwExperimentConfig) -> CwEventLog:
    """Run the time-domain cw simulation; returns the per-window event log.

    The field is sampled at dt resolution inside acquisition windows; the
    inter-window gaps are crossed with a single exact OU transition (the
    process is Markov, so collapsing the gap is identical in law and spares
    most of the integration work).  Deterministic for a given config: all
    draws come from one PCG64 stream in a fixed chunked order.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)

    n_a = round(config.tau_a / config.dt)
    n_p = max(n_a, round(config.resolved_window_period / config.dt))
    tau_a_eff = n_a * config.dt
    period_eff = n_p * config.dt
    n_windows = int((config.duration - tau_a_eff) / period_eff + 1e-9) + 1
    if n_windows < 1:
        raise ConfigError("duration too short for a single acquisition window")

    rho = math.exp(-config.dt / config.tau_coh)
    beta_norm = math.sqrt(_window_sum_norm(n_a, rho))
    sigma_w = math.sqrt((1.0 - rho * rho) / 2.0)
    # Gap from the last in-window sample to the next window start.
    rho_gap = math.exp(-(n_p - n_a + 1) * config.dt / config.tau_coh)
    sigma_gap = math.sqrt((1.0 - rho_gap * rho_gap) / 2.0)
    rho_win = rho ** (n_a - 1)
    decay = rho ** np.arange(n_a)

    m_clicks = config.reflectivity * config.resolved_tap_flux * tau_a_eff
    dark_per_window = config.dark_rate * tau_a_eff
    # Exact-k selection conditions on "no extra click", deflating every
    # conditional intensity by 1 + m; calibrate so the k = 0 mode sits at mu0.
    amp = math.sqrt(config.mu0 * (1.0 + m_clicks))
    q_scale = math.sqrt(2.0 * config.eta) * amp

    windows_per_chunk = max(1, _CHUNK_TARGET_STEPS // (n_a + 1))
    all_q = np.empty(n_windows)
    all_counts = np.empty(n_windows, dtype=np.int64)
    click_chunks: list[np.ndarray] = []

    end_carry = None  # field value at the last sample of the previous chunk
    xi_carry = 0.0j
    done = 0
    while done < n_windows:
        n_win = min(windows_per_chunk, n_windows - done)
        # Within-window innovations (windows start "at rest"; the start value
        # is added below), then one exact bridge noise per following gap.
        w_mat = rng.normal(0.0, sigma_w, size=(n_win, n_a - 1)) + 1j * rng.normal(
            0.0, sigma_w, size=(n_win, n_a - 1)
        )
        innov = lfilter([1.0], [1.0, -rho], w_mat, axis=1)
        c_last = innov[:, -1]
        xi = rng.normal(0.0, sigma_gap, size=n_win) + 1j * rng.normal(
            0.0, sigma_gap, size=n_win
        )

        # Chain of window-start values: s_w = rho_c s_{w-1} + u_w with
        # rho_c = exp(-period/tau) and u_w folding in the previous window's
        # end innovation plus the gap transition noise.
        u = np.empty(n_win, dtype=complex)
        if end_carry is None:
            u[0] = complex(
                rng.normal(0.0, math.sqrt(0.5)), rng.normal(0.0, math.sqrt(0.5))
            )
        else:
            u[0] = rho_gap * end_carry + xi_carry
        u[1:] = rho_gap * c_last[:-1] + xi[:-1]
        rho_c = rho_gap * rho_win
        starts_val = lfilter([1.0], [1.0, -rho_c], u)

        alpha = decay[None, :] * starts_val[:, None]
        alpha[:, 1:] += innov
        end_carry = alpha[-1, -1]
        xi_carry = xi[-1]

        beta_hat = alpha.sum(axis=1) / beta_norm
        starts = (done + np.arange(n_win)) * period_eff
        vacuum = rng.normal(0.0, math.sqrt(0.5), size=n_win)
        all_q[done : done + n_win] = q_scale * beta_hat.real + vacuum

        if config.herald_mode == "windowed":
            lam = m_clicks * (beta_hat.real**2 + beta_hat.imag**2) + dark_per_window
            counts = rng.poisson(lam)
            total = int(counts.sum())
            owner = np.repeat(np.arange(n_win), counts)
            offsets_in_window = rng.uniform(0.0, tau_a_eff, size=total)
            times = starts[owner] + offsets_in_window
        else:
            intensity = np.abs(alpha) ** 2
            lam_step = (
                m_clicks / tau_a_eff * intensity + config.dark_rate
            ) * config.dt
            step_counts = rng.poisson(lam_step)
            win_idx, step_idx = np.nonzero(step_counts)
            reps = step_counts[win_idx, step_idx]
            owner = np.repeat(win_idx, reps)
            step_of_click = np.repeat(step_idx, reps)
            total = len(owner)
            jitter = rng.uniform(0.0, config.dt, size=total)
            times = starts[owner] + step_of_click * config.dt + jitter
            counts = np.bincount(owner, minlength=n_win)

        order = np.lexsort((times, owner))
        times = times[order]
        boundaries = np.concatenate([[0], np.cumsum(counts)])
        if config.dead_time > 0.0 and total:
            kept_per_window = []
            kept_counts = counts.copy()
            for j in range(n_win):
                lo, hi = boundaries[j], boundaries[j + 1]
                if hi - lo < 2:
                    kept_per_window.append(times[lo:hi])
                    continue
                kept = _thin_dead_time(times[lo:hi], config.dead_time)
                kept_per_window.append(kept)
                kept_counts[j] = len(kept)
            times = np.concatenate(kept_per_window)
            counts = kept_counts
        all_counts[done : done + n_win] = counts
        click_chunks.append(times)
        done += n_win

    click_times = (
        np.concatenate(click_chunks) if click_chunks else np.empty(0)
    )
    click_offsets = np.concatenate([[0], np.cumsum(all_counts)])
    return CwEventLog(
        window_start=np.arange(n_windows) * period_eff,
        quadrature=all_q,
        click_count=all_counts,
        click_times=click_times,
        click_offsets=click_offsets,
        config=config,
        tau_a_eff=tau_a_eff,
        period_eff=period_eff,
    )


@dataclass
class ConditionalDataset:
    """Quadrature samples grouped by exact in-window click count k."""

    samples: dict[int, np.ndarray]
    spacing: float
    n_candidates: int
    config: CwExperimentConfig | None = None

    @property
    def counts(self) -> dict[int, int]:
        return {k: len(v) for k, v in sorted(self.samples.items())}

    def to_csv(self, path: str | Path) -> None:
        """Rows (k, q), ordered by k then acquisition order."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["k", "q"])
            for k in sorted(self.samples):
                for q in self.samples[k]:
                    writer.writerow([k, repr(float(q))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "ConditionalDataset":
        groups: dict[int, list[float]] = {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["k", "q"]:
                raise DataError(f"{path}: expected CSV header 'k,q'")
            for row in reader:
                if not row:
                    continue
                groups.setdefault(int(row[0]), []).append(float(row[1]))
        samples = {k: np.asarray(v) for k, v in groups.items()}
        n = int(sum(len(v) for v in samples.values()))
        return cls(samples=samples, spacing=float("nan"), n_candidates=n)

    def summary(self) -> dict:
        out = {
            "counts_per_k": {str(k): v for k, v in self.counts.items()},
            "n_candidates": self.n_candidates,
            "spacing": self.spacing,
        }
        if self.config is not None:
            out["config"] = self.config.to_dict()
        return out


def extract_conditional_bins(
    log: CwEventLog, spacing: float | None = None
) -> ConditionalDataset:
    """Select windows on a periodic grid and group quadratures by click count.

    ``spacing`` defaults to 2 tau_coh (statistically independent bins).  A
    requested or effective spacing below 2 tau_coh emits
    CorrelatedBinsWarning instead of failing: the data remain usable, but
    chi^2 independence assumptions no longer hold.
    """
    if spacing is None:
        spacing = 2.0 * log.config.tau_coh
    if spacing <= 0:
        raise DomainError(f"spacing must be positive, got {spacing}")
    stride = max(1, math.ceil(spacing / log.period_eff - 1e-9))
    effective = stride * log.period_eff
    if min(spacing, effective) < 2.0 * log.config.tau_coh - 1e-12:
        warnings.warn(
            f"bin spacing {min(spacing, effective):.3g} s is below 2*tau_coh = "
            f"{2.0 * log.config.tau_coh:.3g} s; selected bins are correlated "
            f"(effective spacing {effective:.3g} s)",
            CorrelatedBinsWarning,
            stacklevel=2,
        )
    sel = np.arange(0, log.n_windows, stride)
    counts = log.click_count[sel]
    quads = log.quadrature[sel]
    samples = {
        int(k): quads[counts == k] for k in np.unique(counts)
    }
    return ConditionalDataset(
        samples=samples,
        spacing=effective,
        n_candidates=len(sel),
        config=log.config,
    )
