"""Command-line pipelines: simulate -> fit -> report, with file-based I/O.

Every command is a pure function of (config, input files, seed): rerunning
with identical inputs produces byte-identical datasets and fit reports.  The
run manifest (which carries wall-clock timestamps) is the only non-reproducible
output, and it lists every written file with its SHA-256 digest.

Flag values resolve with precedence: command line > PHOTONSUB_* environment
variable > config file > built-in default.

Exit codes: 0 success, 2 configuration error, 3 I/O failure, 4 data error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, DomainError, EstimationError
from .genfunc import CompoundPoissonParams, subtracted_thermal_params
from .quadrature import moments_from_params, quadrature_pdf, wigner
from .reconstruct import FitResult, fit_conditional_dataset
from .simulator import CwExperimentConfig, extract_conditional_bins, simulate_cw

ENV_PREFIX = "PHOTONSUB_"


@dataclass
class RunManifest:
    """Audit record of one command invocation."""

    command: str
    argv: list[str]
    inputs: list[dict]
    seed: int | None
    started_at: str
    finished_at: str
    outputs: list[dict]
    version: str = __version__

    def write(self, path: Path) -> None:
        payload = {
            "command": self.command,
            "argv": self.argv,
            "inputs": self.inputs,
            "seed": self.seed,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "outputs": self.outputs,
            "version": self.version,
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def _env(name: str) -> str | None:
    return os.environ.get(ENV_PREFIX + name)


def _resolve(cli_value, env_name: str, cast, default=None):
    if cli_value is not None:
        return cli_value
    raw = _env(env_name)
    if raw is not None:
        try:
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"bad {ENV_PREFIX}{env_name} value {raw!r}: {exc}") from exc
    return default


def _file_entry(path: Path) -> dict:
    return {"path": path.name, "sha256": _sha256(path)}


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    config_path = Path(_resolve(args.config, "CONFIG", str))
    if config_path is None:
        raise ConfigError("simulate requires --config (or PHOTONSUB_CONFIG)")
    out_dir = Path(_resolve(args.out, "OUT", str, "."))
    started = _utcnow()

    try:
        raw = json.loads(config_path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {config_path} is not valid JSON: {exc}") from exc
    config = CwExperimentConfig.from_dict(raw)
    seed = _resolve(args.seed, "SEED", int)
    if seed is not None:
        config = replace(config, seed=seed)
    config.validate()

    out_dir.mkdir(parents=True, exist_ok=True)
    log = simulate_cw(config)
    dataset = extract_conditional_bins(log)

    events_path = out_dir / "events.jsonl"
    dataset_path = out_dir / "conditional.csv"
    summary_path = out_dir / "summary.json"
    log.to_jsonl(events_path)
    dataset.to_csv(dataset_path)
    summary = dataset.summary()
    summary["n_windows"] = log.n_windows
    summary["mean_signal_clicks_per_window"] = config.mean_signal_clicks_per_window
    _write_json(summary_path, summary)

    manifest = RunManifest(
        command="simulate",
        argv=sys.argv[1:],
        inputs=[{"path": str(config_path), "sha256": _sha256(config_path)}],
        seed=config.seed,
        started_at=started,
        finished_at=_utcnow(),
        outputs=[_file_entry(p) for p in (events_path, dataset_path, summary_path)],
    )
    manifest.write(out_dir / "manifest.json")
    print(f"simulate: {log.n_windows} windows -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

_REPORT_COLUMNS = ["k", "mu_hat", "a_hat", "sigma_mu", "sigma_a", "p_value", "fidelity"]


def _report_row(k: int, fit: FitResult) -> list:
    return [
        k,
        repr(fit.mu),
        repr(fit.a),
        repr(fit.std_mu),
        repr(fit.std_a),
        "" if fit.chi2 is None else repr(fit.chi2.p_value),
        "" if fit.fidelity is None else repr(fit.fidelity),
    ]


def cmd_fit(args) -> int:
    from .simulator import ConditionalDataset

    dataset_path = Path(args.dataset)
    out_dir = Path(_resolve(args.out, "OUT", str, "."))
    eta = _resolve(args.eta, "ETA", float)
    if eta is None:
        raise ConfigError("fit requires --eta (or PHOTONSUB_ETA)")
    if not 0.0 < eta <= 1.0:
        raise ConfigError(f"eta must lie in (0, 1], got {eta}")
    mu0 = _resolve(args.mu0, "MU0", float)
    k_filter = _resolve(args.k, "K", int)
    started = _utcnow()

    dataset = ConditionalDataset.from_csv(dataset_path)
    results = fit_conditional_dataset(dataset, eta, mu0=mu0, k_filter=k_filter)
    if not results:
        raise DataError("no k group had enough samples to fit")

    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for k, fit in sorted(results.items()):
        fit_path = out_dir / f"fit_k{k}.json"
        _write_json(fit_path, fit.to_json())
        outputs.append(fit_path)
    report_path = out_dir / "report.csv"
    with open(report_path, "w", newline="") as fh:
        writer = _csv_writer(fh)
        writer.writerow(_REPORT_COLUMNS)
        for k, fit in sorted(results.items()):
            writer.writerow(_report_row(k, fit))
    outputs.append(report_path)

    manifest = RunManifest(
        command="fit",
        argv=sys.argv[1:],
        inputs=[{"path": str(dataset_path), "sha256": _sha256(dataset_path)}],
        seed=None,
        started_at=started,
        finished_at=_utcnow(),
        outputs=[_file_entry(p) for p in outputs],
    )
    manifest.write(out_dir / "fit_manifest.json")
    print(f"fit: {len(results)} state(s) -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def _load_report(path: Path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            if not row.get("k"):
                continue
            rows.append(
                {
                    "k": int(row["k"]),
                    "mu_hat": float(row["mu_hat"]),
                    "a_hat": float(row["a_hat"]),
                    "sigma_mu": float(row["sigma_mu"]),
                    "sigma_a": float(row["sigma_a"]),
                    "p_value": float(row["p_value"]) if row.get("p_value") else None,
                    "fidelity": float(row["fidelity"]) if row.get("fidelity") else None,
                }
            )
    return rows


def cmd_report(args) -> int:
    fits_path = Path(args.fits)
    out_dir = Path(_resolve(args.out, "OUT", str, "."))
    mu0 = _resolve(args.mu0, "MU0", float)
    eta = _resolve(args.eta, "ETA", float, 1.0)
    started = _utcnow()

    rows = _load_report(fits_path)
    if not rows:
        raise DataError(f"no fit rows found in {fits_path}")
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []

    params_path = out_dir / "params_vs_k.csv"
    with open(params_path, "w", newline="") as fh:
        writer = _csv_writer(fh)
        writer.writerow(
            ["k", "mu_hat", "sigma_mu", "a_hat", "sigma_a", "mu_theory", "a_theory"]
        )
        for row in rows:
            k = row["k"]
            theory_mu = repr(mu0 * (k + 1)) if mu0 else ""
            writer.writerow(
                [
                    k,
                    repr(row["mu_hat"]),
                    repr(row["sigma_mu"]),
                    repr(row["a_hat"]),
                    repr(row["sigma_a"]),
                    theory_mu,
                    k + 1,
                ]
            )
    outputs.append(params_path)

    moments_path = out_dir / "moments_vs_k.csv"
    with open(moments_path, "w", newline="") as fh:
        writer = _csv_writer(fh)
        writer.writerow(
            ["k", "variance_fit", "kurtosis_fit", "variance_theory", "kurtosis_theory"]
        )
        for row in rows:
            k = row["k"]
            fit_moments = moments_from_params(
                CompoundPoissonParams(row["mu_hat"], row["a_hat"])
            )
            if mu0:
                theory = moments_from_params(subtracted_thermal_params(mu0, k))
                th_var, th_kurt = repr(theory.variance), repr(theory.kurtosis)
            else:
                th_var = th_kurt = ""
            writer.writerow(
                [k, repr(fit_moments.variance), repr(fit_moments.kurtosis), th_var, th_kurt]
            )
    outputs.append(moments_path)

    dataset = None
    if args.dataset:
        from .simulator import ConditionalDataset

        dataset = ConditionalDataset.from_csv(Path(args.dataset))

    for row in rows:
        k = row["k"]
        fit_params = CompoundPoissonParams(row["mu_hat"], row["a_hat"])
        theory_params = subtracted_thermal_params(mu0, k) if mu0 else None

        pdf_path = out_dir / f"pdf_k{k}.csv"
        with open(pdf_path, "w", newline="") as fh:
            writer = _csv_writer(fh)
            header = ["q_lo", "q_hi", "pdf_fit"]
            if theory_params:
                header.append("pdf_theory")
            samples = None
            if dataset is not None and k in dataset.samples:
                samples = dataset.samples[k]
                header += ["hist_count", "hist_density"]
            writer.writerow(header)
            span = 4.0 * (fit_params.mu * eta + 0.5) ** 0.5
            edges = np.linspace(-span, span, 81)
            centers = 0.5 * (edges[:-1] + edges[1:])
            width = edges[1] - edges[0]
            pdf_fit = quadrature_pdf(fit_params, eta, centers)
            pdf_th = (
                quadrature_pdf(theory_params, eta, centers) if theory_params else None
            )
            hist = (
                np.histogram(samples, bins=edges)[0] if samples is not None else None
            )
            for i, center in enumerate(centers):
                entry = [
                    repr(float(edges[i])),
                    repr(float(edges[i + 1])),
                    repr(float(pdf_fit[i])),
                ]
                if pdf_th is not None:
                    entry.append(repr(float(pdf_th[i])))
                if hist is not None:
                    density = hist[i] / (len(samples) * width)
                    entry += [int(hist[i]), repr(float(density))]
                writer.writerow(entry)
        outputs.append(pdf_path)

        wig_path = out_dir / f"wigner_k{k}.csv"
        with open(wig_path, "w", newline="") as fh:
            writer = _csv_writer(fh)
            header = ["r", "wigner_fit"]
            if theory_params:
                header.append("wigner_theory")
            writer.writerow(header)
            r_max = 2.5 * (2.0 * fit_params.mu + 1.0) ** 0.5
            radii = np.linspace(0.0, r_max, 201)
            w_fit = wigner(fit_params, radii, 0.0)
            w_th = wigner(theory_params, radii, 0.0) if theory_params else None
            for i, r in enumerate(radii):
                entry = [repr(float(r)), repr(float(w_fit[i]))]
                if w_th is not None:
                    entry.append(repr(float(w_th[i])))
                writer.writerow(entry)
        outputs.append(wig_path)

    manifest = RunManifest(
        command="report",
        argv=sys.argv[1:],
        inputs=[{"path": str(fits_path), "sha256": _sha256(fits_path)}],
        seed=None,
        started_at=started,
        finished_at=_utcnow(),
        outputs=[_file_entry(p) for p in outputs],
    )
    manifest.write(out_dir / "report_manifest.json")
    print(f"report: {len(rows)} row(s) -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photonsub",
        description="Photon-subtracted thermal states: simulation and reconstruction",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run the cw time-domain simulation")
    p_sim.add_argument("--config", help="JSON experiment configuration")
    p_sim.add_argument("--seed", type=int, help="override the config seed")
    p_sim.add_argument("--out", help="output directory (default .)")
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit conditional quadrature data")
    p_fit.add_argument("--dataset", required=True, help="conditional.csv from simulate")
    p_fit.add_argument("--eta", type=float, help="detection efficiency in (0, 1]")
    p_fit.add_argument("--k", type=int, help="fit only this subtraction number")
    p_fit.add_argument("--mu0", type=float, help="initial thermal mean photon number")
    p_fit.add_argument("--out", help="output directory (default .)")
    p_fit.set_defaults(func=cmd_fit)

    p_rep = sub.add_parser("report", help="emit plot-ready CSV grids from fit rows")
    p_rep.add_argument("--fits", required=True, help="report.csv from fit")
    p_rep.add_argument("--mu0", type=float, help="theory curves use this mu0")
    p_rep.add_argument("--eta", type=float, help="efficiency for pdf overlays")
    p_rep.add_argument("--dataset", help="conditional.csv for histogram overlays")
    p_rep.add_argument("--out", help="output directory (default .)")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except (DataError, EstimationError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
