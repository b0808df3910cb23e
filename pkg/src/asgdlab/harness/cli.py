"""Command-line entry point: ``asgdlab <kind> [--config PATH] [--seed N] [--out DIR]``.

Every run writes ``report.json`` plus ``series_*.csv`` (or ``.json``) into
the output directory.  Reports carry no timestamps or paths, so a rerun with
the same configuration and seed reproduces them byte for byte.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .. import __version__
from ..asgd import asgd_to_sme_state, run_asgd, run_ensemble
from ..ensemble import write_table_csv
from ..errors import ConfigError, DomainError
from ..hypo import hypo_report
from ..kfp import HermiteField, assemble_generator, compute_steady_state, evolve, random_field
from ..kfp.solver import default_certificate
from ..loss import GradientOracle, perturbation_bounds
from ..params import (Params, derive_params, lr_threshold, per_step_exponent, speedup_predicate,
                      theorem_rate)
from ..sme import (SmeState, default_dt, ou_moment_oracle, phase_map_matrix, run_sme_ensemble)
from ..staleness import StalenessModel, sample_staleness, staleness_stats
from .._rng import path_generator
from .config import KINDS, SCHEMA_VERSION, ExperimentConfig, load_config, parse_config, with_overrides
from .experiments import compare_asgd_sme, speedup_experiment, threshold_sweep
from .rates import fit_rate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


@dataclass
class RunOutput:
    results: dict
    series: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    blobs: dict[str, object] = field(default_factory=dict)   # extra JSON files, written only in json format


def _clean(x):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to ``None``."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


# --------------------------------------------------------------------------
# runners


def _params(cfg: ExperimentConfig) -> Params:
    return Params(**cfg.params.model_dump())


def _oracle(cfg: ExperimentConfig) -> GradientOracle:
    return GradientOracle(omega0=cfg.params.omega0, amplitude=cfg.loss.amplitude,
                          sigma_grad=cfg.params.sigma_grad)


def _staleness(cfg: ExperimentConfig) -> StalenessModel:
    s = cfg.staleness
    if s.variant == "geometric":
        return StalenessModel.geometric(cfg.params.kappa)
    if s.variant == "fixed":
        return StalenessModel.fixed(s.lag)
    return StalenessModel.worker_queue(cfg.params.m, s.service, s.service_mean)


def run_analyze(cfg: ExperimentConfig) -> RunOutput:
    p = _params(cfg)
    der = derive_params(p)
    oracle = _oracle(cfg)
    bounds = perturbation_bounds(oracle, der.gamma, d=p.d)
    rep = hypo_report(der.gamma, p.omega0, der.beta, eps0=bounds.eps0)
    results = {
        "derived": {"gamma": der.gamma, "tau_noise": der.tau_noise, "dt_map": der.dt_map,
                    "beta": der.beta, "beta_closed_form": der.beta_closed_form},
        **rep.as_dict(),
        "lr_threshold": lr_threshold(p.kappa, p.omega0),
        "per_step_exponent": per_step_exponent(p.eta, p.kappa, p.omega0),
        "speedup_predicate": speedup_predicate(p.m, p.kappa),
        "staleness": {"pmf_mean": p.kappa / (1.0 - p.kappa),
                      "expected_staleness": 1.0 / (1.0 - p.kappa)},
        "perturbation_bounds": bounds.as_dict(),
    }
    return RunOutput(results)


def run_sample_staleness(cfg: ExperimentConfig, seed: int) -> RunOutput:
    model = _staleness(cfg)
    trace = sample_staleness(model, path_generator(seed, 0, 1), size=cfg.numerics.samples)
    st = staleness_stats(trace)
    results = {"model": {"variant": model.variant, "kappa": model.kappa, "lag": model.lag,
                         "m": model.m, "service": model.service,
                         "service_mean": model.service_mean},
               "stats": st.as_dict()}
    rows = [[k, int(t)] for k, t in enumerate(trace)]
    return RunOutput(results, {"staleness": (["k", "tau"], rows)})


def _oracle_check(cfg, p, der, oracle, moments) -> Optional[dict]:
    if cfg.loss.amplitude != 0:
        return None
    th0, y0 = asgd_to_sme_state(np.full(p.d, cfg.numerics.theta0), p, oracle)
    ref = ou_moment_oracle(np.concatenate([th0, y0]), None, float(moments.times[-1]),
                           der.gamma, p.omega0, der.tau_noise)
    diff = moments.mean[-1] - ref.mean
    se = moments.std_error[-1]
    return {"t": float(moments.times[-1]), "mean": ref.mean, "cov": ref.cov,
            "mean_error": float(np.linalg.norm(diff)),
            "z_scores": np.where(se > 0, diff / np.where(se > 0, se, 1.0), 0.0)}


def run_sim_asgd(cfg: ExperimentConfig, seed: int) -> RunOutput:
    p = _params(cfg)
    der = derive_params(p)
    oracle = _oracle(cfg)
    model = _staleness(cfg)
    n = cfg.numerics
    if n.ensemble == 1:
        traj = run_asgd(p, oracle, model, n.steps, seed, theta0=n.theta0)
        st = staleness_stats(traj.tau) if len(traj.tau) else None
        results = {"final_theta": traj.theta[-1], "final_y": traj.y[-1],
                   "t_final": float(traj.times[-1]),
                   "staleness": st.as_dict() if st else None}
        return RunOutput(results, {"trajectory": traj.table()})
    ens = run_ensemble(p, oracle, model, n.steps, n.ensemble, seed, theta0=n.theta0,
                       n_records=n.n_records)
    results = {"ensemble": n.ensemble, "t_final": float(ens.times[-1]),
               "final_mean": ens.mean[-1], "final_cov": ens.cov[-1],
               "final_std_error": ens.std_error[-1],
               "oracle": _oracle_check(cfg, p, der, oracle, ens)}
    return RunOutput(results, {"moments": ens.table()})


def run_sim_sme(cfg: ExperimentConfig, seed: int) -> RunOutput:
    p = _params(cfg)
    der = derive_params(p)
    oracle = _oracle(cfg)
    n = cfg.numerics
    th0, y0 = asgd_to_sme_state(np.full(p.d, n.theta0), p, oracle)
    dt = n.dt or default_dt(der)
    ens = run_sme_ensemble(SmeState(th0, y0), n.T, dt, max(n.ensemble, 2), der, oracle, seed,
                           n_records=n.n_records)
    J = phase_map_matrix(der.gamma, p.omega0, p.d)
    phase_cov = J @ ens.cov[-1] @ J.T
    results = {"ensemble": max(n.ensemble, 2), "dt": dt, "t_final": float(ens.times[-1]),
               "final_mean": ens.mean[-1], "final_cov": ens.cov[-1],
               "final_std_error": ens.std_error[-1],
               "phase_cov": phase_cov,
               "oracle": _oracle_check(cfg, p, der, oracle, ens)}
    if der.tau_noise > 0:
        var_x = 1.0 / (der.beta * p.omega0**2)
        var_v = 1.0 / der.beta
        results["stationary_reference"] = {
            "var_x": var_x, "var_v": var_v,
            "ratio_x": float(np.mean(np.diag(phase_cov)[:p.d]) / var_x),
            "ratio_v": float(np.mean(np.diag(phase_cov)[p.d:]) / var_v)}
    return RunOutput(results, {"moments": ens.table()})


def run_solve_pde(cfg: ExperimentConfig) -> RunOutput:
    pde = cfg.pde
    p = _params(cfg)
    if p.d != 1:
        raise DomainError("the phase-space solver is one-dimensional; set params.d = 1")
    der = derive_params(p)
    gamma = pde.gamma or der.gamma
    beta = pde.beta or der.beta
    oracle = GradientOracle(omega0=p.omega0, amplitude=cfg.loss.amplitude)
    gen = assemble_generator(pde.basis_degree, gamma, beta, p.omega0, oracle)
    if pde.init == "random":
        h0 = random_field(gen.measure, gen.N, np.random.default_rng(pde.init_seed))
    else:
        h0 = HermiteField.from_function(lambda x, v: x + v, gen.measure, gen.N)
    C, C_hat = default_certificate(gamma, p.omega0)
    series = evolve(h0, gen, pde.T, method=pde.method, n_out=pde.n_out, C=C, C_hat=C_hat)
    rate = theorem_rate(gamma, p.omega0)
    fit = fit_rate(series.times, series.norm_sq, (pde.fit_from * pde.T, pde.T))
    mu_cert = rate.mu_matrix if rate.regime != "critical" else 0.9 * rate.mu_matrix
    step = np.diff(series.times)
    gronwall = series.H[1:] / (series.H[:-1] * np.exp(-2.0 * mu_cert * step))
    ss = compute_steady_state(gen)
    results = {
        "generator": gen.metadata(),
        "regime": rate.regime,
        "mu_matrix": rate.mu_matrix,
        "mu_thm": rate.mu_thm,
        "spectral_abscissa": gen.spectral_abscissa(),
        "C": C, "C_hat": C_hat,
        "norm_fit": fit.as_dict(),
        "ratio_to_2mu_matrix": fit.rate / (2.0 * rate.mu_matrix),
        "ratio_to_2mu_thm": fit.rate / (2.0 * rate.mu_thm) if math.isfinite(rate.mu_thm) else None,
        "gronwall_max_ratio": float(np.max(gronwall)) if oracle.amplitude == 0 else None,
        "max_abs_transport_self": float(np.max(np.abs(series.transport_self))),
        "steady_state": {"residual": ss.residual, "sigma_min": float(ss.singular_values[0]),
                         "sigma_next": float(ss.singular_values[1])},
    }
    blobs = {"kfp_snapshots": {"times": series.times, "coeffs": series.coeffs}}
    return RunOutput(results, {"kfp": series.table()}, blobs)


def run_fit_rate(cfg: ExperimentConfig) -> RunOutput:
    f = cfg.fit
    if f.input is None:
        raise ConfigError("fit-rate needs fit.input (a CSV path)")
    path = Path(f.input)
    if not path.is_file():
        raise ConfigError(f"fit input not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    try:
        t = np.array([float(r[f.time_column]) for r in rows])
        y = np.array([float(r[f.column]) for r in rows])
    except KeyError as exc:
        raise ConfigError(f"column {exc} missing from {path}") from exc
    lo = f.t_lo if f.t_lo is not None else float(t.min())
    hi = f.t_hi if f.t_hi is not None else float(t.max())
    return RunOutput({"fit": fit_rate(t, y, (lo, hi)).as_dict(), "column": f.column})


def run_sweep(cfg: ExperimentConfig) -> RunOutput:
    s = cfg.sweep
    rep = threshold_sweep(cfg.params.kappa, cfg.params.omega0, s.eta_factors, s.kappas,
                          s.kappa_eta_factor, max_workers=cfg.numerics.max_workers)
    d = rep.as_dict()
    header = list(d["rows"][0].keys())
    return RunOutput(d, {"threshold": (header, [[r[k] for k in header] for r in d["rows"]])})


def run_speedup(cfg: ExperimentConfig, seed: int) -> RunOutput:
    s = cfg.speedup
    rep = speedup_experiment(s.workers, s.kappas, s.eta, cfg.params.omega0, s.sigma_grad,
                             cfg.numerics.theta0, s.target, s.ensemble, seed,
                             s.boundary_margin, s.include_discrete, s.discrete_ensemble,
                             max_workers=cfg.numerics.max_workers)
    d = rep.as_dict()
    header = list(d["cells"][0].keys())
    return RunOutput(d, {"speedup": (header, [[c[k] for k in header] for c in d["cells"]])})


def run_compare(cfg: ExperimentConfig, seed: int) -> RunOutput:
    c = cfg.compare
    p = cfg.params
    model = _staleness(cfg) if cfg.staleness.variant != "geometric" else None
    rep = compare_asgd_sme(c.etas, p.kappa, p.omega0, p.sigma_grad, cfg.numerics.theta0, c.t,
                           max(cfg.numerics.ensemble, 2), seed, model, cfg.loss.amplitude,
                           c.refine_etas, max_workers=cfg.numerics.max_workers)
    d = rep.as_dict()
    header = ["eta", "steps", "t", "mean_error", "mean_se", "phase_error", "phase_se", "cov_error"]
    return RunOutput(d, {"compare": (header, [[r[k] for k in header] for r in d["rows"]])})


RUNNERS: dict[str, Callable] = {
    "analyze": run_analyze,
    "sample-staleness": run_sample_staleness,
    "sim-asgd": run_sim_asgd,
    "sim-sme": run_sim_sme,
    "solve-pde": run_solve_pde,
    "fit-rate": run_fit_rate,
    "sweep-threshold": run_sweep,
    "speedup": run_speedup,
    "compare": run_compare,
}


# --------------------------------------------------------------------------
# orchestration


def execute(cfg: ExperimentConfig) -> RunOutput:
    if cfg.needs_seed and cfg.seed is None:
        raise ConfigError(f"--seed is required for the simulation kind {cfg.kind!r}")
    runner = RUNNERS[cfg.kind]
    return runner(cfg, cfg.seed) if cfg.needs_seed else runner(cfg)


def write_outputs(cfg: ExperimentConfig, out: RunOutput, fmt: str = "csv") -> list[Path]:
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    names = []
    for name, (header, rows) in sorted(out.series.items()):
        if fmt == "csv":
            path = out_dir / f"series_{name}.csv"
            write_table_csv(path, header, rows)
        else:
            path = out_dir / f"series_{name}.json"
            path.write_text(dumps({"columns": header, "rows": rows}))
        names.append(path.name)
        written.append(path)
    if fmt == "json":
        for name, blob in sorted(out.blobs.items()):
            path = out_dir / f"series_{name}.json"
            path.write_text(dumps(blob))
            names.append(path.name)
            written.append(path)
    report = {"schema_version": SCHEMA_VERSION, "kind": cfg.kind, "seed": cfg.seed,
              "version": __version__, "config": cfg.report_view(), "results": out.results,
              "series": names}
    path = out_dir / "report.json"
    path.write_text(dumps(report))
    written.append(path)
    return written


def _summary(results: dict, prefix: str = "", depth: int = 2) -> list[tuple[str, str]]:
    """Scalar entries of ``results`` flattened to dotted keys, nested dicts up to ``depth``."""
    lines = []
    for k in sorted(results):
        v = results[k]
        if isinstance(v, dict) and depth > 1:
            lines.extend(_summary(v, f"{prefix}{k}.", depth - 1))
        elif isinstance(v, (bool, int, float, str, np.floating, np.integer)) or v is None:
            lines.append((prefix + k, f"{float(v):.6g}" if isinstance(v, (float, np.floating)) else str(v)))
    return lines


def print_summary(cfg: ExperimentConfig, out: RunOutput, written: list[Path], stream=None) -> None:
    stream = stream or sys.stdout
    lines = _summary(out.results)
    width = max((len(k) for k, _ in lines), default=0)
    print(f"[{cfg.kind}] -> {cfg.out}", file=stream)
    for k, v in lines:
        print(f"  {k:<{width}}  {v}", file=stream)
    for p in written:
        print(f"  wrote {p.name}", file=stream)


def run_experiment(config_path: str | Path, seed: Optional[int] = None, out: Optional[str] = None,
                   fmt: str = "csv", kind: Optional[str] = None, quiet: bool = False) -> int:
    """Load, validate, run and write one experiment; returns the process exit status."""
    try:
        cfg = load_config(config_path) if config_path is not None else parse_config({"kind": kind})
        if kind is not None and cfg.kind != kind:
            raise ConfigError(f"config kind {cfg.kind!r} does not match subcommand {kind!r}")
        cfg = with_overrides(cfg, seed=seed, out=out)
        result = execute(cfg)
        written = write_outputs(cfg, result, fmt)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, ValueError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"error: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if not quiet:
        print_summary(cfg, result, written)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asgdlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, config_required=False):
        sp.add_argument("--config", metavar="PATH", required=config_required,
                        help="JSON experiment configuration")
        sp.add_argument("--seed", type=int, metavar="U64",
                        help="master seed (mandatory for simulation kinds)")
        sp.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="format of the series files")
        sp.add_argument("--quiet", action="store_true", help="suppress the summary table")

    for kind in KINDS:
        common(sub.add_parser(kind, help=f"run the {kind} experiment"))
    common(sub.add_parser("run", help="run the kind named in --config"), config_required=True)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    kind = None if args.command == "run" else args.command
    return run_experiment(args.config, seed=args.seed, out=args.out, fmt=args.format,
                          kind=kind, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
