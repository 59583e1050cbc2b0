"""Command-line interface: simulate | fit | band | mc.

Exit codes: 0 success, 2 configuration or I/O error, 3 corrupt data,
4 numerical failure (diagnostics are still written where possible).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .basis import reconstruct
from .experiments import run_mc, sgflm_average_band
from .fit import FitConfig, fit_gflm, fit_sgflm, select_p_aic
from .inference import band_beta, ci_eta, sandwich
from .io import config_hash, read_case, write_case
from .model import Theta
from .simulate import SimConfig, simulate_case

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

OUT_ROOT_ENV = "SGFLM_OUT_ROOT"


class CLIError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _resolve_outdir(out) -> Path:
    if out is None:
        out = os.environ.get(OUT_ROOT_ENV)
    if out is None:
        raise CLIError("no output directory given (use --out or "
                       f"${OUT_ROOT_ENV})", EXIT_CONFIG)
    path = Path(out)
    if not path.is_dir():
        raise CLIError(f"output directory does not exist: {path}", EXIT_CONFIG)
    return path


def _parse_lattice(text) -> tuple[int, int]:
    try:
        rows, cols = (int(x) for x in text.lower().split("x"))
        return rows, cols
    except ValueError as exc:
        raise CLIError(f"bad --lattice value {text!r}, expected ROWSxCOLS",
                       EXIT_CONFIG) from exc


def _parse_floats(text) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x != ""]
    except ValueError as exc:
        raise CLIError(f"bad numeric list {text!r}", EXIT_CONFIG) from exc


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CLIError(f"cannot read config file {path}: {exc}", EXIT_CONFIG) from exc


_SIM_DEFAULTS = {
    "eta": 0.6, "alpha": 0.0, "beta": "1,0.5,0.3333333333333333",
    "lattice": "20x20", "replicates": 20, "burn_in": 200, "thin": 200,
    "chain_mode": "thinned_shared", "basis_size": 20, "num_grid": 50,
    "seed": 0,
}


def _sim_config_from_args(args, overrides) -> SimConfig:
    # precedence: explicit flag > config file > built-in default
    def pick(key):
        flag = getattr(args, key)
        if flag is not None:
            return flag
        return overrides.get(key, _SIM_DEFAULTS[key])

    rows, cols = _parse_lattice(pick("lattice"))
    beta = pick("beta")
    beta = _parse_floats(beta) if isinstance(beta, str) else [float(b) for b in beta]
    theta = Theta(float(pick("eta")), float(pick("alpha")), np.asarray(beta))
    return SimConfig(
        true_theta=theta, rows=rows, cols=cols,
        basis_size=int(pick("basis_size")),
        num_grid=int(pick("num_grid")),
        burn_in=int(pick("burn_in")),
        thin=int(pick("thin")),
        replicates=int(pick("replicates")),
        chain_mode=pick("chain_mode"),
        seed=int(pick("seed")))


def _fit_config_from_args(args) -> FitConfig:
    lo, hi = _parse_floats(args.eta_bounds)
    p_cands = tuple(range(1, args.p_max + 1))
    return FitConfig(p_candidates=p_cands, eta_bounds=(lo, hi),
                     max_iter=args.max_iter, grad_tol=args.tol)


def cmd_simulate(args) -> int:
    outdir = _resolve_outdir(args.out)
    config = _sim_config_from_args(args, _load_config_file(args.config))
    case = simulate_case(config)
    chash = config_hash({"command": "simulate", **config.__dict__,
                         "true_theta": config.true_theta.to_vector().tolist(),
                         "mu": None, "score_sd": config.score_sd.tolist()})
    manifest = {
        "config_hash": chash,
        "seed": config.seed,
        "lattice": {"rows": config.rows, "cols": config.cols,
                    "wrap": config.wrap,
                    "neighborhood_kind": config.neighborhood_kind},
        "true_theta": {"eta": config.true_theta.eta,
                       "alpha": config.true_theta.alpha,
                       "beta": config.true_theta.beta.tolist()},
        "basis": {"kind": "trig", "size": config.basis_size,
                  "num_grid": config.num_grid},
        "replicates": config.replicates,
        "burn_in": config.burn_in,
        "thin": config.thin,
        "chain_mode": config.chain_mode,
    }
    write_case(case.datasets, outdir, manifest)
    print(json.dumps({"written": str(outdir), **manifest}, sort_keys=True))
    return EXIT_OK


def _read_case_or_die(data_dir):
    try:
        return read_case(data_dir)
    except ValueError as exc:
        raise CLIError(str(exc), EXIT_DATA) from exc


def _run_fit(datasets, args, fit_config):
    if args.p == "auto":
        return select_p_aic(datasets, fit_config, model=args.model)
    try:
        p = int(args.p)
    except ValueError as exc:
        raise CLIError(f"bad --p value {args.p!r}", EXIT_CONFIG) from exc
    fn = fit_sgflm if args.model == "sgflm" else fit_gflm
    return fn(datasets, p, fit_config)


def cmd_fit(args) -> int:
    outdir = _resolve_outdir(args.out)
    datasets, manifest = _read_case_or_die(args.data)
    fit_config = _fit_config_from_args(args)
    result = _run_fit(datasets, args, fit_config)

    payload = result.to_dict()
    payload["config_hash"] = manifest.get("config_hash", "")
    payload["seed"] = manifest.get("seed", "")
    with (outdir / "fit.json").open("w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")

    from .basis import make_trig_basis  # local import keeps startup light
    basis_meta = manifest.get("basis", {"size": 20, "num_grid": 50})
    basis = make_trig_basis(basis_meta["size"],
                            np.linspace(0, 1, basis_meta["num_grid"]))
    curve = reconstruct(result.theta_hat.beta, basis)
    with (outdir / "beta_curve.csv").open("w") as fh:
        fh.write(f"# config_hash={payload['config_hash']} seed={payload['seed']}\n")
        fh.write("t,value\n")
        for t, v in zip(curve.grid_points, curve.values):
            fh.write(f"{t:.17g},{v:.17g}\n")

    if not result.converged:
        print("fit did not converge; diagnostics written", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps({"converged": True, "p": result.p_selected,
                      "loglik": result.loglik}, sort_keys=True))
    return EXIT_OK


def cmd_band(args) -> int:
    outdir = _resolve_outdir(args.out)
    datasets, manifest = _read_case_or_die(args.data)
    fit_config = _fit_config_from_args(args)
    result = _run_fit(datasets, args, fit_config)
    if not result.converged:
        raise CLIError("fit did not converge", EXIT_NUMERICAL)

    from .basis import make_trig_basis
    basis_meta = manifest.get("basis", {"size": 20, "num_grid": 50})
    basis = make_trig_basis(basis_meta["size"],
                            np.linspace(0, 1, basis_meta["num_grid"]))
    try:
        sw = sandwich(datasets, result.theta_hat, model=args.model)
        band = band_beta(sw, result.theta_hat, basis, len(datasets),
                         level=args.level, simultaneous=not args.pointwise)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise CLIError(f"inference failed: {exc}", EXIT_NUMERICAL) from exc

    chash = manifest.get("config_hash", "")
    seed = manifest.get("seed", "")
    with (outdir / "band.csv").open("w") as fh:
        fh.write(f"# config_hash={chash} seed={seed}\n")
        fh.write("t,center,lower,upper\n")
        for t, c, lo, hi in zip(band.grid_points, band.center, band.lower, band.upper):
            fh.write(f"{t:.17g},{c:.17g},{lo:.17g},{hi:.17g}\n")

    info = {
        "model": args.model,
        "level": args.level,
        "simultaneous": not args.pointwise,
        "condition_numbers": sw.condition_numbers,
        "config_hash": chash,
        "seed": seed,
    }
    if args.model == "sgflm":
        lo, hi = ci_eta(sw, result.theta_hat.eta, len(datasets), level=args.level)
        info["eta_hat"] = result.theta_hat.eta
        info["ci_eta"] = [lo, hi]
    with (outdir / "inference.json").open("w") as fh:
        json.dump(info, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(json.dumps({"written": str(outdir)}, sort_keys=True))
    return EXIT_OK


def _write_table1(path, aggregates_by_eta, chash, seed):
    etas = sorted(aggregates_by_eta)
    metrics = ["E_eta", "MSE_eta", "E_alpha", "MSE_alpha", "MISE", "IV",
               "CI_eta", "FMSE"]
    with open(path, "w") as fh:
        fh.write(f"# config_hash={chash} seed={seed}\n")
        cols = [f"gflm_eta{e:g}" for e in etas] + [f"sgflm_eta{e:g}" for e in etas]
        fh.write("metric," + ",".join(cols) + "\n")
        for metric in metrics:
            row = [metric]
            for model in ("gflm", "sgflm"):
                for e in etas:
                    val = aggregates_by_eta[e][model].get(metric)
                    row.append("-" if val is None else f"{val:.6g}")
            fh.write(",".join(row) + "\n")


def cmd_mc(args) -> int:
    outdir = _resolve_outdir(args.out)
    etas = _parse_floats(args.eta)
    rows, cols = _parse_lattice(args.lattice)
    fit_config = _fit_config_from_args(args)
    fixed_p = None if args.fixed_p is None else int(args.fixed_p)

    aggregates_by_eta = {}
    chash = config_hash({"command": "mc", "etas": etas, "cases": args.cases,
                         "replicates": args.replicates, "lattice": args.lattice,
                         "seed": args.seed, "fixed_p": fixed_p,
                         "chain_mode": args.chain_mode, "level": args.level})
    cases_path = outdir / "cases.jsonl"
    with cases_path.open("w") as cases_fh:
        for eta in etas:
            theta = Theta(eta, 0.0, np.array([1.0, 0.5, 1.0 / 3.0]))
            sim = SimConfig(true_theta=theta, rows=rows, cols=cols,
                            replicates=args.replicates,
                            chain_mode=args.chain_mode, seed=args.seed)
            report = run_mc(sim, fit_config, args.cases, fixed_p=fixed_p,
                            level=args.level, workers=args.workers)
            aggregates_by_eta[eta] = report.aggregates
            for rec in report.records:
                cases_fh.write(json.dumps({"eta_true": eta, **rec},
                                          sort_keys=True) + "\n")
            for rec in report.excluded:
                cases_fh.write(json.dumps({"eta_true": eta, "excluded": True,
                                           **rec}, sort_keys=True) + "\n")
            band = sgflm_average_band(report, sim)
            with (outdir / f"bands_eta{eta:g}.csv").open("w") as fh:
                fh.write(f"# config_hash={chash} seed={args.seed}\n")
                fh.write("t,center,lower,upper\n")
                for t, c, lo, hi in zip(band.grid_points, band.center,
                                        band.lower, band.upper):
                    fh.write(f"{t:.17g},{c:.17g},{lo:.17g},{hi:.17g}\n")
    _write_table1(outdir / "table1.csv", aggregates_by_eta, chash, args.seed)
    print(json.dumps({"written": str(outdir), "etas": etas,
                      "cases": args.cases}, sort_keys=True))
    return EXIT_OK


def _add_fit_flags(p):
    p.add_argument("--model", choices=["sgflm", "gflm"], default="sgflm")
    p.add_argument("--p", default="auto", help="truncation level or 'auto' (AIC)")
    p.add_argument("--eta-bounds", default="-1.95,1.95")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--p-max", type=int, default=10,
                   help="largest truncation level tried under --p auto")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgflm",
        description="Spatial generalized functional linear models on binary lattices")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="simulate one case of lattice replicates")
    p_sim.add_argument("--out", default=None)
    p_sim.add_argument("--config", default=None, help="JSON config file; flags override")
    # defaults live in _SIM_DEFAULTS; None means "not given on the command
    # line" so config-file values can slot in underneath explicit flags
    p_sim.add_argument("--eta", type=float, default=None)
    p_sim.add_argument("--alpha", type=float, default=None)
    p_sim.add_argument("--beta", default=None)
    p_sim.add_argument("--lattice", default=None)
    p_sim.add_argument("--replicates", type=int, default=None)
    p_sim.add_argument("--burn-in", type=int, default=None)
    p_sim.add_argument("--thin", type=int, default=None)
    p_sim.add_argument("--chain-mode", choices=["thinned_shared", "per_replicate"],
                       default=None)
    p_sim.add_argument("--basis-size", type=int, default=None)
    p_sim.add_argument("--num-grid", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit a simulated or stored case")
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--out", default=None)
    _add_fit_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_band = sub.add_parser("band", help="confidence band and eta interval")
    p_band.add_argument("--data", required=True)
    p_band.add_argument("--out", default=None)
    p_band.add_argument("--level", type=float, default=0.95)
    p_band.add_argument("--pointwise", action="store_true")
    _add_fit_flags(p_band)
    p_band.set_defaults(func=cmd_band)

    p_mc = sub.add_parser("mc", help="Monte Carlo study over cases")
    p_mc.add_argument("--eta", default="0.3,0.6,0.9,1.2")
    p_mc.add_argument("--cases", type=int, default=100)
    p_mc.add_argument("--replicates", type=int, default=20)
    p_mc.add_argument("--lattice", default="20x20")
    p_mc.add_argument("--seed", type=int, default=0)
    p_mc.add_argument("--out", default=None)
    p_mc.add_argument("--workers", type=int, default=1)
    p_mc.add_argument("--fixed-p", default=None)
    p_mc.add_argument("--level", type=float, default=0.95)
    p_mc.add_argument("--chain-mode", choices=["thinned_shared", "per_replicate"],
                      default="thinned_shared")
    _add_fit_flags(p_mc)
    p_mc.set_defaults(func=cmd_mc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
