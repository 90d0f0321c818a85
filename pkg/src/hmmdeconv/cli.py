"""Command-line front end.

    hmmdeconv simulate|estimate|risk-study|calibrate-penalty --config PATH
              [--out DIR] [--seed U64] [--threads N]

Exit status: 0 on success, 1 on validation errors, 2 on runtime failures.
"""
import argparse
import csv
import json
from pathlib import Path
import sys

import numpy as np

from .config import ConfigError, load_config
from .estimate1d import fmt, write_estimate_1d
from .estimate2d import write_estimate_2d
from .noise import delta_m
from .plotting import (mise_plot_script, render_estimates, render_mise_plot, render_stability,
                       stability_plot_script)
from .risk import (calibrate_penalty, mc_risk_study, medians_by_n, study_B, summarize_study,
                   write_records, write_summary)
from .simulate import add_noise, write_path
from .transition import estimate_transition, write_transition

U64_MAX = 2 ** 64 - 1


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid count {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="hmmdeconv",
                                     description="Deconvolution estimation for noisy Markov chains.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("simulate", "simulate a latent path and its noisy observations"),
                           ("estimate", "estimate f, F and the transition density"),
                           ("risk-study", "Monte Carlo MISE study and rate fit"),
                           ("calibrate-penalty", "pilot-run calibration of the penalty constants")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=_seed, help="base seed (overrides the config)")
        p.add_argument("--threads", type=_positive, help="worker threads for replicate loops")
        if name == "simulate":
            p.add_argument("--n", type=int, help="number of transitions (overrides simulate.n)")
        if name == "estimate":
            p.add_argument("--input", help="CSV with a y column (overrides estimate.input)")
    return parser


# --------------------------------------------------------------- validation

def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.sim_seed = args.seed
        cfg.base_seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if getattr(args, "n", None) is not None:
        if args.n < 1:
            raise ConfigError("n must be >= 1")
        cfg.sim_n = args.n
    if getattr(args, "input", None) is not None:
        cfg.input_csv = str(Path(args.input).resolve())
        cfg.base_dir = Path(".")
    return cfg


def read_observations(path):
    """The y column of a CSV (``y`` or ``y_i``), with row-level error messages."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(f"cannot read input {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ConfigError(f"{path}: empty file")
        header = [h.strip() for h in header]
        col = next((c for c in ("y", "y_i") if c in header), None)
        if col is None:
            raise ConfigError(f"{path}: no 'y' column in header {header}")
        idx = header.index(col)
        vals = []
        for row_no, row in enumerate(reader, start=2):
            if not row or not any(c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ConfigError(f"{path}: row {row_no} has {len(row)} fields, expected {len(header)}")
            try:
                v = float(row[idx])
            except ValueError:
                raise ConfigError(f"{path}: row {row_no}, column '{col}': not a number: {row[idx]!r}") from None
            if not np.isfinite(v):
                raise ConfigError(f"{path}: row {row_no}, column '{col}': non-finite value")
            vals.append(v)
    if len(vals) < 3:
        raise ConfigError(f"{path}: need at least 3 observations, found {len(vals)}")
    return np.array(vals)


def validate_command(command, cfg):
    if command == "simulate":
        cfg.chain()
        cfg.noise()
        if cfg.sim_n is None:
            raise ConfigError("missing simulate.n")
    elif command == "estimate":
        cfg.noise()
        if cfg.input_csv is None:
            cfg.chain()
            if cfg.sim_n is None or cfg.sim_n < 2:
                raise ConfigError("inline simulation needs chain.* and simulate.n >= 2")
    elif command == "risk-study":
        cfg.chain()
        cfg.noise()
        if not cfg.n_list:
            raise ConfigError("missing study.n_list")
        if cfg.replicates < 2:
            raise ConfigError("study.replicates must be >= 2")
    elif command == "calibrate-penalty":
        cfg.chain()
        cfg.noise()
        if cfg.cal_n is None and not cfg.n_list:
            raise ConfigError("missing calibrate.n")
        if cfg.cal_replicates < 2:
            raise ConfigError("calibrate.replicates must be >= 2")


# ----------------------------------------------------------------- commands

def _prepare_out(out):
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _open_check(path):
    try:
        with open(path, "a"):
            pass
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None


def cmd_simulate(cfg, out):
    model, noise = cfg.chain(), cfg.noise()
    x = model.sample(cfg.sim_n, cfg.sim_seed)
    y = add_noise(x, noise, cfg.sim_seed)
    _prepare_out(out)
    target = out / "path.csv"
    _open_check(target)
    write_path(target, x, y)
    meta = {"chain": model.name, "chain_params": model.params(), "noise": noise.describe(),
            "n": cfg.sim_n, "rows": int(x.size), "seed": cfg.sim_seed}
    _write_json(out / "path.meta.json", meta)
    return [target, out / "path.meta.json"]


def observations_for(cfg):
    if cfg.input_csv is not None:
        return read_observations(cfg.resolve(cfg.input_csv))
    model, noise = cfg.chain(), cfg.noise()
    x = model.sample(cfg.sim_n, cfg.sim_seed)
    return add_noise(x, noise, cfg.sim_seed)


def run_estimate(y, cfg):
    restricted = {"auto": "auto", "true": True, "false": False}[cfg.restricted]
    return estimate_transition(y, cfg.noise(), cfg.penalty, B=cfg.B, restricted=restricted)


def estimate_report(est, noise, cfg):
    n = est.n
    lines = [f"n = {n}", f"noise = {noise.describe()}",
             f"kappa1 = {fmt(cfg.kappa1)}", f"kappa2 = {fmt(cfg.kappa2)}",
             f"B = [{fmt(est.B[0])}, {fmt(est.B[1])}]",
             f"m_hat = {est.f_est.m}", f"M_hat = {est.F_est.m}",
             f"restriction_relaxed = {str(est.restriction_relaxed).lower()}"]
    for m, contrast, pen in est.f_est.candidates:
        lines.append(f"f.m{m}: delta = {fmt(delta_m(noise, m))}, contrast = {fmt(contrast)}, "
                     f"pen = {fmt(pen)}")
    for m, contrast, pen in est.F_est.candidates:
        lines.append(f"F.m{m}: delta_sq = {fmt(delta_m(noise, m) ** 2)}, contrast = {fmt(contrast)}, "
                     f"pen = {fmt(pen)}")
    d1 = delta_m(noise, est.f_est.m)
    d2 = delta_m(noise, est.F_est.m) ** 2
    lines.append(f"check Delta(m_hat) <= n: {'passed' if d1 <= n else 'FAILED'}")
    lines.append(f"check Delta(M_hat)^2 <= n: {'passed' if d2 <= n else 'FAILED'}")
    return "\n".join(lines) + "\n"


def cmd_estimate(cfg, out, y):
    noise = cfg.noise()
    est = run_estimate(y, cfg)
    _prepare_out(out)
    files = [out / "f_coeffs.csv", out / "F_coeffs.csv", out / "pi_grid.csv", out / "report.txt"]
    _open_check(files[0])
    write_estimate_1d(files[0], est.f_est)
    write_estimate_2d(files[1], est.F_est)
    write_transition(files[2], est, cfg.pi_grid, seed=cfg.sim_seed if cfg.input_csv is None else None)
    files[3].write_text(estimate_report(est, noise, cfg))
    files.append(Path(str(files[2]) + ".meta.json"))
    if cfg.render:
        render_estimates(out / "estimate.png", est.f_est, est)
        files.append(out / "estimate.png")
    return files


def cmd_risk_study(cfg, out):
    model, noise = cfg.chain(), cfg.noise()
    B = study_B(model, noise, cfg.base_seed) if cfg.B is None else cfg.B
    records = mc_risk_study(model, noise, cfg.penalty, cfg.n_list, cfg.replicates,
                            cfg.base_seed, threads=cfg.threads, B=B, points=cfg.grid_points)
    summary = summarize_study(records, model, noise, cfg.penalty, B)
    summary["base_seed"] = cfg.base_seed
    summary["replicates"] = cfg.replicates
    _prepare_out(out)
    _open_check(out / "records.csv")
    write_records(out / "records.csv", records, timings=cfg.timings)
    write_summary(out / "summary.txt", summary)
    medians = {k: medians_by_n(records, k) for k in ("mise_f", "mise_F", "mise_pi")}
    mise_plot_script(out / "mise_vs_n.gp", medians)
    files = [out / "records.csv", out / "summary.txt", out / "mise_vs_n.gp"]
    if cfg.render:
        render_mise_plot(out / "mise_vs_n.png", medians)
        files.append(out / "mise_vs_n.png")
    return files


def cmd_calibrate_penalty(cfg, out):
    model, noise = cfg.chain(), cfg.noise()
    n = cfg.cal_n if cfg.cal_n is not None else cfg.n_list[0]
    results = {}
    for dim, name in ((1, "kappa1"), (2, "kappa2")):
        try:
            results[name] = calibrate_penalty(model, noise, n, cfg.cal_replicates, cfg.base_seed,
                                              cfg.cal_grid, cfg.cal_threshold, dim=dim,
                                              threads=cfg.threads)
        except ValueError as exc:
            results[name] = str(exc)
    lines = [f"n = {n}", f"replicates = {cfg.cal_replicates}", f"base_seed = {cfg.base_seed}",
             f"threshold = {fmt(cfg.cal_threshold)}",
             "grid = " + ", ".join(fmt(k) for k in cfg.cal_grid)]
    curves = {}
    for name, res in results.items():
        if isinstance(res, str):
            lines.append(f"{name} = unidentified ({res})")
            continue
        value = fmt(res.kappa) if res.kappa is not None else res.status
        lines.append(f"{name} = {value}")
        lines.append(f"{name}.status = {res.status}")
        lines.append(f"{name}.stability = " + ", ".join(fmt(s) for s in res.stability))
        curves[name] = res.stability
    _prepare_out(out)
    _open_check(out / "calibration.txt")
    (out / "calibration.txt").write_text("\n".join(lines) + "\n")
    files = [out / "calibration.txt"]
    if curves:
        stability_plot_script(out / "stability.gp", cfg.cal_grid, curves)
        files.append(out / "stability.gp")
        if cfg.render:
            render_stability(out / "stability.png", cfg.cal_grid, curves)
            files.append(out / "stability.png")
    return files, results


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------- main

def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        validate_command(args.command, cfg)
        out = Path(args.out) if args.out else Path(cfg.out_dir)
        y = observations_for(cfg) if args.command == "estimate" else None
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "simulate":
            files = cmd_simulate(cfg, out)
        elif args.command == "estimate":
            files = cmd_estimate(cfg, out, y)
        elif args.command == "risk-study":
            files = cmd_risk_study(cfg, out)
        else:
            files, _ = cmd_calibrate_penalty(cfg, out)
    except (OSError, ValueError, ArithmeticError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
