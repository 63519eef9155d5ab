"""Command-line entry point: simulate, estimate, experiment, s2-contour,
prop1-slopes, audit.

All subcommands validate the JSON configuration against the published schema
before doing any work, write a fully resolved configuration echo for exact
replay, and render figures next to the delimited outputs (suppress with
--no-figures).  Exit codes: 0 success, 1 configuration/validation error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import config as cfgmod
from . import functionals, report
from .design import check_class, design_function
from .estimators import EstimatorConfig, estimate_curves, audit_tuning
from .harness import (
    CURVE_OUTPUTS,
    ExperimentPlan,
    prop1_slope_experiment,
    run_experiment,
    s2_contour,
)
from .models import audit_model, build_model_from_config, freeze
from .sampling import RngStream
from .simulate import (
    SimulationPlan,
    read_binary,
    read_csv,
    simulate,
    write_binary,
    write_csv,
)


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _threads(args) -> int:
    n = args.threads
    if n is None:
        n = int(os.environ.get("JUMPDIFF_THREADS", "0"))
    if n == 0:
        n = os.cpu_count() or 1
    return max(1, n)


def _load(args) -> dict:
    if not args.config:
        raise CliError("--config is required for this subcommand", 1)
    try:
        cfg = cfgmod.load_config(args.config)
        return cfgmod.resolve(cfg, seed_override=args.seed)
    except cfgmod.ConfigError as exc:
        raise CliError(str(exc), 1)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read configuration: {exc}", 1)


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _simulation_plan(resolved, stream_index=0) -> SimulationPlan:
    sim = resolved["simulation"]
    return SimulationPlan(
        horizon=float(sim["horizon"]),
        mesh=float(sim["mesh"]),
        substeps=int(sim["substeps"]),
        burn_in=float(sim["burn_in"]),
        x0=float(sim["x0"]),
        seed=RngStream(int(sim["seed"]), stream_index),
    )


def cmd_simulate(args):
    resolved = _load(args)
    if "simulation" not in resolved:
        raise CliError("invalid configuration at 'simulation': section required "
                       "for simulate", 1)
    out = _outdir(args)
    model = build_model_from_config(resolved["model"])
    n_paths = int(resolved["simulation"].get("paths", 1))
    names = []
    for i in range(n_paths):
        plan = _simulation_plan(resolved, stream_index=i)
        path = simulate(model, plan)
        stem = "path" if n_paths == 1 else f"path_{i:03d}"
        if args.format == "binary":
            fname = os.path.join(out, stem + ".bin")
            write_binary(path, fname)
        else:
            fname = os.path.join(out, stem + ".csv")
            write_csv(path, fname)
        names.append(fname)
    cfgmod.write_echo(resolved, out)
    print(f"wrote {len(names)} path file(s): {', '.join(names)}")
    return 0


def _read_path(fname):
    with open(fname, "rb") as fh:
        magic = fh.read(4)
    return read_binary(fname) if magic == b"JDPF" else read_csv(fname)


def cmd_estimate(args):
    resolved = _load(args)
    if not args.path:
        raise CliError("--path is required for estimate", 1)
    out = _outdir(args)
    path = _read_path(args.path)
    labels, configs = cfgmod.estimator_configs(resolved)
    which = tuple(resolved.get("estimate", {}).get(
        "which", ["alpha", "rstar", "mu", "mu_filtered", "sigma2"]))
    fname = os.path.join(out, "estimates.csv")
    with open(fname, "w") as fh:
        fh.write("x,estimator,value,sd,mhat,count,status\n")
        for label, cfg in zip(labels, configs):
            curves = estimate_curves(path, cfg, which=which)
            for est_name in which:
                for row in curves[est_name]:
                    name = est_name if len(labels) == 1 else f"{label}.{est_name}"
                    fh.write(
                        f"{row.x:.17g},{name},{row.estimate:.17g},{row.sd:.17g},"
                        f"{row.mhat:.17g},{row.count},{row.status}\n"
                    )
    cfgmod.write_echo(resolved, out)
    print(f"wrote {fname}")
    return 0


def cmd_experiment(args):
    resolved = _load(args)
    for section in ("simulation", "experiment"):
        if section not in resolved:
            raise CliError(
                f"invalid configuration at '{section}': section required for "
                "experiment", 1)
    out = _outdir(args)
    labels, configs = cfgmod.estimator_configs(resolved)
    exp = resolved["experiment"]
    sim = resolved["simulation"]
    plan = ExperimentPlan(
        model=resolved["model"],
        horizon=float(sim["horizon"]),
        mesh=float(sim["mesh"]),
        substeps=int(sim["substeps"]),
        burn_in=float(sim["burn_in"]),
        x0=float(sim["x0"]),
        replications=int(exp["replications"]),
        master_seed=int(exp["master_seed"]),
        estimators=configs,
        labels=labels,
        outputs=tuple(exp["outputs"]),
    )
    results = run_experiment(plan, workers=_threads(args))
    model = build_model_from_config(resolved["model"])
    written = []
    for (label, output), curves in sorted(results.items()):
        stem = os.path.join(out, f"{label}_{output}")
        curves.write_csv(stem + ".csv")
        written.append(stem + ".csv")
        if not args.no_figures:
            report.save_quantile_figure(curves, stem + ".png", model=model,
                                        title=f"{label}: {output}")
            written.append(stem + ".png")
    written += _side_outputs(resolved, plan.outputs, out, args)
    manifest = plan.manifest()
    man_path = os.path.join(out, "manifest.json")
    with open(man_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    cfgmod.write_echo(resolved, out)
    print(f"experiment complete; wrote {len(written)} output file(s) to {out}")
    return 0


def _side_outputs(resolved, outputs, out, args):
    written = []
    if "s2_contour" in outputs:
        written += _write_s2_contour(resolved, out, args)
    if "prop1_slopes" in outputs:
        written += _write_prop1(resolved, out, args)
    return written


def _write_s2_contour(resolved, out, args):
    sc = resolved.get("s2_contour", {})
    gammas = sc.get("gammas", [1.5, 2.0, 3.0, 4.0, 5.0])
    alphas = sc.get("alphas", [1.65, 1.7, 1.75, 1.8, 1.85, 1.9])
    f = design_function(sc.get("f", "ja_bump"))
    grid = s2_contour(gammas, alphas, f)
    fname = os.path.join(out, "s2_contour.csv")
    with open(fname, "w") as fh:
        fh.write("gamma,alpha,s2\n")
        for i, g in enumerate(gammas):
            for j, a in enumerate(alphas):
                fh.write(f"{g:.17g},{a:.17g},{grid[i, j]:.17g}\n")
    written = [fname]
    if not args.no_figures:
        fig = os.path.join(out, "s2_contour.png")
        report.save_contour_figure(gammas, alphas, grid, fig,
                                   title="asymptotic variance factor")
        written.append(fig)
    return written


def _write_prop1(resolved, out, args):
    pr = resolved.get("prop1", {})
    x = float(pr.get("x", 0.0))
    u = float(pr.get("u", 4.0))
    h_grid = pr.get("h_grid", [1e-4, 3e-4, 1e-3, 3e-3, 1e-2])
    f = design_function(pr.get("f", "ja_bump"))
    model = freeze(build_model_from_config(resolved["model"]), x)
    slopes = prop1_slope_experiment(model, f, u, h_grid)
    fname = os.path.join(out, "prop1_slopes.csv")
    with open(fname, "w") as fh:
        fh.write("h,err_mean,err_var\n")
        for h, em, ev in zip(slopes.h_grid, slopes.err_mean, slopes.err_var):
            fh.write(f"{h:.17g},{em:.17g},{ev:.17g}\n")
        fh.write(f"# slope_mean,{slopes.slope_mean:.17g},{slopes.stderr_mean:.17g}\n")
        fh.write(f"# slope_var,{slopes.slope_var:.17g},{slopes.stderr_var:.17g}\n")
    written = [fname]
    if not args.no_figures:
        fig = os.path.join(out, "prop1_slopes.png")
        report.save_slope_figure(slopes, fig, title="generator approximation error")
        written.append(fig)
    return written


def cmd_s2_contour(args):
    resolved = _load(args)
    out = _outdir(args)
    written = _write_s2_contour(resolved, out, args)
    cfgmod.write_echo(resolved, out)
    print(f"wrote {', '.join(written)}")
    return 0


def cmd_prop1(args):
    resolved = _load(args)
    out = _outdir(args)
    written = _write_prop1(resolved, out, args)
    cfgmod.write_echo(resolved, out)
    print(f"wrote {', '.join(written)}")
    return 0


def cmd_audit(args):
    resolved = _load(args)
    model = build_model_from_config(resolved["model"])
    sim = resolved.get("simulation", {})
    horizon = float(sim.get("horizon", 10.0))
    mesh = float(sim.get("mesh", 1e-6))
    labels, configs = cfgmod.estimator_configs(resolved)

    print(f"model: {model.name}")
    audit = audit_model(model)
    print(f"  alpha range on diagnostic grid: [{audit.alpha_range[0]:.4f}, "
          f"{audit.alpha_range[1]:.4f}]")
    print(f"  density symmetry residual: {audit.symmetry_residual:.3g}")
    print(f"  declared tail bound margin: {audit.tail_bound_margin:.3g}")
    for msg in audit.messages:
        print(f"  warning: {msg}")

    for label, cfg in zip(labels, configs):
        u = cfg.resolve_u(horizon, mesh)
        print(f"estimator '{label}': resolved u = (T b h^2)^-c = {u:.4f} "
              f"(T={horizon:g}, b={cfg.kernel.bandwidth:g}, h={mesh:g})")
        for x in cfg.x_grid:
            a = float(model.jumps.alpha.eval(x))
            d = float(model.jumps.delta.eval(x))
            tun = audit_tuning(cfg, horizon, mesh, a, d)
            prods = ", ".join(f"{k}={v:.3g}" for k, v in tun["products"].items())
            warn = f"  [above 1: {', '.join(tun['warnings'])}]" if tun["warnings"] else ""
            print(f"  x={x:+.2f}: {prods}{warn}")
        for fname in {cfg.f_ja, cfg.f_drift, cfg.f_sigma}:
            aud = check_class(design_function(fname))
            status = "ok" if aud.klass_consistent else "; ".join(aud.messages)
            print(f"  design function {fname} [{aud.klass}]: {status}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to the JSON configuration")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=None,
                        help="override the configured master seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker count (0 = auto; env JUMPDIFF_THREADS)")
    common.add_argument("--format", choices=("csv", "binary"), default="csv",
                        help="path output format for simulate")
    common.add_argument("--no-figures", action="store_true",
                        help="skip figure rendering")

    ap = argparse.ArgumentParser(
        prog="jumpdiff",
        description="Simulation and nonparametric estimation for jump "
                    "diffusions with state-dependent jump activity.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common],
                   help="generate observation paths")
    pe = sub.add_parser("estimate", parents=[common],
                        help="run the estimators on a path file")
    pe.add_argument("--path", help="path file written by simulate")
    sub.add_parser("experiment", parents=[common],
                   help="replicated Monte Carlo experiment")
    sub.add_parser("s2-contour", parents=[common],
                   help="variance factor on a (gamma, alpha) grid")
    sub.add_parser("prop1-slopes", parents=[common],
                   help="generator approximation error slopes")
    sub.add_parser("audit", parents=[common],
                   help="audit model, tuning products and design functions")
    return ap


_COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "experiment": cmd_experiment,
    "s2-contour": cmd_s2_contour,
    "prop1-slopes": cmd_prop1,
    "audit": cmd_audit,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
