"""Replicated-experiment driver with deterministic parallel reduction.

Runs R independent simulate-estimate pipelines (replication i uses RNG
stream index i), aggregates pointwise quantiles, and attaches model-based
plug-in asymptotic bands.  Results are reduced in replication-index order,
so output is bit-identical for any worker count or scheduling.
"""

from __future__ import annotations

import math
import multiprocessing as mp
from dataclasses import dataclass, field

import numpy as np

from . import functionals
from .design import design_function
from .estimators import (
    STATUS_OK,
    CurveEstimate,
    EstimatorConfig,
    estimate_curves,
)
from .models import ModelSpec, build_model_from_config
from .sampling import RngStream
from .simulate import SimulationPlan, simulate

CURVE_OUTPUTS = {
    "alpha_curve": "alpha",
    "rstar_curve": "rstar",
    "mu_curve": "mu",
    "mu_filtered_curve": "mu_filtered",
    "sigma2_curve": "sigma2",
}
SIDE_OUTPUTS = ("s2_contour", "prop1_slopes")


@dataclass(frozen=True)
class ExperimentPlan:
    model: dict                          # model config (JSON-style)
    horizon: float
    mesh: float
    replications: int
    master_seed: int
    substeps: int = 4
    burn_in: float = None
    x0: float = 0.0
    estimators: tuple = (EstimatorConfig(),)   # one or more tuning variants
    labels: tuple = None                       # labels matching `estimators`
    outputs: tuple = ("alpha_curve",)

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.labels is None:
            labels = tuple(f"est{i}" if len(self.estimators) > 1 else "main"
                           for i in range(len(self.estimators)))
            object.__setattr__(self, "labels", labels)
        if len(self.labels) != len(self.estimators):
            raise ValueError("labels and estimators must align")
        unknown = [o for o in self.outputs
                   if o not in CURVE_OUTPUTS and o not in SIDE_OUTPUTS]
        if unknown:
            raise ValueError(f"unknown outputs {unknown}")

    def simulation_plan(self, replication: int) -> SimulationPlan:
        return SimulationPlan(
            horizon=self.horizon, mesh=self.mesh, substeps=self.substeps,
            burn_in=self.burn_in, x0=self.x0,
            seed=RngStream(self.master_seed, replication),
        )

    def manifest(self) -> dict:
        return {
            "model": self.model,
            "simulation": {
                "horizon": self.horizon, "mesh": self.mesh,
                "substeps": self.substeps,
                "burn_in": (5.0 if self.horizon == 10.0 else self.horizon / 2.0)
                           if self.burn_in is None else self.burn_in,
                "x0": self.x0,
            },
            "replications": self.replications,
            "master_seed": self.master_seed,
            "estimators": {lab: cfg.to_dict()
                           for lab, cfg in zip(self.labels, self.estimators)},
            "outputs": list(self.outputs),
        }

    @classmethod
    def from_manifest(cls, man: dict) -> "ExperimentPlan":
        sim = man["simulation"]
        labels = tuple(man["estimators"].keys())
        ests = tuple(EstimatorConfig.from_dict(man["estimators"][k]) for k in labels)
        return cls(
            model=man["model"], horizon=float(sim["horizon"]),
            mesh=float(sim["mesh"]), substeps=int(sim.get("substeps", 4)),
            burn_in=sim.get("burn_in"), x0=float(sim.get("x0", 0.0)),
            replications=int(man["replications"]),
            master_seed=int(man["master_seed"]),
            estimators=ests, labels=labels, outputs=tuple(man["outputs"]),
        )


@dataclass
class QuantileCurves:
    name: str
    x: np.ndarray
    q25: np.ndarray
    q50: np.ndarray
    q75: np.ndarray
    mean: np.ndarray
    sd_emp: np.ndarray
    sd_asym: np.ndarray
    n_valid: np.ndarray

    def write_csv(self, fname):
        with open(fname, "w") as fh:
            fh.write("x,q25,q50,q75,mean,sd_emp,sd_asym,n_valid\n")
            for i in range(len(self.x)):
                fh.write(
                    f"{self.x[i]:.17g},{self.q25[i]:.17g},{self.q50[i]:.17g},"
                    f"{self.q75[i]:.17g},{self.mean[i]:.17g},{self.sd_emp[i]:.17g},"
                    f"{self.sd_asym[i]:.17g},{int(self.n_valid[i])}\n"
                )


def _run_replication(args):
    """Worker: one simulate-estimate pipeline (module-level for pickling)."""
    i, model_cfg, plan_fields, est_cfgs, wanted = args
    model = build_model_from_config(model_cfg)
    plan = SimulationPlan(
        horizon=plan_fields["horizon"], mesh=plan_fields["mesh"],
        substeps=plan_fields["substeps"], burn_in=plan_fields["burn_in"],
        x0=plan_fields["x0"],
        seed=RngStream(plan_fields["master_seed"], i),
    )
    path = simulate(model, plan)
    payload = {}
    for label, cfg_dict in est_cfgs:
        cfg = EstimatorConfig.from_dict(cfg_dict)
        curves = estimate_curves(path, cfg, which=wanted)
        for est_name, rows in curves.items():
            payload[(label, est_name)] = [
                (r.x, r.estimate, r.sd, r.mhat, r.count, r.status) for r in rows
            ]
    return i, payload


def run_experiment(plan: ExperimentPlan, workers: int = 1):
    """Execute the replicated experiment; deterministic for any worker count.

    Returns {(label, output_name): QuantileCurves} for the Monte Carlo curve
    outputs (side outputs like the s2 contour are handled by the CLI).
    Aborts if more than half the replications fail at any grid point.
    """
    wanted = tuple(CURVE_OUTPUTS[o] for o in plan.outputs if o in CURVE_OUTPUTS)
    if not wanted:
        return {}
    args = [
        (
            i,
            plan.model,
            {
                "horizon": plan.horizon, "mesh": plan.mesh,
                "substeps": plan.substeps, "burn_in": plan.burn_in,
                "x0": plan.x0, "master_seed": plan.master_seed,
            },
            [(lab, cfg.to_dict()) for lab, cfg in zip(plan.labels, plan.estimators)],
            wanted,
        )
        for i in range(plan.replications)
    ]
    results = [None] * plan.replications
    if workers and workers > 1:
        ctx = mp.get_context("spawn")
        with ctx.Pool(workers) as pool:
            for i, payload in pool.imap_unordered(_run_replication, args):
                results[i] = payload
    else:
        for a in args:
            i, payload = _run_replication(a)
            results[i] = payload

    model = build_model_from_config(plan.model)
    out = {}
    for label, cfg in zip(plan.labels, plan.estimators):
        for output in plan.outputs:
            if output not in CURVE_OUTPUTS:
                continue
            est_name = CURVE_OUTPUTS[output]
            rows_by_rep = [res[(label, est_name)] for res in results]
            out[(label, output)] = _aggregate(
                est_name, cfg, plan, model, rows_by_rep
            )
    return out


def _aggregate(est_name, cfg, plan, model, rows_by_rep) -> QuantileCurves:
    xs = np.array([r[0] for r in rows_by_rep[0]])
    R = len(rows_by_rep)
    nx = len(xs)
    est = np.full((R, nx), np.nan)
    mh = np.full((R, nx), np.nan)
    ok = np.zeros((R, nx), dtype=bool)
    for i, rows in enumerate(rows_by_rep):
        for j, (x, e, sd, m, cnt, status) in enumerate(rows):
            est[i, j] = e
            mh[i, j] = m
            ok[i, j] = status == STATUS_OK and math.isfinite(e)

    n_valid = ok.sum(axis=0)
    if np.any(n_valid < 0.5 * R):
        bad = xs[np.argmin(n_valid)]
        raise RuntimeError(
            f"{est_name}: more than 50% of replications failed at x = {bad}"
        )

    q25 = np.empty(nx)
    q50 = np.empty(nx)
    q75 = np.empty(nx)
    mean = np.empty(nx)
    sd_emp = np.empty(nx)
    for j in range(nx):
        vals = est[ok[:, j], j]
        q25[j], q50[j], q75[j] = np.percentile(vals, [25.0, 50.0, 75.0])
        mean[j] = vals.mean()
        sd_emp[j] = vals.std(ddof=1) if len(vals) > 1 else 0.0

    mhat_pool = np.nanmedian(np.where(mh > 0, mh, np.nan), axis=0)
    sd_asym = _asymptotic_band(est_name, cfg, plan, model, xs, mhat_pool, est, ok)
    return QuantileCurves(
        name=est_name, x=xs, q25=q25, q50=q50, q75=q75, mean=mean,
        sd_emp=sd_emp, sd_asym=sd_asym, n_valid=n_valid,
    )


def _asymptotic_band(est_name, cfg, plan, model, xs, mhat_pool, est, ok):
    """Model-based plug-in band (Theorems 3/4/8) with the pooled density."""
    b = cfg.kernel.bandwidth
    g2 = cfg.kernel.g2_int
    tb = plan.horizon * b
    u = cfg.resolve_u(plan.horizon, plan.mesh)
    f_ja = design_function(cfg.f_ja)
    f_dr = design_function(cfg.f_drift)
    sd = np.full(len(xs), np.nan)
    for j, x in enumerate(xs):
        m = mhat_pool[j]
        if not (m > 0):
            continue
        try:
            if est_name in ("alpha", "rstar"):
                a = float(model.jumps.alpha.eval(x))
                r = float(model.jumps.r.eval(x))
                base = functionals.alpha_clt_sd(cfg.gamma, a, r, m, f_ja, g2,
                                                tb * u**a)
                if est_name == "rstar":
                    base = r * math.log(max(u, 1.0 + 1e-12)) * base
                sd[j] = base
            elif est_name == "mu":
                sd[j] = functionals.drift_clt_sd(model, f_dr, x, m, g2, tb)
            elif est_name == "mu_filtered":
                sd[j] = functionals.filtered_drift_clt_sd(model, x, m, g2, tb)
            else:  # sigma2: no CLT available; report the pooled empirical sd
                vals = est[ok[:, j], j]
                sd[j] = float(np.median(np.abs(vals - np.median(vals)))) * 1.4826
        except Exception:
            sd[j] = np.nan
    return sd


# ---------------------------------------------------------------------------
# deterministic side outputs
# ---------------------------------------------------------------------------

@dataclass
class Prop1Slopes:
    slope_mean: float
    stderr_mean: float
    slope_var: float
    stderr_var: float
    h_grid: np.ndarray
    err_mean: np.ndarray
    err_var: np.ndarray


def prop1_slope_experiment(model: ModelSpec, f, u: float, h_grid) -> Prop1Slopes:
    """Log-log slopes of the first-order generator approximation errors.

    For a frozen-coefficient model, regress log |E[f_u(X_h)] - h A*f_u| and
    log |Var[f_u(X_h)] - h A*f_u^2| on log h against the FFT oracle.
    """
    h_grid = np.asarray(h_grid, dtype=float)
    if len(h_grid) < 2:
        raise ValueError("slope regression needs at least two mesh values")
    from .design import square

    a_f = functionals.gen_star(model, f, u, 0.0)
    a_f2 = functionals.gen_star(model, square(f), u, 0.0)
    errs_m = np.empty(len(h_grid))
    errs_v = np.empty(len(h_grid))
    for i, h in enumerate(h_grid):
        mean, var = functionals.levy_moments(model, f, u, h)
        errs_m[i] = abs(mean - h * a_f)
        errs_v[i] = abs(var - h * a_f2)

    def fit(errs):
        lx = np.log(h_grid)
        ly = np.log(errs)
        n = len(lx)
        slope, intercept = np.polyfit(lx, ly, 1)
        resid = ly - (slope * lx + intercept)
        sxx = np.sum((lx - lx.mean()) ** 2)
        se = math.sqrt(np.sum(resid**2) / max(n - 2, 1) / sxx)
        return slope, se

    sm, sem = fit(errs_m)
    sv, sev = fit(errs_v)
    return Prop1Slopes(sm, sem, sv, sev, h_grid, errs_m, errs_v)


def s2_contour(gammas, alphas, f, settings=functionals.DEFAULT_SETTINGS):
    """Grid of the variance factor s^2(gamma, alpha, f); rows indexed by gamma."""
    gammas = np.asarray(gammas, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    grid = np.empty((len(gammas), len(alphas)))
    for i, g in enumerate(gammas):
        for j, a in enumerate(alphas):
            grid[i, j] = functionals.variance_factor_s2(float(g), float(a), f,
                                                        settings)
    return grid
