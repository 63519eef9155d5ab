"""JSON configuration loading, schema validation and default resolution.

Every run validates its configuration against the published schema before
any work starts, and every command writes back the fully resolved
configuration so a run can be replayed bit-exactly from its echo.
"""

from __future__ import annotations

import json
from importlib import resources

import jsonschema

from .estimators import EstimatorConfig

_SCHEMA = None


class ConfigError(ValueError):
    def __init__(self, message, field=""):
        super().__init__(message)
        self.field = field


def schema() -> dict:
    global _SCHEMA
    if _SCHEMA is None:
        with resources.files("jumpdiff").joinpath("schema.json").open() as fh:
            _SCHEMA = json.load(fh)
    return _SCHEMA


def validate(cfg: dict):
    try:
        jsonschema.validate(cfg, schema())
    except jsonschema.ValidationError as exc:
        field = ".".join(str(p) for p in exc.absolute_path) or "(root)"
        raise ConfigError(f"invalid configuration at '{field}': {exc.message}",
                          field=field) from exc


def load_config(path) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    validate(cfg)
    return cfg


def resolve(cfg: dict, seed_override=None) -> dict:
    """Materialize all defaults into a replayable configuration echo."""
    out = {}
    out["model"] = dict(cfg.get("model", {"kind": "example"}))

    sim = dict(cfg.get("simulation", {}))
    if sim:
        horizon = float(sim["horizon"])
        sim.setdefault("substeps", 4)
        if sim.get("burn_in") is None:
            sim["burn_in"] = 5.0 if horizon == 10.0 else horizon / 2.0
        sim.setdefault("x0", 0.0)
        sim.setdefault("seed", 0)
        sim.setdefault("paths", 1)
        if seed_override is not None:
            sim["seed"] = int(seed_override)
        out["simulation"] = sim

    est = cfg.get("estimator")
    if est is not None:
        if _is_single_estimator(est):
            out["estimator"] = EstimatorConfig.from_dict(est).to_dict()
        else:
            out["estimator"] = {
                label: EstimatorConfig.from_dict(sub).to_dict()
                for label, sub in est.items()
            }

    exp = cfg.get("experiment")
    if exp is not None:
        exp = dict(exp)
        exp.setdefault("master_seed", 0)
        exp.setdefault("outputs", ["alpha_curve"])
        if seed_override is not None:
            exp["master_seed"] = int(seed_override)
        out["experiment"] = exp

    for section in ("s2_contour", "prop1", "estimate"):
        if section in cfg:
            out[section] = dict(cfg[section])
    if "s2_contour" in out:
        out["s2_contour"].setdefault("gammas", [1.5, 2.0, 3.0, 4.0, 5.0])
        out["s2_contour"].setdefault("alphas", [1.65, 1.7, 1.75, 1.8, 1.85, 1.9])
        out["s2_contour"].setdefault("f", "ja_bump")
    if "prop1" in out:
        out["prop1"].setdefault("x", 0.0)
        out["prop1"].setdefault("u", 4.0)
        out["prop1"].setdefault("h_grid", [1e-4, 3e-4, 1e-3, 3e-3, 1e-2])
        out["prop1"].setdefault("f", "ja_bump")
    if "estimate" in out:
        out["estimate"].setdefault(
            "which", ["alpha", "rstar", "mu", "mu_filtered", "sigma2"]
        )
    validate(out)
    return out


def _is_single_estimator(est: dict) -> bool:
    single_keys = {"kernel", "gamma", "u_rule", "x_grid", "f_ja", "f_drift",
                   "f_sigma", "clamp_alpha", "u_filter", "u_sigma",
                   "normalize_rstar_by_mhat"}
    return not est or bool(set(est) & single_keys)


def estimator_configs(resolved: dict):
    """(labels, EstimatorConfigs) from a resolved configuration."""
    est = resolved.get("estimator")
    if est is None:
        return ("main",), (EstimatorConfig(),)
    if _is_single_estimator(est):
        return ("main",), (EstimatorConfig.from_dict(est),)
    labels = tuple(est.keys())
    return labels, tuple(EstimatorConfig.from_dict(est[k]) for k in labels)


def write_echo(resolved: dict, out_dir):
    import os

    path = os.path.join(out_dir, "config_echo.json")
    with open(path, "w") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
