"""Model definitions: state-dependent drift, diffusion and symmetric jump density.

A model is
    dX = mu(X) dt + sigma(X) dB + (stable-like jumps with spot density rho(x,.))
         + (optional independent compound-Poisson tail component),
with rho(x,z) = r(x)|z|^(-1-alpha(x)) (1+g(x,z)) on the stable-like branch.

Two built-in models: the mean-reverting example with
alpha(x) = 1.9 - arctan(x)^2/pi^2 plus a Student-t compound-Poisson tail,
and the "capped" construction whose density switches to alpha0|z|^(-1-alpha0)
beyond |z|=1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np

_FD_STEP = 1e-5  # central-difference step for derivative fallbacks
_PI2 = math.pi**2


def student_t_pdf(z, nu: float):
    """Student-t density, explicit form (faster than scipy.stats in tight loops)."""
    c = math.gamma((nu + 1.0) / 2.0) / (math.sqrt(nu * math.pi) * math.gamma(nu / 2.0))
    return c * (1.0 + np.asarray(z, dtype=float) ** 2 / nu) ** (-(nu + 1.0) / 2.0)


class ModelValidationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# state functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StateFunction:
    """A scalar function of the state with first/second derivatives.

    Derivatives can be supplied analytically; otherwise central differences
    with step 1e-5 are used.  Instances are immutable and safe to share
    across workers (use module-level callables so they pickle).
    """

    fn: Callable[[float], float]
    d1: Optional[Callable[[float], float]] = None
    d2: Optional[Callable[[float], float]] = None
    name: str = ""

    def eval(self, x):
        return self.fn(x)

    def eval_d1(self, x):
        if self.d1 is not None:
            return self.d1(x)
        return (self.fn(x + _FD_STEP) - self.fn(x - _FD_STEP)) / (2.0 * _FD_STEP)

    def eval_d2(self, x):
        if self.d2 is not None:
            return self.d2(x)
        return (self.fn(x + _FD_STEP) - 2.0 * self.fn(x) + self.fn(x - _FD_STEP)) / _FD_STEP**2


# named formulas (module level so StateFunctions pickle across workers)

def _const(x, value=0.0):
    return value * np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else value


def _zero_fn(x):
    return 0.0 * np.asarray(x, dtype=float) if np.ndim(x) else 0.0


def _linear(x, slope=1.0, intercept=0.0):
    return slope * np.asarray(x, dtype=float) + intercept if np.ndim(x) else slope * x + intercept


def _example_alpha(x, base=1.9):
    if np.ndim(x) == 0:
        return base - math.atan(x) ** 2 / _PI2
    return base - np.arctan(x) ** 2 / _PI2


def _example_alpha_d1(x, base=1.9):
    return -2.0 * np.arctan(x) / (_PI2 * (1.0 + x * x))


def _example_alpha_d2(x, base=1.9):
    return -2.0 * (1.0 - 2.0 * x * np.arctan(x)) / (_PI2 * (1.0 + x * x) ** 2)


def _scaled(x, inner=None, factor=1.0):
    return factor * inner(x)


def scalar_closure(sf: "StateFunction"):
    """A fast scalar float callable for the simulation hot loop.

    Built-in registry formulas (constants, linear, the arctan activity curve)
    are specialized away from their numpy implementations; anything else is
    returned as-is.
    """
    fn = sf.fn
    if isinstance(fn, partial):
        if fn.func is _const:
            v = float(fn.keywords.get("value", 0.0))
            return lambda x: v
        if fn.func is _linear:
            s = float(fn.keywords.get("slope", 1.0))
            c = float(fn.keywords.get("intercept", 0.0))
            return lambda x: s * x + c
        if fn.func is _scaled and fn.keywords.get("inner") is _example_alpha:
            fac = float(fn.keywords.get("factor", 1.0))
            return lambda x: fac * (1.9 - math.atan(x) ** 2 / _PI2)
    if fn is _example_alpha:
        return lambda x: 1.9 - math.atan(x) ** 2 / _PI2
    return fn


def constant_fn(value: float, name: str = "") -> StateFunction:
    return StateFunction(
        partial(_const, value=value), d1=_zero_fn, d2=_zero_fn,
        name=name or f"const({value})",
    )


def linear_fn(slope: float, intercept: float = 0.0, name: str = "") -> StateFunction:
    return StateFunction(
        partial(_linear, slope=slope, intercept=intercept),
        d1=partial(_const, value=slope), d2=_zero_fn,
        name=name or f"linear({slope},{intercept})",
    )


def example_alpha_fn(scale: float = 1.0) -> StateFunction:
    """alpha(x) = 1.9 - arctan(x)^2/pi^2, optionally multiplied by `scale`."""
    if scale == 1.0:
        return StateFunction(
            _example_alpha, d1=_example_alpha_d1, d2=_example_alpha_d2,
            name="example_alpha",
        )
    return StateFunction(
        partial(_scaled, inner=_example_alpha, factor=scale),
        d1=partial(_scaled, inner=_example_alpha_d1, factor=scale),
        d2=partial(_scaled, inner=_example_alpha_d2, factor=scale),
        name=f"{scale}*example_alpha",
    )


FORMULA_REGISTRY = {
    "zero": lambda p: constant_fn(0.0, name="zero"),
    "one": lambda p: constant_fn(1.0, name="one"),
    "const": lambda p: constant_fn(float(p["value"])),
    "linear": lambda p: linear_fn(float(p.get("slope", 1.0)), float(p.get("intercept", 0.0))),
    "neg_identity": lambda p: linear_fn(-1.0, 0.0, name="neg_identity"),
    "example_alpha": lambda p: example_alpha_fn(float(p.get("scale", 1.0))),
}


def state_function_from_config(cfg) -> StateFunction:
    """Build a StateFunction from {"name": ..., params...} (fixed registry, no parsing)."""
    if isinstance(cfg, (int, float)):
        return constant_fn(float(cfg))
    name = cfg.get("name")
    if name not in FORMULA_REGISTRY:
        raise ModelValidationError(
            f"unknown formula name {name!r}; known: {sorted(FORMULA_REGISTRY)}"
        )
    return FORMULA_REGISTRY[name](cfg)


# ---------------------------------------------------------------------------
# jump specification
# ---------------------------------------------------------------------------

TAIL_KINDS = ("pure_stable", "capped", "compound_poisson_t")


@dataclass(frozen=True)
class StableLikeJumpSpec:
    """Spot jump density r(x)|z|^(-1-alpha(x))(1+g(x,z)) plus a tail component.

    tail_kind:
      pure_stable          -- the stable-like density on all of R, nothing else
      capped               -- density alpha0|z|^(-1-alpha0) beyond |z|=1
                              (requires r(x) = alpha(x) on |z|<=1)
      compound_poisson_t   -- an independent compound-Poisson process with
                              intensity tail_poisson_rate and Student-t
                              (tail_exponent) jump sizes
    """

    alpha: StateFunction
    r: StateFunction
    delta: StateFunction
    g: Optional[Callable[[float, float], float]] = None
    tail_kind: str = "pure_stable"
    alpha0: float = 0.0
    tail_poisson_rate: float = 0.0
    tail_exponent: float = 2.0
    density_bound: float = 1.0   # C_rho, declared; audited only
    g_bound: float = 0.0         # C_g, declared; audited only

    def __post_init__(self):
        if self.tail_kind not in TAIL_KINDS:
            raise ModelValidationError(f"tail_kind must be one of {TAIL_KINDS}")
        if self.tail_kind == "capped" and not 0.0 < self.alpha0 < 2.0:
            raise ModelValidationError("capped tail needs alpha0 in (0,2)")
        if self.tail_exponent <= 1.0:
            raise ModelValidationError("tail_exponent must exceed 1")

    def g_eval(self, x, z):
        return 0.0 if self.g is None else self.g(x, z)

    def stable_density(self, x, z):
        """The stable-like branch of the density (capped beyond |z|=1)."""
        az = abs(z)
        if az == 0.0:
            raise ValueError("jump density has a non-integrable singularity at z=0")
        if self.tail_kind == "capped" and az > 1.0:
            return self.alpha0 * az ** (-1.0 - self.alpha0)
        a = self.alpha.eval(x)
        return self.r.eval(x) * az ** (-1.0 - a) * (1.0 + self.g_eval(x, z))

    def tail_intensity(self) -> float:
        """Total rate of the separately-simulated tail jump component."""
        if self.tail_kind == "compound_poisson_t":
            return self.tail_poisson_rate
        if self.tail_kind == "capped":
            # 2 * int_1^inf alpha0 z^(-1-alpha0) dz = 2, for any alpha0
            return 2.0
        return 0.0

    def tail_levy_density(self, z):
        """Levy density of the independent compound-Poisson component."""
        if self.tail_kind == "compound_poisson_t":
            return self.tail_poisson_rate * student_t_pdf(z, self.tail_exponent)
        return 0.0 if np.ndim(z) == 0 else np.zeros(np.shape(z))


@dataclass(frozen=True)
class ModelSpec:
    mu: StateFunction
    sigma2: StateFunction
    jumps: StableLikeJumpSpec
    growth_exponent_drift: float = 1.0   # p_D, declared
    growth_exponent_vol: float = 0.0     # p_V, declared
    name: str = "custom"
    config: dict = field(default_factory=dict, compare=False)

    def sigma(self, x) -> float:
        s2 = self.sigma2.eval(x)
        if s2 < 0:
            raise ModelValidationError(f"sigma2({x}) = {s2} < 0")
        return math.sqrt(s2)


def jump_density(model: ModelSpec, x: float, z: float) -> float:
    """Spot density rho(x,z) of the stable-like jump part, tail branch included.

    The independent compound-Poisson component (when present) is not part of
    rho; `total_levy_density` gives the aggregate Levy density seen by the
    observed increments.
    """
    val = model.jumps.stable_density(x, z)
    if val < 0:
        raise ModelValidationError(f"jump density negative at ({x},{z})")
    return val


def total_levy_density(model: ModelSpec, x: float, z: float) -> float:
    """Aggregate spot Levy density: stable-like part plus tail component."""
    return jump_density(model, x, z) + model.jumps.tail_levy_density(z)


# ---------------------------------------------------------------------------
# built-in models
# ---------------------------------------------------------------------------

def build_example_model() -> ModelSpec:
    """The mean-reverting example: dX = -X dt + dB + stable-like jumps + CP tail.

    mu(x) = -x, sigma2(x) = 1, rho(x,z) = |z|^(-1-alpha(x)) on all of R with
    alpha(x) = 1.9 - arctan(x)^2/pi^2 and r(x) = 1, plus an independent
    compound-Poisson component with unit intensity and Student-t(1.2) sizes.
    delta is declared as 0.75*alpha (smaller delta only weakens the declared
    perturbation bound, and the perturbation here is exactly zero).
    """
    jumps = StableLikeJumpSpec(
        alpha=example_alpha_fn(),
        r=constant_fn(1.0, name="one"),
        delta=example_alpha_fn(scale=0.75),
        tail_kind="compound_poisson_t",
        tail_poisson_rate=1.0,
        tail_exponent=1.2,
        density_bound=2.0,
        g_bound=0.0,
    )
    model = ModelSpec(
        mu=linear_fn(-1.0, 0.0, name="neg_identity"),
        sigma2=constant_fn(1.0, name="one"),
        jumps=jumps,
        growth_exponent_drift=1.0,
        growth_exponent_vol=0.0,
        name="example",
        config={"kind": "example"},
    )
    validate_model(model)
    return model


def build_capped_model(
    alpha0: float,
    alpha: StateFunction,
    mu: StateFunction,
    sigma2: StateFunction,
) -> ModelSpec:
    """Capped stable-like model: rho = alpha(x)|z|^(-1-alpha(x)) for |z|<=1,
    alpha0|z|^(-1-alpha0) for |z|>1.

    Requires alpha(x) < alpha0 on the diagnostic grid; the push-forward
    construction behind this density breaks otherwise.
    """
    grid = diagnostic_x_grid()
    avals = np.array([alpha.eval(float(x)) for x in grid])
    if np.any(avals >= alpha0):
        bad = float(grid[int(np.argmax(avals >= alpha0))])
        raise ModelValidationError(
            f"capped model needs alpha(x) < alpha0 everywhere; alpha({bad}) = "
            f"{alpha.eval(bad)} >= {alpha0}"
        )
    jumps = StableLikeJumpSpec(
        alpha=alpha,
        r=alpha,  # r(x) = alpha(x) makes the |z|<=1 branch alpha(x)|z|^(-1-alpha(x))
        delta=StateFunction(
            partial(_scaled, inner=alpha.fn, factor=0.75), name="0.75*alpha"
        ),
        tail_kind="capped",
        alpha0=alpha0,
        tail_exponent=alpha0 if alpha0 > 1.0 else 1.0 + 1e-6,
        density_bound=max(2.0, alpha0 + 1.0),
    )
    model = ModelSpec(
        mu=mu, sigma2=sigma2, jumps=jumps, name="capped",
        config={"kind": "capped", "alpha0": alpha0},
    )
    validate_model(model)
    return model


def build_levy_model(
    mu: float = 0.0,
    sigma2: float = 0.0,
    alpha: float = 1.8,
    r: float = 0.0,
    tail_kind: str = "pure_stable",
    tail_poisson_rate: float = 0.0,
    tail_exponent: float = 2.0,
    alpha0: float = 0.0,
    name: str = "levy",
) -> ModelSpec:
    """Constant-coefficient (Levy) model, used for controlled experiments."""
    jumps = StableLikeJumpSpec(
        alpha=constant_fn(alpha),
        r=constant_fn(r),
        delta=constant_fn(0.75 * alpha),
        tail_kind=tail_kind,
        alpha0=alpha0,
        tail_poisson_rate=tail_poisson_rate,
        tail_exponent=tail_exponent,
        density_bound=2.0,
    )
    return ModelSpec(
        mu=constant_fn(mu), sigma2=constant_fn(sigma2), jumps=jumps, name=name,
        config={
            "kind": "levy", "mu": mu, "sigma2": sigma2, "alpha": alpha, "r": r,
            "tail_kind": tail_kind, "tail_poisson_rate": tail_poisson_rate,
            "tail_exponent": tail_exponent, "alpha0": alpha0,
        },
    )


def _frozen_g(x, z, g=None, x0=0.0):
    return g(x0, z)


def freeze(model: ModelSpec, x0: float) -> ModelSpec:
    """Constant-coefficient restriction of `model` at state x0."""
    j = model.jumps
    jumps = StableLikeJumpSpec(
        alpha=constant_fn(float(j.alpha.eval(x0))),
        r=constant_fn(float(j.r.eval(x0))),
        delta=constant_fn(float(j.delta.eval(x0))),
        g=None if j.g is None else partial(_frozen_g, g=j.g, x0=x0),
        tail_kind=j.tail_kind,
        alpha0=j.alpha0,
        tail_poisson_rate=j.tail_poisson_rate,
        tail_exponent=j.tail_exponent,
        density_bound=j.density_bound,
        g_bound=j.g_bound,
    )
    return ModelSpec(
        mu=constant_fn(float(model.mu.eval(x0))),
        sigma2=constant_fn(float(model.sigma2.eval(x0))),
        jumps=jumps,
        name=f"{model.name}@x={x0}",
        config={"kind": "frozen", "base": model.config, "x0": x0},
    )


def build_model_from_config(cfg: dict) -> ModelSpec:
    """Model from a JSON-style dict: {"kind": "example"|"capped"|"custom"|"levy", ...}."""
    kind = cfg.get("kind")
    if kind == "example":
        return build_example_model()
    if kind == "capped":
        return build_capped_model(
            alpha0=float(cfg["alpha0"]),
            alpha=state_function_from_config(cfg["alpha"]),
            mu=state_function_from_config(cfg.get("mu", {"name": "neg_identity"})),
            sigma2=state_function_from_config(cfg.get("sigma2", {"name": "one"})),
        )
    if kind == "levy":
        keys = ("mu", "sigma2", "alpha", "r", "tail_kind", "tail_poisson_rate",
                "tail_exponent", "alpha0")
        return build_levy_model(**{k: cfg[k] for k in keys if k in cfg})
    if kind == "frozen":
        return freeze(build_model_from_config(cfg["base"]), float(cfg["x0"]))
    if kind == "custom":
        jumps = StableLikeJumpSpec(
            alpha=state_function_from_config(cfg["alpha"]),
            r=state_function_from_config(cfg["r"]),
            delta=state_function_from_config(cfg.get("delta", cfg["alpha"])),
            tail_kind=cfg.get("tail_kind", "pure_stable"),
            alpha0=float(cfg.get("alpha0", 0.0)),
            tail_poisson_rate=float(cfg.get("tail_poisson_rate", 0.0)),
            tail_exponent=float(cfg.get("tail_exponent", 2.0)),
            density_bound=float(cfg.get("density_bound", 2.0)),
            g_bound=float(cfg.get("g_bound", 0.0)),
        )
        model = ModelSpec(
            mu=state_function_from_config(cfg["mu"]),
            sigma2=state_function_from_config(cfg["sigma2"]),
            jumps=jumps,
            name="custom",
            config=cfg,
        )
        validate_model(model)
        return model
    raise ModelValidationError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def diagnostic_x_grid(n: int = 101):
    return np.linspace(-5.0, 5.0, n)


def diagnostic_z_grid(n: int = 50):
    mags = np.logspace(-3, 2, n)
    return np.concatenate([-mags[::-1], mags])


def validate_model(model: ModelSpec):
    """Hard checks on the diagnostic grid; raises ModelValidationError."""
    xs = diagnostic_x_grid()
    j = model.jumps
    for x in xs:
        a = j.alpha.eval(float(x))
        if not 0.0 < a < 2.0:
            raise ModelValidationError(f"alpha({x}) = {a} outside (0,2)")
        if model.sigma2.eval(float(x)) < 0.0:
            raise ModelValidationError(f"sigma2({x}) < 0")
        if j.r.eval(float(x)) < 0.0:
            raise ModelValidationError(f"r({x}) < 0")
        d = j.delta.eval(float(x))
        if not 0.0 < d <= a:
            raise ModelValidationError(f"delta({x}) = {d} outside (0, alpha(x)]")


@dataclass
class ModelAudit:
    symmetry_residual: float
    tail_bound_margin: float        # min of C_rho*|z|^(-1-tau) - rho over the tail grid
    g_symmetry_residual: float
    g_bound_margin: float
    derivative_rel_errors: dict
    alpha_range: tuple
    ok: bool
    messages: list


def audit_model(model: ModelSpec, deriv_rtol: float = 1e-4) -> ModelAudit:
    """Grid audit of the declared regularity: symmetry, tail bound, derivatives."""
    xs = diagnostic_x_grid(51)
    zs = np.logspace(-3, 2, 50)
    j = model.jumps
    msgs = []

    sym = 0.0
    for x in xs[::5]:
        for z in zs:
            sym = max(sym, abs(total_levy_density(model, float(x), float(z))
                               - total_levy_density(model, float(x), float(-z))))

    tail_margin = math.inf
    tau = j.tail_exponent
    for x in xs[::5]:
        for z in zs[zs >= 1.0]:
            bound = j.density_bound * z ** (-1.0 - tau)
            tail_margin = min(tail_margin, bound - total_levy_density(model, float(x), float(z)))
    if tail_margin < 0:
        msgs.append(f"declared tail bound violated by {-tail_margin:.3g}")

    g_sym = 0.0
    g_margin = math.inf
    if j.g is not None:
        for x in xs[::5]:
            for z in zs[zs <= 1.0]:
                g_sym = max(g_sym, abs(j.g_eval(float(x), float(z)) - j.g_eval(float(x), float(-z))))
                d = j.delta.eval(float(x))
                g_margin = min(g_margin, j.g_bound * z**d - abs(j.g_eval(float(x), float(z))))
        if g_margin < 0:
            msgs.append(f"declared |g| <= C_g |z|^delta violated by {-g_margin:.3g}")

    deriv_errs = {}
    for label, sf in (("mu", model.mu), ("sigma2", model.sigma2),
                      ("alpha", j.alpha), ("r", j.r)):
        if sf.d1 is None:
            continue
        worst = 0.0
        for x in xs:
            x = float(x)
            fd = (sf.eval(x + _FD_STEP) - sf.eval(x - _FD_STEP)) / (2 * _FD_STEP)
            an = sf.eval_d1(x)
            worst = max(worst, abs(an - fd) / max(1.0, abs(an)))
        deriv_errs[label] = worst
        if worst > deriv_rtol:
            msgs.append(f"analytic d1 of {label} deviates from central differences by {worst:.3g}")

    avals = [j.alpha.eval(float(x)) for x in xs]
    return ModelAudit(
        symmetry_residual=sym,
        tail_bound_margin=tail_margin,
        g_symmetry_residual=g_sym,
        g_bound_margin=g_margin,
        derivative_rel_errors=deriv_errs,
        alpha_range=(min(avals), max(avals)),
        ok=not msgs,
        messages=msgs,
    )
