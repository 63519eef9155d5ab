"""Test functions used by the estimators, with analytic derivatives up to order 4.

Three classes, named after the conditions they satisfy at the origin:
  F             -- bounded, f(0)=f'(0)=f''(0)=0, rapidly decaying derivatives
  F_prime       -- bounded odd, f'(0) != 0 (drift estimation)
  F_doubleprime -- bounded, f'(0)=0, f''(0) != 0 (volatility estimation)

Built-ins: the odd Gaussian antiderivative (drift), the flat-bottomed bump
exp(-1/(|x|-0.1)) vanishing on [-0.1, 0.1] (jump activity), and x^2 exp(-x^2)
(volatility).  All evaluate elementwise on numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import partial
from typing import Callable, Tuple

import numpy as np
from scipy import special

KLASS_F = "F"
KLASS_F_PRIME = "F_prime"
KLASS_F_DOUBLEPRIME = "F_doubleprime"

# keep the zero branch slightly beyond the matching point so exp(-1/(|x|-zeta))
# never sees a vanishing denominator
_EDGE_PAD = 1e-12


@dataclass(frozen=True)
class DesignFunction:
    fn: Callable
    d: Tuple[Callable, Callable, Callable, Callable]
    klass: str
    vanish_radius: float = 0.0
    sup_bound: float = 1.0  # analytic bound on |f|, used for quadrature tails
    name: str = ""

    def __call__(self, x):
        return self.fn(x)

    def eval(self, x):
        return self.fn(x)

    def deriv(self, k: int, x):
        if not 1 <= k <= 4:
            raise ValueError("derivative order must be 1..4")
        return self.d[k - 1](x)


# -- drift design function: f(x) = int_0^x exp(-y^2) dy ----------------------

_SQRT_PI_2 = math.sqrt(math.pi) / 2.0


def _erf_f(x):
    return _SQRT_PI_2 * special.erf(x)


def _erf_d1(x):
    return np.exp(-np.asarray(x, dtype=float) ** 2)


def _erf_d2(x):
    x = np.asarray(x, dtype=float)
    return -2.0 * x * np.exp(-(x**2))


def _erf_d3(x):
    x = np.asarray(x, dtype=float)
    return (4.0 * x**2 - 2.0) * np.exp(-(x**2))


def _erf_d4(x):
    x = np.asarray(x, dtype=float)
    return (12.0 * x - 8.0 * x**3) * np.exp(-(x**2))


def builtin_drift_f() -> DesignFunction:
    """Odd antiderivative of the Gaussian bump; class F_prime, f'(0)=1."""
    return DesignFunction(
        fn=_erf_f,
        d=(_erf_d1, _erf_d2, _erf_d3, _erf_d4),
        klass=KLASS_F_PRIME,
        vanish_radius=0.0,
        sup_bound=_SQRT_PI_2,
        name="drift_erf",
    )


# -- jump-activity bump: exp(-1/(|x|-0.1)) beyond |x|=0.1 --------------------

def _bump_poly(w, k):
    # d^k/dw^k exp(-1/w) = exp(-1/w) * P_k(w) / w^(2k)
    if k == 0:
        return np.ones_like(w)
    if k == 1:
        return np.ones_like(w)
    if k == 2:
        return 1.0 - 2.0 * w
    if k == 3:
        return 6.0 * w**2 - 6.0 * w + 1.0
    if k == 4:
        return -24.0 * w**3 + 36.0 * w**2 - 12.0 * w + 1.0
    raise ValueError(k)


def _bump_eval(x, zeta=0.1, k=0):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    inside = ax <= zeta + _EDGE_PAD
    w = np.where(inside, 1.0, ax - zeta)  # safe placeholder inside
    val = np.exp(-1.0 / w) * _bump_poly(w, k) / w ** (2 * k)
    if k % 2 == 1:
        val = val * np.sign(x)  # odd derivative orders pick up the |x| sign
    out = np.where(inside, 0.0, val)
    return out if out.ndim else float(out)


def builtin_ja_f(zeta: float = 0.1) -> DesignFunction:
    """Flat-bottomed even bump exp(-1/(|x|-zeta)) for |x| >= zeta; class F.

    All one-sided derivatives vanish at |x|=zeta, so the analytic derivatives
    use an explicit zero branch on [-zeta, zeta].
    """
    return DesignFunction(
        fn=partial(_bump_eval, zeta=zeta, k=0),
        d=tuple(partial(_bump_eval, zeta=zeta, k=k) for k in (1, 2, 3, 4)),
        klass=KLASS_F,
        vanish_radius=zeta,
        sup_bound=1.0,
        name="ja_bump",
    )


# -- volatility design function: x^2 exp(-x^2) -------------------------------

def _sig_eval(x, k=0):
    x = np.asarray(x, dtype=float)
    e = np.exp(-(x**2))
    if k == 0:
        p = x**2
    elif k == 1:
        p = 2.0 * x - 2.0 * x**3
    elif k == 2:
        p = 2.0 - 10.0 * x**2 + 4.0 * x**4
    elif k == 3:
        p = -24.0 * x + 36.0 * x**3 - 8.0 * x**5
    elif k == 4:
        p = -24.0 + 156.0 * x**2 - 112.0 * x**4 + 16.0 * x**6
    else:
        raise ValueError(k)
    out = p * e
    return out if out.ndim else float(out)


def builtin_sigma_f() -> DesignFunction:
    """Even bump x^2 exp(-x^2); class F_doubleprime with f''(0) = 2."""
    return DesignFunction(
        fn=partial(_sig_eval, k=0),
        d=tuple(partial(_sig_eval, k=k) for k in (1, 2, 3, 4)),
        klass=KLASS_F_DOUBLEPRIME,
        vanish_radius=0.0,
        sup_bound=math.exp(-1.0),
        name="sigma_bump",
    )


# -- transforms ---------------------------------------------------------------

def _rescaled(x, base=None, u=1.0, k=0):
    if k == 0:
        return base.fn(u * x)
    return u**k * base.d[k - 1](u * x)


def rescale(f: DesignFunction, u: float) -> DesignFunction:
    """f_u(x) = f(u x), with f_u^(k)(x) = u^k f^(k)(ux); class preserved."""
    if u <= 0:
        raise ValueError("rescale factor must be positive")
    if u == 1.0:
        return f
    return DesignFunction(
        fn=partial(_rescaled, base=f, u=u, k=0),
        d=tuple(partial(_rescaled, base=f, u=u, k=k) for k in (1, 2, 3, 4)),
        klass=f.klass,
        vanish_radius=f.vanish_radius / u,
        sup_bound=f.sup_bound,
        name=f"{f.name}_u{u:g}",
    )


def _squared(x, base=None, k=0):
    f = base.fn(x)
    if k == 0:
        return f * f
    d1 = base.d[0](x)
    if k == 1:
        return 2.0 * f * d1
    d2 = base.d[1](x)
    if k == 2:
        return 2.0 * (d1 * d1 + f * d2)
    d3 = base.d[2](x)
    if k == 3:
        return 2.0 * (3.0 * d1 * d2 + f * d3)
    d4 = base.d[3](x)
    return 2.0 * (3.0 * d2 * d2 + 4.0 * d1 * d3 + f * d4)


def square(f: DesignFunction) -> DesignFunction:
    """f^2 with Leibniz derivatives; F -> F, F_prime -> F_doubleprime."""
    if f.klass == KLASS_F_PRIME:
        klass = KLASS_F_DOUBLEPRIME
    elif f.klass == KLASS_F_DOUBLEPRIME:
        klass = KLASS_F
    else:
        klass = KLASS_F
    return DesignFunction(
        fn=partial(_squared, base=f, k=0),
        d=tuple(partial(_squared, base=f, k=k) for k in (1, 2, 3, 4)),
        klass=klass,
        vanish_radius=f.vanish_radius,
        sup_bound=f.sup_bound**2,
        name=f"{f.name}^2",
    )


# -- registry -----------------------------------------------------------------

_REGISTRY = {
    "drift_erf": builtin_drift_f,
    "ja_bump": builtin_ja_f,
    "sigma_bump": builtin_sigma_f,
}


def register_design_function(name: str, builder: Callable[[], DesignFunction]):
    _REGISTRY[name] = builder


def design_function(name: str) -> DesignFunction:
    if name not in _REGISTRY:
        raise KeyError(f"unknown design function {name!r}; known: {sorted(_REGISTRY)}")
    return _REGISTRY[name]()


# -- class audit ---------------------------------------------------------------

@dataclass
class ClassAudit:
    name: str
    klass: str
    f0: float
    d1_0: float
    d2_0: float
    odd_residual: float
    even_residual: float
    weighted_norms: dict  # (k, p) -> finite-grid sup |f^(k)(x)| (|x| v 1)^p
    klass_consistent: bool
    messages: list


def _norm_grid():
    mags = np.logspace(-8, math.log10(50.0), 5000)
    return np.concatenate([-mags[::-1], [0.0], mags])


def check_class(f: DesignFunction, tol: float = 1e-10) -> ClassAudit:
    """Audit report: origin conditions, parity residuals, weighted-norm decay.

    Weighted norms ||f^(k)||_{inf,p} are finite-grid suprema over |x| <= 50;
    they diagnose the faster-than-polynomial decay of the derivatives and are
    not a gate.
    """
    grid = _norm_grid()
    pos = grid[grid > 0]
    f0 = float(f.fn(0.0))
    d1_0 = float(f.d[0](0.0))
    d2_0 = float(f.d[1](0.0))
    fv_pos = np.asarray(f.fn(pos), dtype=float)
    fv_neg = np.asarray(f.fn(-pos), dtype=float)
    odd_res = float(np.max(np.abs(fv_pos + fv_neg)))
    even_res = float(np.max(np.abs(fv_pos - fv_neg)))

    weight = np.maximum(np.abs(grid), 1.0)
    norms = {}
    for k in (1, 2, 3, 4):
        dv = np.abs(np.asarray(f.d[k - 1](grid), dtype=float))
        for p in (1, 3, 5):
            norms[(k, p)] = float(np.max(dv * weight**p))

    msgs = []
    if abs(f0) > tol:
        msgs.append(f"f(0) = {f0}")
    if f.klass == KLASS_F:
        if abs(d1_0) > tol or abs(d2_0) > tol:
            msgs.append("class F requires f'(0) = f''(0) = 0")
    elif f.klass == KLASS_F_PRIME:
        if odd_res > 1e-8:
            msgs.append(f"class F_prime requires odd f (residual {odd_res:.3g})")
        if abs(d1_0) <= tol:
            msgs.append("class F_prime requires f'(0) != 0")
    elif f.klass == KLASS_F_DOUBLEPRIME:
        if abs(d1_0) > tol:
            msgs.append("class F_doubleprime requires f'(0) = 0")
        if abs(d2_0) <= tol:
            msgs.append("class F_doubleprime requires f''(0) != 0")
    return ClassAudit(
        name=f.name,
        klass=f.klass,
        f0=f0,
        d1_0=d1_0,
        d2_0=d2_0,
        odd_residual=odd_res,
        even_residual=even_res,
        weighted_norms=norms,
        klass_consistent=not msgs,
        messages=msgs,
    )


def grid_sup_norm(f: DesignFunction, deriv: int = 0) -> float:
    """Finite-grid sup norm of f or one of its derivatives (audit helper)."""
    grid = _norm_grid()
    vals = f.fn(grid) if deriv == 0 else f.d[deriv - 1](grid)
    return float(np.max(np.abs(np.asarray(vals, dtype=float))))
