"""Figure rendering for experiment outputs.

Renders the quartile-band curves and the variance-factor contour to PNG
files next to the CSV data.  Figures carry no timestamps so re-runs
reproduce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_META = {"Software": "jumpdiff"}

_TRUTH_LABELS = {
    "alpha": r"$\alpha(x)$",
    "rstar": r"$r(x)$",
    "mu": r"$\mu(x)$",
    "mu_filtered": r"$\mu(x)$",
    "sigma2": r"$\sigma^2(x)$",
}


def truth_curve(model, est_name, xs):
    xs = np.asarray(xs, dtype=float)
    if est_name in ("alpha",):
        return np.array([model.jumps.alpha.eval(float(x)) for x in xs])
    if est_name == "rstar":
        return np.array([model.jumps.r.eval(float(x)) for x in xs])
    if est_name in ("mu", "mu_filtered"):
        return np.array([model.mu.eval(float(x)) for x in xs])
    if est_name == "sigma2":
        return np.array([model.sigma2.eval(float(x)) for x in xs])
    return None


def save_quantile_figure(curves, fname, model=None, title=""):
    """Pointwise quartile bands with the plug-in asymptotic band overlay."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    x = curves.x
    ax.plot(x, curves.q50, "-", color="C0", label="median")
    ax.plot(x, curves.q25, "--", color="C0", lw=0.9, label="quartiles")
    ax.plot(x, curves.q75, "--", color="C0", lw=0.9)
    truth = truth_curve(model, curves.name, x) if model is not None else None
    if truth is not None:
        ax.plot(x, truth, "-", color="k", lw=1.0,
                label=_TRUTH_LABELS.get(curves.name, "truth"))
        band = 0.6745 * curves.sd_asym  # quartiles of the asymptotic normal law
        ax.fill_between(x, truth - band, truth + band, color="C1", alpha=0.25,
                        label="asymptotic quartile band")
    ax.set_xlabel("x")
    ax.set_ylabel(curves.name)
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(fname, dpi=150, metadata=_META)
    plt.close(fig)
    return fname


def save_contour_figure(gammas, alphas, grid, fname, title=""):
    """Contour of s^2(gamma, alpha, f) over the (gamma, alpha) plane."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    gg, aa = np.meshgrid(alphas, gammas)
    cs = ax.contourf(aa, gg, grid, levels=12, cmap="viridis")
    ax.contour(aa, gg, grid, levels=12, colors="k", linewidths=0.4)
    fig.colorbar(cs, ax=ax, label=r"$s^2(\gamma,\alpha,f)$")
    ax.set_xlabel(r"$\gamma$")
    ax.set_ylabel(r"$\alpha$")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(fname, dpi=150, metadata=_META)
    plt.close(fig)
    return fname


def save_slope_figure(slopes, fname, title=""):
    """Log-log error decay of the conditional-moment approximation."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.loglog(slopes.h_grid, slopes.err_mean, "o-",
              label=f"mean err (slope {slopes.slope_mean:.2f})")
    ax.loglog(slopes.h_grid, slopes.err_var, "s-",
              label=f"var err (slope {slopes.slope_var:.2f})")
    ax.set_xlabel("h")
    ax.set_ylabel("|first-order error|")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(fname, dpi=150, metadata=_META)
    plt.close(fig)
    return fname
