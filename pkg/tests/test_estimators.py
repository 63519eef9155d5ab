import math

import numpy as np
import pytest

from conftest import make_gaussian_path, make_levy_path
from jumpdiff.design import builtin_ja_f, design_function, register_design_function, rescale
from jumpdiff.estimators import (
    STATUS_DEGENERATE,
    STATUS_LOG_DOMAIN,
    STATUS_OK,
    EstimatorConfig,
    EstimatorError,
    KernelSpec,
    alpha_hat,
    audit_tuning,
    density_hat,
    estimate_curves,
    mu_hat,
    ratio_stat,
    rstar_hat,
    sigma2_hat,
)
from jumpdiff.simulate import PathSample, SimulationPlan


def flat_path(value=0.0, n=100, h=1e-3):
    values = np.full(n + 1, value)
    plan = SimulationPlan(horizon=n * h, mesh=h, burn_in=0.0)
    return PathSample(times=np.arange(n + 1) * h, values=values, plan=plan)


def path_from_values(values, h=1e-3):
    values = np.asarray(values, dtype=float)
    plan = SimulationPlan(horizon=(len(values) - 1) * h, mesh=h, burn_in=0.0)
    return PathSample(times=np.arange(len(values)) * h, values=values, plan=plan)


BASE = EstimatorConfig(kernel=KernelSpec("epanechnikov", 0.5), gamma=2.0,
                       x_grid=(0.0,))


class TestKernels:
    def test_g2_values(self):
        assert KernelSpec("epanechnikov", 0.5).g2_int == 0.6
        assert KernelSpec("uniform", 0.5).g2_int == 0.5
        assert KernelSpec("triangular", 0.5).g2_int == pytest.approx(2.0 / 3.0)

    def test_unknown_kernel(self):
        with pytest.raises(EstimatorError):
            KernelSpec("gauss", 0.5)

    def test_density_far_support_is_zero(self):
        path = flat_path(5.0)
        assert density_hat(path, KernelSpec("epanechnikov", 0.5), 0.0) == 0.0

    def test_density_single_observation_uniform(self):
        # one anchor exactly at x with the uniform kernel: 1/(2b)
        path = path_from_values([0.7, 0.7])
        b = 0.25
        val = density_hat(path, KernelSpec("uniform", b), 0.7)
        assert val == pytest.approx(1.0 / (2.0 * b), rel=1e-14)


class TestRatioStat:
    def test_zero_function(self):
        from test_functionals import zero_design

        path = flat_path(0.0)
        assert ratio_stat(path, BASE, zero_design(), 2.0, 0.0, 0.0) == 0.0

    def test_constant_path(self, ja_f):
        path = flat_path(0.0)
        assert ratio_stat(path, BASE, ja_f, 2.0, 0.0, 0.0) == 0.0

    def test_degenerate_window(self, ja_f):
        path = flat_path(3.0, n=30)
        with pytest.raises(EstimatorError, match=STATUS_DEGENERATE):
            ratio_stat(path, BASE, ja_f, 2.0, 0.0, 0.0)


class TestAlphaHat:
    def test_exact_cancellation_of_scale_exponent(self):
        path = make_levy_path(0, n=20_000)
        vals = [alpha_hat(path, BASE, 0.0, scale_exponent=a)
                for a in (0.0, 1.3, 1.9)]
        assert vals[0] == vals[1] == vals[2]

    def test_gamma_inversion(self):
        # estimating with (f, f_gamma) at gamma equals estimating with the
        # pair swapped at 1/gamma, up to the sign of log gamma
        register_design_function("ja_bump_g2",
                                 lambda: rescale(builtin_ja_f(), 2.0))
        path = make_levy_path(1, n=20_000)
        a_fwd = alpha_hat(path, BASE, 0.0)
        cfg_swap = EstimatorConfig(kernel=BASE.kernel, gamma=0.5,
                                   x_grid=(0.0,), f_ja="ja_bump_g2")
        a_swap = alpha_hat(path, cfg_swap, 0.0)
        assert a_fwd == pytest.approx(a_swap, abs=1e-12)

    def test_path_scaling_invariance(self):
        # scaling the path by c = 4 and u by 1/4 (with x, b scaled along)
        # leaves alpha_hat bit-identical: f(u dX) and the weights are invariant
        path = make_levy_path(2, n=20_000)
        c = 4.0
        scaled = path_from_values(c * path.values, h=path.mesh)
        cfg = EstimatorConfig(kernel=KernelSpec("epanechnikov", 0.5), gamma=2.0,
                              u_rule="explicit", u_value=8.0, x_grid=(0.0,))
        cfg_scaled = EstimatorConfig(kernel=KernelSpec("epanechnikov", 0.5 * c),
                                     gamma=2.0, u_rule="explicit", u_value=8.0 / c,
                                     x_grid=(0.0,))
        assert alpha_hat(path, cfg, 0.0) == alpha_hat(scaled, cfg_scaled, 0.0)

    def test_log_domain_violation(self, ja_f):
        # constant path: both kernel sums are zero
        path = flat_path(0.0)
        with pytest.raises(EstimatorError, match=STATUS_LOG_DOMAIN):
            alpha_hat(path, BASE, 0.0)
        curves = estimate_curves(path, BASE, which=("alpha",))
        row = curves["alpha"][0]
        assert math.isnan(row.estimate)
        assert row.status == STATUS_LOG_DOMAIN

    def test_clamped_value_on_violation(self):
        path = flat_path(0.0)
        cfg = EstimatorConfig(kernel=BASE.kernel, gamma=2.0, x_grid=(0.0,),
                              clamp_alpha=True)
        curves = estimate_curves(path, cfg, which=("alpha",))
        row = curves["alpha"][0]
        assert row.status == STATUS_LOG_DOMAIN
        assert 0.0 < row.estimate < 2.0

    def test_levy_desk_scale_median(self):
        # exact iid SaS(1.8) increments at T=10, h=1e-4; the plug-in band of
        # a single replication must cover the median over replications
        vals, sds = [], []
        for i in range(24):
            path = make_levy_path(i)
            cur = estimate_curves(path, BASE, which=("alpha",))["alpha"][0]
            vals.append(cur.estimate)
            sds.append(cur.sd)
        med = float(np.nanmedian(vals))
        sd = float(np.nanmedian(sds))
        assert abs(med - 1.8) <= 3.0 * sd


class TestRstarHat:
    def test_levy_desk_scale_band(self):
        # faithful transcription: the kernel sum is divided by n only, so at
        # desk scale the statistic concentrates near m(x) r(x); the stated
        # log(u)-inflated plug-in band still covers r = 1
        vals, sds, mhats = [], [], []
        for i in range(24):
            path = make_levy_path(i)
            row = estimate_curves(path, BASE, which=("rstar",))["rstar"][0]
            vals.append(row.estimate)
            sds.append(row.sd)
            mhats.append(row.mhat)
        u = BASE.resolve_u(10.0, 1e-4)
        med = float(np.nanmedian(vals))
        m_med = float(np.nanmedian(mhats))
        assert abs(med - m_med) <= 0.75 * m_med
        # plug-in alpha sd recovered from the stored rstar sd (val log(u) sd)
        sd_alpha = float(np.nanmedian(np.asarray(sds) / np.asarray(vals))) / math.log(u)
        assert abs(med - 1.0) <= 3.0 * math.log(u) * max(sd_alpha, 1.0)

    def test_fine_scale_normalized_recovery(self):
        # at h = 1e-6 the activity estimate is nearly unbiased and the
        # m_hat-normalized variant recovers r = 1 inside the inflated band
        cfg = EstimatorConfig(kernel=BASE.kernel, gamma=2.0, x_grid=(0.0,),
                              u_rule="explicit", u_value=6.2,
                              normalize_rstar_by_mhat=True)
        path = make_levy_path(0, n=4_000_000, h=1e-6, stream=2027)
        row = estimate_curves(path, cfg, which=("rstar",))["rstar"][0]
        assert row.status == STATUS_OK
        assert abs(row.estimate - 1.0) <= 3.0 * row.sd

    def test_zero_numerator(self):
        path = flat_path(0.0)
        with pytest.raises(EstimatorError):
            rstar_hat(path, BASE, 0.0)  # alpha_hat fails on zero sums first

    def test_alpha_domain_propagation(self):
        path = make_levy_path(3, n=20_000)
        with pytest.raises(EstimatorError, match=STATUS_LOG_DOMAIN):
            rstar_hat(path, BASE, 0.0, alpha=2.4)


class TestMuSigma:
    def test_mu_zero_drift_gaussian(self):
        path = make_gaussian_path(0, n=100_000, h=1e-3)
        cur = estimate_curves(path, BASE, which=("mu",))["mu"][0]
        assert cur.status == STATUS_OK
        assert abs(cur.estimate) <= 3.0 * cur.sd

    def test_sigma2_gaussian_controlled(self):
        # oracle (FFT cf inversion): E sigma2_hat = 0.9881 at h=1e-5, u=20
        path = make_gaussian_path(0, n=1_000_000, h=1e-5)
        cur = estimate_curves(path, BASE, which=("sigma2",))["sigma2"][0]
        assert abs(cur.estimate - 0.9881) <= 4.0 * cur.sd
        assert abs(cur.estimate - 1.0) <= 0.1

    def test_constant_path_zeroes(self, ja_f):
        path = flat_path(0.0)
        assert mu_hat(path, BASE, 0.0) == 0.0
        assert sigma2_hat(path, BASE, 0.0, u=20.0) == 0.0

    def test_sigma2_needs_u_above_one(self):
        path = flat_path(0.0)
        with pytest.raises(EstimatorError):
            sigma2_hat(path, BASE, 0.0, u=1.0)


class TestWindowInvariance:
    def test_kernel_locality_bit_identical(self):
        # altering observations whose pairs lie entirely outside the bandwidth
        # window leaves every estimator at x bit-identical
        rng = np.random.default_rng(7)
        inside = 0.3 * np.sin(np.linspace(0, 20, 60)) + 0.01 * rng.standard_normal(60)
        excursion = 5.0 + rng.random(30)
        values = np.concatenate([inside, excursion, inside])
        path_a = path_from_values(values)
        values_b = values.copy()
        values_b[62:88] += 1.3  # interior of the excursion: neighbours stay far
        path_b = path_from_values(values_b)
        for cfg_which in ("alpha", "rstar", "mu", "mu_filtered", "sigma2"):
            ra = estimate_curves(path_a, BASE, which=(cfg_which,))[cfg_which][0]
            rb = estimate_curves(path_b, BASE, which=(cfg_which,))[cfg_which][0]
            if math.isnan(ra.estimate):
                assert math.isnan(rb.estimate)
            else:
                assert ra.estimate == rb.estimate
            assert ra.mhat == rb.mhat
            assert ra.count == rb.count

    def test_degenerate_status(self):
        path = flat_path(0.0, n=5)
        curves = estimate_curves(path, BASE,
                                 which=("alpha", "rstar", "mu", "sigma2"))
        for rows in curves.values():
            assert rows[0].status == STATUS_DEGENERATE
            assert math.isnan(rows[0].estimate)

    def test_plug_in_sd_positive_when_ok(self):
        path = make_levy_path(5, n=50_000)
        curves = estimate_curves(path, BASE)
        for rows in curves.values():
            for row in rows:
                if row.status == STATUS_OK:
                    assert math.isfinite(row.sd) and row.sd > 0.0


class TestTuningAudit:
    def test_paper_scale_u(self):
        cfg = EstimatorConfig(kernel=KernelSpec("epanechnikov", 0.5),
                              u_rule="power", u_power=0.07)
        u = cfg.resolve_u(10.0, 1e-6)
        assert u == pytest.approx(6.2, abs=0.05)

    def test_products_reported(self):
        cfg = EstimatorConfig(kernel=KernelSpec("epanechnikov", 0.5))
        audit = audit_tuning(cfg, 10.0, 1e-4, alpha=1.9, delta=1.425)
        assert set(audit["products"]) == {"Tb_h2_u8ma", "Tb_u_am2d", "Tb3_ua_log2"}
        assert all(v > 0 for v in audit["products"].values())
        assert isinstance(audit["warnings"], list)

    def test_resolved_u_below_one_rejected(self):
        cfg = EstimatorConfig(u_rule="explicit", u_value=1.0)
        assert cfg.resolve_u(10.0, 1e-4) == 1.0
        cfg2 = EstimatorConfig(u_rule="power", u_power=-0.1)
        with pytest.raises(EstimatorError):
            cfg2.resolve_u(10.0, 1e-4)

    def test_gamma_one_rejected(self):
        with pytest.raises(EstimatorError):
            EstimatorConfig(gamma=1.0)

    def test_config_round_trip(self):
        cfg = EstimatorConfig(kernel=KernelSpec("uniform", 0.3), gamma=3.0,
                              u_rule="explicit", u_value=5.0,
                              x_grid=(-1.0, 0.0, 1.0), clamp_alpha=True)
        back = EstimatorConfig.from_dict(cfg.to_dict())
        assert back == cfg
