import math

import numpy as np
import pytest
from scipy import integrate

from jumpdiff.models import (
    ModelValidationError,
    StateFunction,
    audit_model,
    build_capped_model,
    build_example_model,
    build_levy_model,
    build_model_from_config,
    constant_fn,
    example_alpha_fn,
    freeze,
    jump_density,
    linear_fn,
    state_function_from_config,
    student_t_pdf,
    total_levy_density,
)


class TestExampleModel:
    def test_alpha_at_zero(self, example_model):
        assert example_model.jumps.alpha.eval(0.0) == pytest.approx(1.9, abs=1e-15)

    def test_alpha_at_infinity(self, example_model):
        # arctan -> pi/2, so alpha -> 1.9 - 1/4 = 1.65
        assert example_model.jumps.alpha.eval(1e12) == pytest.approx(1.65, abs=1e-9)
        assert example_model.jumps.alpha.eval(-1e12) == pytest.approx(1.65, abs=1e-9)

    def test_drift(self, example_model):
        assert example_model.mu.eval(2.0) == -2.0
        assert example_model.sigma2.eval(3.7) == 1.0

    def test_jump_density_at_unit_z(self, example_model):
        # stable-like branch: 1 * 1^(-1-1.9) = 1 (the independent CP tail is
        # reported separately; see total_levy_density)
        assert jump_density(example_model, 0.0, 1.0) == pytest.approx(1.0, abs=1e-14)

    def test_total_density_includes_tail(self, example_model):
        expected = 1.0 + student_t_pdf(1.0, 1.2)
        assert total_levy_density(example_model, 0.0, 1.0) == pytest.approx(
            expected, rel=1e-12)

    def test_density_symmetry_grid(self, example_model):
        xs = np.linspace(-5, 5, 50)
        zs = np.logspace(-3, 2, 50)
        for x in xs:
            fx = [total_levy_density(example_model, float(x), float(z)) for z in zs]
            fneg = [total_levy_density(example_model, float(x), float(-z)) for z in zs]
            assert fx == fneg  # symmetric by construction, exactly

    def test_density_tail_bound(self, example_model):
        # declared C_rho |z|^(-1-tau) dominates the aggregate density on [1,100]
        j = example_model.jumps
        for x in (-4.0, -1.0, 0.0, 2.0):
            for z in np.logspace(0, 2, 40):
                bound = j.density_bound * z ** (-1.0 - j.tail_exponent)
                assert total_levy_density(example_model, x, float(z)) <= bound

    def test_density_singularity_rejected(self, example_model):
        with pytest.raises(ValueError):
            jump_density(example_model, 0.0, 0.0)

    def test_zero_scale_pure_stable(self):
        model = build_levy_model(r=0.0, alpha=1.5)
        assert jump_density(model, 0.0, 0.5) == 0.0

    def test_audit_clean(self, example_model):
        audit = audit_model(example_model)
        assert audit.ok, audit.messages
        assert audit.symmetry_residual == 0.0
        assert audit.alpha_range[0] > 1.64 and audit.alpha_range[1] <= 1.9


class TestCappedModel:
    @staticmethod
    def build(alpha0=1.9, a=1.5):
        return build_capped_model(
            alpha0=alpha0,
            alpha=constant_fn(a),
            mu=linear_fn(-1.0),
            sigma2=constant_fn(1.0),
        )

    def test_tail_branch(self):
        model = self.build()
        for z in (1.5, 3.0, 40.0):
            assert jump_density(model, 0.7, z) == pytest.approx(
                1.9 * z ** (-2.9), rel=1e-14)

    def test_core_branch(self):
        # alpha(0)=1.5: rho(0, 0.5) = 1.5 * 0.5^(-2.5)
        model = self.build()
        assert jump_density(model, 0.0, 0.5) == pytest.approx(
            1.5 * 0.5 ** (-2.5), rel=1e-14)

    def test_symmetry(self):
        model = self.build()
        for x in (-2.0, 0.0, 1.3):
            for z in (0.2, 0.9, 1.1, 7.0):
                assert jump_density(model, x, z) == jump_density(model, x, -z)

    def test_precondition_rejected(self):
        with pytest.raises(ModelValidationError):
            self.build(alpha0=1.4, a=1.5)

    def test_tail_integral(self):
        # int_a^inf rho(x,z) dz = a^-alpha(x) for a <= 1 and a^-alpha0 beyond
        # (the minimum of the two branches when alpha(x) < alpha0)
        model = self.build()
        for a in (0.3, 0.7, 1.0, 2.0, 5.0):
            val, err = integrate.quad(
                lambda z: jump_density(model, 0.0, z), a, np.inf,
                points=[1.0] if a < 1.0 else None, limit=300,
                epsabs=1e-12, epsrel=1e-11,
            )
            expected = a**-1.5 if a <= 1.0 else a**-1.9
            assert val == pytest.approx(expected, abs=1e-8)


class TestStateFunction:
    def test_central_difference_fallback(self):
        sf = StateFunction(lambda x: x**3)
        assert sf.eval_d1(2.0) == pytest.approx(12.0, rel=1e-6)
        assert sf.eval_d2(2.0) == pytest.approx(12.0, rel=1e-3)

    def test_analytic_derivatives_used(self):
        sf = example_alpha_fn()
        x = 0.8
        fd = (sf.eval(x + 1e-5) - sf.eval(x - 1e-5)) / 2e-5
        assert sf.eval_d1(x) == pytest.approx(fd, rel=1e-4)

    def test_vectorized_eval(self):
        sf = example_alpha_fn()
        xs = np.array([0.0, 1.0, -1.0])
        np.testing.assert_allclose(sf.eval(xs), [1.9, 1.8375, 1.8375], rtol=1e-3)


class TestFreeze:
    def test_freeze_constantness(self, example_model):
        frozen = freeze(example_model, 0.5)
        a = frozen.jumps.alpha.eval(0.0)
        assert a == example_model.jumps.alpha.eval(0.5)
        assert frozen.jumps.alpha.eval(-3.0) == a
        assert frozen.mu.eval(10.0) == -0.5


class TestConfig:
    def test_example_round_trip(self):
        model = build_model_from_config({"kind": "example"})
        assert model.name == "example"

    def test_levy_round_trip(self):
        cfg = {"kind": "levy", "mu": 0.3, "sigma2": 1.0, "alpha": 1.8, "r": 0.1}
        model = build_model_from_config(cfg)
        assert model.mu.eval(99.0) == 0.3
        assert model.jumps.alpha.eval(0.0) == 1.8

    def test_capped_config(self):
        cfg = {"kind": "capped", "alpha0": 1.9, "alpha": {"name": "const", "value": 1.5}}
        model = build_model_from_config(cfg)
        assert jump_density(model, 0.0, 2.0) == pytest.approx(1.9 * 2.0**-2.9)

    def test_custom_config(self):
        cfg = {
            "kind": "custom",
            "mu": {"name": "linear", "slope": -0.5},
            "sigma2": {"name": "const", "value": 0.25},
            "alpha": {"name": "const", "value": 1.7},
            "r": {"name": "const", "value": 0.4},
        }
        model = build_model_from_config(cfg)
        assert jump_density(model, 0.0, 1.0) == pytest.approx(0.4)

    def test_unknown_formula_rejected(self):
        with pytest.raises(ModelValidationError):
            state_function_from_config({"name": "parse_me(x**2)"})

    def test_unknown_kind_rejected(self):
        with pytest.raises(ModelValidationError):
            build_model_from_config({"kind": "garbage"})

    def test_frozen_config(self):
        model = build_model_from_config(
            {"kind": "frozen", "base": {"kind": "example"}, "x0": 1.0})
        assert model.jumps.alpha.eval(50.0) == pytest.approx(1.8375, abs=1e-4)

    def test_invalid_sigma2_rejected(self):
        cfg = {
            "kind": "custom",
            "mu": 0.0,
            "sigma2": {"name": "const", "value": -1.0},
            "alpha": {"name": "const", "value": 1.7},
            "r": {"name": "const", "value": 0.4},
        }
        with pytest.raises(ModelValidationError):
            build_model_from_config(cfg)
