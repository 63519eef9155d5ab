import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from jumpdiff.design import (
    KLASS_F,
    KLASS_F_DOUBLEPRIME,
    KLASS_F_PRIME,
    builtin_drift_f,
    builtin_ja_f,
    builtin_sigma_f,
    check_class,
    design_function,
    register_design_function,
    rescale,
    square,
)


class TestDriftF:
    def test_origin(self, drift_f):
        assert drift_f.fn(0.0) == 0.0
        assert drift_f.d[0](0.0) == 1.0

    def test_value_at_5(self, drift_f):
        # oracle: adaptive quadrature of exp(-y^2) on [0, 5]
        oracle, err = integrate.quad(lambda y: math.exp(-y * y), 0.0, 5.0,
                                     epsabs=1e-13)
        assert err < 1e-12
        assert drift_f.fn(5.0) == pytest.approx(oracle, abs=1e-12)
        assert oracle == pytest.approx(0.886227, abs=1e-6)

    def test_oddness(self, drift_f):
        z = np.linspace(0.01, 6.0, 200)
        np.testing.assert_array_equal(drift_f.fn(z), -np.asarray(drift_f.fn(-z)))

    def test_klass(self, drift_f):
        assert drift_f.klass == KLASS_F_PRIME


class TestJaF:
    def test_vanishes_inside_radius(self, ja_f):
        for x in (0.0, 0.05, -0.09, 0.1):
            assert ja_f.fn(x) == 0.0

    def test_value_just_outside(self, ja_f):
        assert ja_f.fn(1.1) == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_evenness(self, ja_f):
        z = np.linspace(0.0, 5.0, 300)
        np.testing.assert_array_equal(ja_f.fn(z), ja_f.fn(-z))

    def test_origin_conditions(self, ja_f):
        assert ja_f.fn(0.0) == ja_f.d[0](0.0) == ja_f.d[1](0.0) == 0.0
        assert ja_f.klass == KLASS_F
        assert ja_f.vanish_radius == 0.1


class TestSigmaF:
    def test_second_derivative_at_zero(self, sigma_f):
        assert sigma_f.d[1](0.0) == 2.0
        assert sigma_f.d[0](0.0) == 0.0
        assert sigma_f.klass == KLASS_F_DOUBLEPRIME


class TestDerivativeAudit:
    # analytic derivatives must match central differences away from the
    # non-smooth matching radius
    @pytest.mark.parametrize("name", ["drift_erf", "ja_bump", "sigma_bump"])
    def test_first_four_derivatives(self, name):
        f = design_function(name)
        xs = np.concatenate([np.linspace(-4, 4, 81)])
        if f.vanish_radius:
            xs = xs[np.abs(np.abs(xs) - f.vanish_radius) > 0.15]
        eps = 1e-5
        fns = [f.fn] + [f.d[k] for k in range(3)]
        for k in range(1, 5):
            lower = fns[k - 1]
            for x in xs:
                fd = (lower(x + eps) - lower(x - eps)) / (2 * eps)
                an = f.d[k - 1](x)
                scale = max(abs(an), 1e-3)
                assert abs(an - fd) / scale < 1e-5, (name, k, x)


class TestRescale:
    def test_identity(self, ja_f):
        assert rescale(ja_f, 1.0) is ja_f

    def test_composition_value(self, ja_f):
        # f_2(0.55) = f(1.1)
        f2 = rescale(ja_f, 2.0)
        assert f2.fn(0.55) == pytest.approx(ja_f.fn(1.1), rel=1e-15)

    def test_chain_rule_at_zero(self, drift_f):
        f5 = rescale(drift_f, 5.0)
        assert f5.d[0](0.0) == pytest.approx(5.0 * drift_f.d[0](0.0), rel=1e-15)

    def test_vanish_radius_scales(self, ja_f):
        assert rescale(ja_f, 4.0).vanish_radius == pytest.approx(0.025)

    @given(st.floats(0.3, 8.0), st.floats(0.3, 8.0))
    @settings(max_examples=25, deadline=None)
    def test_composition_property(self, u, v):
        f = builtin_ja_f()
        lhs = rescale(rescale(f, u), v)
        rhs = rescale(f, u * v)
        zs = np.linspace(-3.0, 3.0, 41)
        np.testing.assert_allclose(
            np.asarray(lhs.fn(zs), dtype=float),
            np.asarray(rhs.fn(zs), dtype=float),
            rtol=1e-12, atol=1e-300,
        )

    def test_invalid_factor(self, ja_f):
        with pytest.raises(ValueError):
            rescale(ja_f, 0.0)


class TestSquare:
    def test_values_and_derivatives(self, drift_f):
        f2 = square(drift_f)
        xs = np.linspace(-2, 2, 21)
        np.testing.assert_allclose(
            np.asarray(f2.fn(xs)), np.asarray(drift_f.fn(xs)) ** 2, rtol=1e-14)
        eps = 1e-5
        for x in (-1.3, 0.0, 0.4, 2.0):
            fd = (f2.fn(x + eps) - f2.fn(x - eps)) / (2 * eps)
            assert f2.d[0](x) == pytest.approx(fd, abs=1e-7)

    def test_klass_mapping(self, drift_f, ja_f, sigma_f):
        assert square(drift_f).klass == KLASS_F_DOUBLEPRIME
        assert square(ja_f).klass == KLASS_F
        assert square(sigma_f).klass == KLASS_F


class TestCheckClass:
    def test_drift_audit(self, drift_f):
        audit = check_class(drift_f)
        assert audit.klass_consistent
        assert audit.odd_residual == 0.0

    def test_ja_audit(self, ja_f):
        audit = check_class(ja_f)
        assert audit.klass_consistent
        assert audit.f0 == audit.d1_0 == audit.d2_0 == 0.0

    def test_weighted_norm_monotone_in_p(self):
        for name in ("drift_erf", "ja_bump", "sigma_bump"):
            audit = check_class(design_function(name))
            for k in (1, 2, 3, 4):
                assert audit.weighted_norms[(k, 1)] <= audit.weighted_norms[(k, 3)]
                assert audit.weighted_norms[(k, 3)] <= audit.weighted_norms[(k, 5)]

    def test_drift_weighted_norm_value(self, drift_f):
        # sup exp(-x^2) (|x| v 1)^5 is attained at x = 0 where the weight is 1;
        # the interior stationary point x = sqrt(5/2) only reaches ~0.811.
        # 1-d maximization oracle:
        neg = lambda x: -math.exp(-x * x) * max(abs(x), 1.0) ** 5
        best = min(optimize.minimize_scalar(neg, bounds=(0, 50), method="bounded").fun,
                   neg(0.0))
        oracle = -best
        audit = check_class(drift_f)
        assert audit.weighted_norms[(1, 5)] == pytest.approx(oracle, rel=1e-6)
        assert oracle == pytest.approx(1.0, abs=1e-12)

    def test_registry(self):
        with pytest.raises(KeyError):
            design_function("no_such_function")
        register_design_function("ja_bump_twice", lambda: rescale(builtin_ja_f(), 2.0))
        f = design_function("ja_bump_twice")
        assert f.fn(0.55) == pytest.approx(math.exp(-1.0), rel=1e-14)
