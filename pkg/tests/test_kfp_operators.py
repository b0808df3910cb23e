import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asgdlab.errors import DomainError, TruncationWarning
from asgdlab.kfp import (GaussianMeasure, HermiteField, apply_L, apply_R, apply_T, check_poincare,
                         lyapunov_H, poincare_linear_closed_form, verify_identities,
                         verify_perturbation_bounds, weighted_inner)
from asgdlab.kfp.operators import lyapunov_H_coeffs, perturbation_identity_residual
from asgdlab.loss import GradientOracle, perturbation_bounds


def field(m, f, N=5):
    return HermiteField.from_function(f, m, N)


XS = np.array([-0.9, -0.2, 0.4, 1.1])
X, V = np.meshgrid(XS, XS, indexing="ij")


class TestTransport:
    def test_examples(self):
        m = GaussianMeasure(2.0, 1.5)
        Tx = apply_T(field(m, lambda x, v: x))
        Txv = apply_T(field(m, lambda x, v: x * v))
        assert np.allclose(Tx.evaluate(XS, XS), V, atol=1e-12)
        assert np.allclose(Txv.evaluate(XS, XS), V**2 - 2.25 * X**2, atol=1e-12)

    def test_against_direct_differentiation(self):
        m = GaussianMeasure(1.3, 0.7)
        f = field(m, lambda x, v: x**2 * v - v**3 + x, N=5)
        expected = V * (2 * X * V + 1) - 0.49 * X * (X**2 - 3 * V**2)
        assert np.allclose(apply_T(f).evaluate(XS, XS), expected, atol=1e-11)

    def test_truncation_flag(self, unit_measure):
        top = HermiteField.zeros(unit_measure, 3)
        top.coeffs[2, 3] = 1.0
        with pytest.warns(TruncationWarning):
            apply_T(top)
        ext = apply_T(top, extend=True)
        assert ext.N == 4 and ext.coeffs[1, 4] != 0 and ext.coeffs[3, 2] != 0

    def test_no_flag_within_range(self, unit_measure):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            apply_T(field(unit_measure, lambda x, v: x * v, N=4))


class TestFokkerPlanck:
    def test_examples(self):
        gamma, beta = 0.7, 2.0
        m = GaussianMeasure(beta, 1.0)
        Lv2 = apply_L(field(m, lambda x, v: v * v), gamma)
        assert np.allclose(Lv2.evaluate(XS, XS), -2 * gamma * V**2 + 2 * gamma / beta, atol=1e-12)
        assert np.all(apply_L(HermiteField.constant(m, 4), gamma).coeffs == 0)

    def test_against_direct_differentiation(self):
        gamma, beta = 1.7, 3.0
        m = GaussianMeasure(beta, 1.2)
        f = field(m, lambda x, v: x * v**3 + v**2)
        expected = gamma * (-V * (3 * X * V**2 + 2 * V) + (6 * X * V + 2) / beta)
        assert np.allclose(apply_L(f, gamma).evaluate(XS, XS), expected, atol=1e-11)


class TestPerturbation:
    def test_zero_model(self, unit_measure):
        out = apply_R(field(unit_measure, lambda x, v: x + v * v), GradientOracle(), 1.0)
        assert np.all(out.coeffs == 0)

    def test_pointwise_on_resolved_image(self):
        # R of a constant is a smooth function; compare its projection with direct quadrature
        gamma = 1.0
        m = GaussianMeasure(2.0, 1.0)
        o = GradientOracle(amplitude=0.3)
        N = 24
        one = HermiteField.constant(m, N)
        with pytest.warns(TruncationWarning):
            Rf = apply_R(one, o, gamma, n_quad=200)
        direct = HermiteField.from_function(
            lambda x, v: -m.beta * 0.3 * np.tanh(-(v + x)) * np.exp(-(v + x) ** 2) * (x - v), m, N, n_quad=200)
        assert np.allclose(Rf.coeffs, direct.coeffs, atol=1e-12)

    def test_omega_mismatch(self, unit_measure):
        with pytest.raises(DomainError):
            apply_R(HermiteField.constant(unit_measure, 3), GradientOracle(omega0=2.0, amplitude=0.1), 1.0)

    def test_integration_by_parts(self, unit_measure):
        o = GradientOracle(amplitude=0.05)
        for f in (lambda x, v: x, lambda x, v: 1 + x * v, lambda x, v: v**2 - x):
            assert perturbation_identity_residual(field(unit_measure, f, 4), o, 1.3) < 1e-13


class TestIdentities:
    @pytest.mark.parametrize("route", ["coefficient", "quadrature"])
    @pytest.mark.parametrize("gamma, beta, omega0", [(1.0, 2.0, 1.0), (2.5, 7.0, 1.0), (0.4, 0.5, 2.0)])
    def test_battery(self, route, gamma, beta, omega0):
        rep = verify_identities(GaussianMeasure(beta, omega0), gamma, N=4, route=route)
        assert rep.max_residual < 1e-12
        assert {"x|v", "v|v", "1|x^2"} <= set(rep.transport_pair)

    def test_worked_values(self, unit_measure):
        x = field(unit_measure, lambda x, v: x)
        v = field(unit_measure, lambda x, v: v)
        assert weighted_inner(apply_T(x), v) == pytest.approx(0.5)
        assert weighted_inner(apply_T(v), x) == pytest.approx(-0.5)
        assert weighted_inner(apply_T(x + v), x + v) == pytest.approx(0.0, abs=1e-15)
        assert weighted_inner(apply_L(v, 1.0), v) == pytest.approx(-1.0 / 2.0)

    def test_degree_guard(self, unit_measure):
        with pytest.raises(DomainError):
            verify_identities(unit_measure, 1.0, N=2)

    @settings(max_examples=25)
    @given(st.integers(0, 2**31), st.floats(0.3, 10), st.floats(0.3, 3))
    def test_antisymmetry_random(self, seed, beta, omega0):
        m = GaussianMeasure(beta, omega0)
        rng = np.random.default_rng(seed)
        c = rng.standard_normal((7, 7))
        c[6, :] = c[:, 6] = 0
        h = HermiteField(c, m)
        assert abs(weighted_inner(apply_T(h), h)) < 1e-10 * h.norm_sq() * omega0 * 7


class TestInequalities:
    @pytest.mark.parametrize("gamma, beta", [(1.0, 2.0), (2.5, 4.0), (0.5, 1.0)])
    def test_hold(self, gamma, beta):
        m = GaussianMeasure(beta, 1.0)
        o = GradientOracle(amplitude=0.01)
        checks = verify_perturbation_bounds(m, o, gamma, perturbation_bounds(o, gamma))
        assert all(c.holds for c in checks)
        assert {c.name for c in checks} == {"c", "c_pair", "d", "e", "f"}

    def test_zero_model(self, unit_measure):
        o = GradientOracle()
        checks = verify_perturbation_bounds(unit_measure, o, 1.0, perturbation_bounds(o, 1.0))
        assert all(c.lhs == 0 and c.rhs == 0 and c.holds for c in checks)

    def test_constant_function_value(self, unit_measure):
        # <R1, 1> = -<beta eps (x - gamma v), 1> = -(1/2) of that integral, computed directly
        o = GradientOracle(amplitude=0.01)
        checks = verify_perturbation_bounds(unit_measure, o, 1.0, perturbation_bounds(o, 1.0))
        c1 = next(c for c in checks if c.name == "c" and c.functions == "1")
        (xs, wx), (vs, wv) = unit_measure.quadrature(96)
        X_, V_ = np.meshgrid(xs, vs, indexing="ij")
        eps = 0.01 * np.tanh(-(V_ + X_)) * np.exp(-(V_ + X_) ** 2)
        direct = -np.sum(np.outer(wx, wv) * 2.0 * eps * (X_ - V_))
        assert c1.lhs == pytest.approx(direct, abs=1e-15)


class TestPoincare:
    def test_equality_on_linear(self, unit_measure):
        pc = check_poincare(field(unit_measure, lambda x, v: x, 3))
        assert pc.lhs == pytest.approx(0.5) and pc.rhs == pytest.approx(0.5) and pc.holds

    def test_strict_for_stiff_position(self):
        m = GaussianMeasure(2.0, 2.0)
        pc = check_poincare(field(m, lambda x, v: x, 3))
        assert pc.lhs == pytest.approx(1 / 8) and pc.rhs == pytest.approx(1 / 2)

    def test_counterexample_in_two_dimensions(self):
        pc = poincare_linear_closed_form(2.0, 1.0, d=2)
        assert pc.lhs == pytest.approx(0.5) and pc.rhs == pytest.approx(0.25) and not pc.holds
        assert poincare_linear_closed_form(2.0, 1.0, d=1).holds

    def test_mean_zero_required(self, unit_measure):
        with pytest.raises(DomainError, match="not mean-zero"):
            check_poincare(HermiteField.constant(unit_measure, 2))

    @settings(max_examples=40)
    @given(st.integers(0, 2**31), st.floats(0.2, 10), st.floats(0.2, 3))
    def test_random_fields(self, seed, beta, omega0):
        m = GaussianMeasure(beta, omega0)
        c = np.random.default_rng(seed).standard_normal((6, 6))
        c[0, 0] = 0.0
        assert check_poincare(HermiteField(c, m)).holds


class TestLyapunovFunctional:
    def test_examples(self, unit_measure):
        assert lyapunov_H(field(unit_measure, lambda x, v: x + v, 3), 1.0, 0.5) == pytest.approx(3.0)
        assert lyapunov_H(HermiteField.constant(unit_measure, 3), 1.0, 0.5) == 0.0
        assert lyapunov_H(field(unit_measure, lambda x, v: x * x, 3), 1.0, 0.5) == pytest.approx(2.0)

    def test_guard(self, unit_measure):
        with pytest.raises(DomainError):
            lyapunov_H(HermiteField.constant(unit_measure, 2), 0.2, 0.5)

    def test_vectorised(self, rng):
        m = GaussianMeasure(3.0, 0.6)
        stack = rng.standard_normal((4, 5, 5))
        vec = lyapunov_H_coeffs(stack, m, 2.0, 0.7)
        assert np.allclose(vec, [lyapunov_H(HermiteField(c, m), 2.0, 0.7) for c in stack])
