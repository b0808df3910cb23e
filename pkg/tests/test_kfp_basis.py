import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from asgdlab.errors import DomainError
from asgdlab.kfp import GaussianMeasure, HermiteField, quadrature_inner, weighted_inner
from asgdlab.kfp.basis import hermite_table, lowering, multiply_xi


def test_measure_normalised():
    m = GaussianMeasure(3.0, 1.7)
    (x, wx), (v, wv) = m.quadrature(20)
    assert wx.sum() == pytest.approx(1.0, abs=1e-12) and wv.sum() == pytest.approx(1.0, abs=1e-12)
    L = 12 * max(m.sx, m.sv)
    total, _ = integrate.dblquad(lambda vv, xx: m.density(xx, vv), -L, L, -L, L, epsabs=1e-12)
    assert total == pytest.approx(1.0, abs=1e-10)


def test_measure_constants():
    m = GaussianMeasure(2.0, 2.0)
    assert m.var_x == 1 / 8 and m.var_v == 0.5
    assert m.Z1 == pytest.approx(math.sqrt(2 * math.pi / 8)) and m.Z2 == pytest.approx(math.sqrt(math.pi))


def test_measure_rejects():
    with pytest.raises(DomainError):
        GaussianMeasure(0.0, 1.0)


def test_hermite_orthonormal():
    xi, w = np.polynomial.hermite_e.hermegauss(30)
    B = hermite_table(xi, 12)
    G = (B * (w / math.sqrt(2 * math.pi))[:, None]).T @ B
    assert np.allclose(G, np.eye(13), atol=1e-12)


def test_lowering_differentiates():
    # d/dxi He_n / sqrt(n!) = sqrt(n) He_{n-1} / sqrt((n-1)!)
    xi = np.linspace(-3, 3, 7)
    B = hermite_table(xi, 6)
    h = 1e-6
    fd = (hermite_table(xi + h, 6) - hermite_table(xi - h, 6)) / (2 * h)
    assert np.allclose(B @ lowering(6), fd, atol=1e-7)


def test_multiply_xi():
    xi = np.linspace(-2, 2, 9)
    B = hermite_table(xi, 8)
    c = np.zeros(9)
    c[3] = 1.0
    assert np.allclose(B @ (multiply_xi(8) @ c), xi * B[:, 3])


class TestInner:
    def test_examples(self, unit_measure):
        N = 4
        one = HermiteField.constant(unit_measure, N)
        x = HermiteField.from_function(lambda x, v: x, unit_measure, N)
        v = HermiteField.from_function(lambda x, v: v, unit_measure, N)
        assert weighted_inner(one, one) == pytest.approx(1.0)
        assert weighted_inner(x, v) == pytest.approx(0.0, abs=1e-15)
        assert weighted_inner(x, x) == pytest.approx(0.5)

    @settings(max_examples=40)
    @given(st.integers(0, 2**31), st.integers(2, 8), st.floats(0.2, 20), st.floats(0.3, 3))
    def test_parseval(self, seed, N, beta, omega0):
        m = GaussianMeasure(beta, omega0)
        rng = np.random.default_rng(seed)
        f = HermiteField(rng.standard_normal((N + 1, N + 1)), m)
        g = HermiteField(rng.standard_normal((N + 1, N + 1)), m)
        assert weighted_inner(f, g) == pytest.approx(quadrature_inner(f, g), rel=1e-10, abs=1e-10)

    def test_mismatch(self, unit_measure):
        with pytest.raises(ValueError):
            weighted_inner(HermiteField.zeros(unit_measure, 3), HermiteField.zeros(unit_measure, 4))
        with pytest.raises(ValueError):
            weighted_inner(HermiteField.zeros(unit_measure, 3),
                           HermiteField.zeros(GaussianMeasure(1.0, 1.0), 3))


class TestField:
    def test_projection_reproduces_polynomial(self, unit_measure):
        f = HermiteField.from_function(lambda x, v: 1 + x - 2 * x * v + v**3, unit_measure, 4)
        xs = np.linspace(-1, 1, 5)
        X, V = np.meshgrid(xs, xs, indexing="ij")
        assert np.allclose(f.evaluate(xs, xs), 1 + X - 2 * X * V + V**3, atol=1e-12)
        assert f.total_degree() == 3

    def test_derivatives(self):
        m = GaussianMeasure(3.0, 0.8)
        f = HermiteField.from_function(lambda x, v: x**2 * v + 3 * v**2, m, 5)
        xs = np.array([-0.4, 0.1, 0.7])
        X, V = np.meshgrid(xs, xs, indexing="ij")
        assert np.allclose(f.dx().evaluate(xs, xs), 2 * X * V, atol=1e-12)
        assert np.allclose(f.dv().evaluate(xs, xs), X**2 + 6 * V, atol=1e-12)

    def test_mean_and_norm(self, unit_measure):
        f = HermiteField.from_function(lambda x, v: 2 + x, unit_measure, 3)
        assert f.mean == pytest.approx(2.0) and not f.is_mean_zero()
        assert f.norm_sq() == pytest.approx(4.5)

    def test_arithmetic_and_resize(self, unit_measure):
        f = HermiteField.from_function(lambda x, v: x * v, unit_measure, 3)
        g = (2 * f - f) + f * 0.5
        assert np.allclose(g.coeffs, 1.5 * f.coeffs)
        big = f.resized(6)
        assert big.N == 6 and np.allclose(big.resized(3).coeffs, f.coeffs)

    def test_shape_check(self, unit_measure):
        with pytest.raises(ValueError):
            HermiteField(np.zeros((3, 4)), unit_measure)
