"""Gaussian reference measure and Hermite expansions in phase space.

Functions of ``(x, v)`` are expanded as ``h = sum c_ij phi_i(x) psi_j(v)``
where ``phi_i`` and ``psi_j`` are probabilists' Hermite polynomials of the
scaled variables ``x / s_x`` and ``v / s_v``, normalised by ``sqrt(i!)``.
The family is orthonormal for the weighted product ``<f, g>_* = int f g M``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from ..errors import DomainError


@dataclass(frozen=True)
class GaussianMeasure:
    """``M(x, v) ∝ exp(-beta omega0**2 x**2 / 2) exp(-beta v**2 / 2)``."""

    beta: float
    omega0: float

    def __post_init__(self):
        if not (self.beta > 0 and self.omega0 > 0):
            raise DomainError("beta and omega0 must be positive")

    @property
    def var_x(self) -> float:
        return 1.0 / (self.beta * self.omega0**2)

    @property
    def var_v(self) -> float:
        return 1.0 / self.beta

    @property
    def sx(self) -> float:
        return math.sqrt(self.var_x)

    @property
    def sv(self) -> float:
        return math.sqrt(self.var_v)

    @property
    def Z1(self) -> float:
        return math.sqrt(2.0 * math.pi / (self.beta * self.omega0**2))

    @property
    def Z2(self) -> float:
        return math.sqrt(2.0 * math.pi / self.beta)

    def density(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return (np.exp(-0.5 * self.beta * self.omega0**2 * x * x) / self.Z1
                * np.exp(-0.5 * self.beta * v * v) / self.Z2)

    def quadrature(self, n: int):
        """1-D Gauss-Hermite rules ``(x, wx), (v, wv)``; weights sum to one."""
        xi, w = hermegauss(n)
        w = w / math.sqrt(2.0 * math.pi)
        return (self.sx * xi, w), (self.sv * xi, w)


def hermite_table(xi, N: int) -> np.ndarray:
    """Orthonormal ``He_n(xi) / sqrt(n!)`` for ``n = 0..N``, shape ``(len(xi), N+1)``."""
    xi = np.asarray(xi, dtype=float)
    out = np.empty(xi.shape + (N + 1,))
    out[..., 0] = 1.0
    if N >= 1:
        out[..., 1] = xi
    for n in range(1, N):
        out[..., n + 1] = (xi * out[..., n] - math.sqrt(n) * out[..., n - 1]) / math.sqrt(n + 1)
    return out


def lowering(N: int) -> np.ndarray:
    """Coefficient map of ``d/dxi``: ``(D c)_m = sqrt(m+1) c_{m+1}``."""
    return np.diag(np.sqrt(np.arange(1, N + 1, dtype=float)), k=1)


def multiply_xi(N: int) -> np.ndarray:
    """Coefficient map of multiplication by ``xi``, truncated at degree ``N``."""
    D = lowering(N)
    return D + D.T


@dataclass
class HermiteField:
    coeffs: np.ndarray
    measure: GaussianMeasure

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.ndim != 2 or self.coeffs.shape[0] != self.coeffs.shape[1]:
            raise ValueError("coefficients must form a square (N+1, N+1) array")

    @property
    def N(self) -> int:
        return self.coeffs.shape[0] - 1

    # construction -------------------------------------------------------

    @classmethod
    def zeros(cls, measure: GaussianMeasure, N: int) -> "HermiteField":
        return cls(np.zeros((N + 1, N + 1)), measure)

    @classmethod
    def constant(cls, measure: GaussianMeasure, N: int, value: float = 1.0) -> "HermiteField":
        c = np.zeros((N + 1, N + 1))
        c[0, 0] = value
        return cls(c, measure)

    @classmethod
    def from_function(cls, func: Callable, measure: GaussianMeasure, N: int,
                      n_quad: int | None = None) -> "HermiteField":
        """Orthogonal projection by tensor Gauss-Hermite quadrature.

        Exact for polynomials of degree ``<= N`` in each variable with the
        default ``2N + 1`` nodes.
        """
        n = n_quad or 2 * N + 1
        (xs, wx), (vs, wv) = measure.quadrature(n)
        X, V = np.meshgrid(xs, vs, indexing="ij")
        vals = np.asarray(func(X, V), dtype=float) * np.ones_like(X)
        Bx = hermite_table(xs / measure.sx, N)
        Bv = hermite_table(vs / measure.sv, N)
        c = (Bx * wx[:, None]).T @ vals @ (Bv * wv[:, None])
        return cls(c, measure)

    # arithmetic ---------------------------------------------------------

    def _check(self, other: "HermiteField") -> None:
        if self.measure != other.measure:
            raise ValueError("fields are expanded under different measures")
        if self.N != other.N:
            raise ValueError("fields have different truncation degrees")

    def __add__(self, other: "HermiteField") -> "HermiteField":
        self._check(other)
        return HermiteField(self.coeffs + other.coeffs, self.measure)

    def __sub__(self, other: "HermiteField") -> "HermiteField":
        self._check(other)
        return HermiteField(self.coeffs - other.coeffs, self.measure)

    def __mul__(self, scalar: float) -> "HermiteField":
        return HermiteField(self.coeffs * scalar, self.measure)

    __rmul__ = __mul__

    def resized(self, N: int) -> "HermiteField":
        c = np.zeros((N + 1, N + 1))
        k = min(N, self.N) + 1
        c[:k, :k] = self.coeffs[:k, :k]
        return HermiteField(c, self.measure)

    # calculus -----------------------------------------------------------

    def dx(self) -> "HermiteField":
        return HermiteField(lowering(self.N) @ self.coeffs / self.measure.sx, self.measure)

    def dv(self) -> "HermiteField":
        return HermiteField(self.coeffs @ lowering(self.N).T / self.measure.sv, self.measure)

    def evaluate(self, x, v):
        """Point values on the tensor grid ``x`` by ``v`` (1-D arrays)."""
        Bx = hermite_table(np.atleast_1d(x) / self.measure.sx, self.N)
        Bv = hermite_table(np.atleast_1d(v) / self.measure.sv, self.N)
        return Bx @ self.coeffs @ Bv.T

    # weighted geometry --------------------------------------------------

    @property
    def mean(self) -> float:
        """``int h M``, the coefficient of the constant mode."""
        return float(self.coeffs[0, 0])

    def is_mean_zero(self, tol: float = 1e-12) -> bool:
        return abs(self.coeffs[0, 0]) <= tol

    def norm_sq(self) -> float:
        return float(np.sum(self.coeffs**2))

    def total_degree(self, tol: float = 1e-12) -> int:
        """Largest ``n1 + n2`` whose coefficient exceeds ``tol`` times the largest one."""
        scale = np.abs(self.coeffs).max()
        idx = np.argwhere(np.abs(self.coeffs) > tol * scale)
        return int(idx.sum(axis=1).max()) if len(idx) else 0


def weighted_inner(f: HermiteField, g: HermiteField) -> float:
    """``<f, g>_*`` by Parseval."""
    f._check(g)
    return float(np.sum(f.coeffs * g.coeffs))


def quadrature_inner(f: HermiteField, g: HermiteField, n_quad: int | None = None) -> float:
    """``<f, g>_*`` by tensor Gauss-Hermite quadrature of point values."""
    f._check(g)
    n = n_quad or 2 * f.N + 1
    (xs, wx), (vs, wv) = f.measure.quadrature(n)
    W = np.outer(wx, wv)
    return float(np.sum(W * f.evaluate(xs, vs) * g.evaluate(xs, vs)))
