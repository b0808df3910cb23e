"""Hermite-Galerkin discretisation of ``d_t h = (-T + L + R) h`` in one dimension.

Coefficients are flattened row-major, index ``i * (N + 1) + j`` for the
mode ``phi_i(x) psi_j(v)``, so ``A c B^T`` on the coefficient array becomes
``kron(A, B)`` on the flattened vector.  Without perturbation the generator
preserves total degree, which makes every block of total degree ``<= N``
exact and its spectrum ``-(n1 lambda_1 + n2 lambda_2)`` known in closed form.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from ..ensemble import write_table_csv
from ..errors import DomainError, NullSpaceError, NumericalInstabilityError
from ..loss import GradientOracle
from .basis import GaussianMeasure, HermiteField, hermite_table, lowering
from .operators import eps_phase, lyapunov_H_coeffs

GROWTH_TOL = 1e-8
NULL_TOL = 1e-8


@dataclass
class GeneratorMatrix:
    A: np.ndarray
    N: int
    gamma: float
    beta: float
    omega0: float
    oracle: GradientOracle = field(default_factory=GradientOracle)
    n_quad: Optional[int] = None

    @property
    def measure(self) -> GaussianMeasure:
        return GaussianMeasure(self.beta, self.omega0)

    @property
    def size(self) -> int:
        return (self.N + 1) ** 2

    @property
    def epsilon_model(self) -> str:
        return self.oracle.epsilon_model

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.A)

    def mean_zero_block(self) -> np.ndarray:
        """``A`` restricted to non-constant modes.

        The constant-mode row vanishes (mass conservation), so the spectrum
        of ``A`` is this block's spectrum plus the eigenvalue zero.
        """
        return self.A[1:, 1:]

    def spectral_abscissa(self) -> float:
        """Largest real part over the mean-zero block."""
        return float(np.linalg.eigvals(self.mean_zero_block()).real.max())

    def metadata(self) -> dict:
        return {"N": self.N, "gamma": self.gamma, "beta": self.beta, "omega0": self.omega0,
                "epsilon_model": self.epsilon_model, "amplitude": self.oracle.amplitude,
                "n_quad": self.n_quad}


def transport_matrix(N: int, omega0: float) -> np.ndarray:
    D = lowering(N)
    return omega0 * (np.kron(D, D.T) - np.kron(D.T, D))


def fokker_planck_matrix(N: int, gamma: float) -> np.ndarray:
    return -gamma * np.kron(np.eye(N + 1), np.diag(np.arange(N + 1, dtype=float)))


def default_perturbation_nodes(N: int) -> int:
    return max(4 * N + 1, 64)


def perturbation_matrix(N: int, measure: GaussianMeasure, gamma: float, oracle: GradientOracle,
                        n_quad: Optional[int] = None) -> np.ndarray:
    """Dense Galerkin matrix ``<R(phi_i psi_j), phi_k psi_l>_*`` by tensor quadrature."""
    n = n_quad or default_perturbation_nodes(N)
    (xs, wx), (vs, wv) = measure.quadrature(n)
    X, V = np.meshgrid(xs, vs, indexing="ij")
    W = np.outer(wx, wv)
    e, _, _ = eps_phase(oracle, gamma, X, V)
    E = e * W
    F = measure.beta * e * (measure.omega0**2 * X - gamma * V) * W

    Bx = hermite_table(xs / measure.sx, N)
    Bv = hermite_table(vs / measure.sv, N)
    dBx = Bx @ lowering(N) / measure.sx
    dBv = Bv @ lowering(N) / measure.sv
    R = (np.einsum("ab,ak,ai,bl,bj->klij", E, Bx, dBx, Bv, Bv, optimize=True)
         - gamma * np.einsum("ab,ak,ai,bl,bj->klij", E, Bx, Bx, Bv, dBv, optimize=True)
         - np.einsum("ab,ak,ai,bl,bj->klij", F, Bx, Bx, Bv, Bv, optimize=True))
    m = (N + 1) ** 2
    return R.reshape(m, m)


def assemble_generator(N: int, gamma: float, beta: float, omega0: float,
                       oracle: Optional[GradientOracle] = None,
                       n_quad: Optional[int] = None) -> GeneratorMatrix:
    """Matrix of ``-T + L + R`` on flattened coefficients.

    ``n_quad`` sets the per-axis node count for the perturbation matrix
    (default ``max(4N + 1, 64)``).  The perturbation is not polynomial, so
    the ``2N + 1`` rule that is exact for polynomial products leaves
    quadrature errors near ``1e-6`` in the mass row; the larger default
    brings them to rounding level.
    """
    if N < 2:
        raise DomainError("N must be >= 2")
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    oracle = oracle or GradientOracle(omega0=omega0)
    if oracle.omega0 != omega0:
        raise DomainError("oracle and generator disagree on omega0")
    measure = GaussianMeasure(beta, omega0)
    A = -transport_matrix(N, omega0) + fokker_planck_matrix(N, gamma)
    if oracle.amplitude != 0:
        n_quad = n_quad or default_perturbation_nodes(N)
        A = A + perturbation_matrix(N, measure, gamma, oracle, n_quad)
    return GeneratorMatrix(A, N, gamma, beta, omega0, oracle, n_quad)


def analytic_spectrum(gamma: float, omega0: float, max_degree: int) -> np.ndarray:
    """``-(n1 lambda_1 + n2 lambda_2)`` for ``n1 + n2 <= max_degree``."""
    disc = complex(gamma * gamma - 4.0 * omega0 * omega0) ** 0.5
    l1, l2 = 0.5 * (gamma - disc), 0.5 * (gamma + disc)
    return np.array([-(n1 * l1 + n2 * l2) for n in range(max_degree + 1)
                     for n1 in range(n + 1) for n2 in [n - n1]])


def spectral_radius_estimate(A: np.ndarray, iters: int = 60, seed: int = 0) -> float:
    """Power-iteration estimate of ``||A||_2``, an upper bound on the spectral radius.

    Inflated by 5% to cover the slow convergence of the iteration.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[1])
    x /= np.linalg.norm(x)
    s = 0.0
    for _ in range(iters):
        y = A.T @ (A @ x)
        s = np.linalg.norm(y)
        if s == 0:
            return 0.0
        x = y / s
    return 1.05 * math.sqrt(s)


# --------------------------------------------------------------------------
# time evolution


@dataclass
class KfpSeries:
    times: np.ndarray
    norm_sq: np.ndarray
    H: np.ndarray
    transport_self: np.ndarray   # <Th, h> at each output, zero up to rounding
    coeffs: np.ndarray           # (n_out, N+1, N+1)
    measure: GaussianMeasure
    C: float
    C_hat: float
    dt: float
    method: str

    def fields(self) -> list[HermiteField]:
        return [HermiteField(c, self.measure) for c in self.coeffs]

    def table(self) -> tuple[list[str], list[list]]:
        rows = [[float(t), float(n), float(h)] for t, n, h in zip(self.times, self.norm_sq, self.H)]
        return ["t", "norm_h_sq", "H"], rows

    def write_csv(self, path: str | Path) -> None:
        write_table_csv(path, *self.table())

    def write_snapshots_json(self, path: str | Path) -> None:
        payload = {"times": [float(t) for t in self.times],
                   "coeffs": [c.tolist() for c in self.coeffs]}
        Path(path).write_text(json.dumps(payload, sort_keys=True))


def _rk4_matrix(A: np.ndarray, dt: float) -> np.ndarray:
    """One RK4 step for a linear system is multiplication by the degree-4 Taylor polynomial."""
    Z = dt * A
    I = np.eye(A.shape[0])
    Z2 = Z @ Z
    return I + Z + Z2 / 2.0 + Z2 @ Z / 6.0 + Z2 @ Z2 / 24.0


def default_certificate(gamma: float, omega0: float) -> tuple[float, float]:
    """``(C, C_hat)`` from the closed-form table, or the critical-point search."""
    from ..hypo import find_C_Chat
    from ..params import CRITICAL, theorem_rate

    rate = theorem_rate(gamma, omega0)
    if rate.regime == CRITICAL:
        return find_C_Chat(gamma, omega0, rate.mu_matrix / 10)
    return rate.C, rate.C_hat


def evolve(h0: HermiteField, gen: GeneratorMatrix, T_final: float, dt: Optional[float] = None,
           method: str = "rk4", n_out: int = 201, C: Optional[float] = None,
           C_hat: Optional[float] = None) -> KfpSeries:
    """Integrate the coefficients to ``T_final`` recording ``||h||^2`` and ``H``.

    ``rk4`` uses ``dt <= 0.5 / rho`` with ``rho`` from power iteration;
    ``trapezoidal`` is A-stable and accepts any ``dt``.  The step is shrunk
    so that the ``n_out`` equispaced output times are hit exactly.  Without
    perturbation a growth of ``||h||^2`` beyond a relative ``1e-8`` between
    outputs aborts with :class:`NumericalInstabilityError`.
    """
    if h0.N != gen.N or h0.measure != gen.measure:
        raise DomainError("initial field does not match the generator")
    if not T_final > 0:
        raise DomainError("T_final must be positive")
    if n_out < 2:
        raise DomainError("n_out must be >= 2")
    if C is None or C_hat is None:
        C, C_hat = default_certificate(gen.gamma, gen.omega0)

    A = gen.A
    rho = spectral_radius_estimate(A)
    if method == "rk4":
        dt_max = 0.5 / rho if rho > 0 else T_final
        if dt is not None and dt > dt_max:
            raise DomainError(f"dt={dt:g} exceeds the explicit stability limit {dt_max:g}")
        dt = dt or dt_max
    elif method == "trapezoidal":
        dt = dt or min(T_final / (n_out - 1), 0.05)
    else:
        raise DomainError(f"unknown method {method!r}")

    interval = T_final / (n_out - 1)
    sub = max(1, math.ceil(interval / dt - 1e-12))
    h = interval / sub
    if method == "rk4":
        step = _rk4_matrix(A, h)
    else:
        I = np.eye(A.shape[0])
        lu = lu_factor(I - 0.5 * h * A)
        rhs_op = I + 0.5 * h * A
        step = lu_solve(lu, rhs_op)
    # propagate one output interval at a time with a single matrix
    P = np.linalg.matrix_power(step, sub)

    shape = h0.coeffs.shape
    c = h0.coeffs.reshape(-1).copy()
    out = np.empty((n_out,) + shape)
    out[0] = h0.coeffs
    check_growth = gen.oracle.amplitude == 0
    prev = float(c @ c)
    for k in range(1, n_out):
        c = P @ c
        if not np.all(np.isfinite(c)):
            raise NumericalInstabilityError("non-finite coefficients during evolution")
        cur = float(c @ c)
        if check_growth and cur > prev * (1.0 + GROWTH_TOL) + 1e-300:
            raise NumericalInstabilityError(
                f"||h||^2 grew from {prev:.6g} to {cur:.6g} at t={k * interval:g}")
        prev = cur
        out[k] = c.reshape(shape)

    Tm = transport_matrix(gen.N, gen.omega0)
    flat = out.reshape(n_out, -1)
    return KfpSeries(
        times=np.arange(n_out) * interval,
        norm_sq=np.sum(flat * flat, axis=1),
        H=lyapunov_H_coeffs(out, gen.measure, C, C_hat),
        transport_self=np.einsum("ni,ij,nj->n", flat, Tm, flat),
        coeffs=out,
        measure=gen.measure,
        C=float(C),
        C_hat=float(C_hat),
        dt=h,
        method=method,
    )


def random_field(measure: GaussianMeasure, N: int, rng: np.random.Generator,
                 max_total_degree: Optional[int] = None, mean_zero: bool = True) -> HermiteField:
    """Gaussian random coefficients on modes with ``i + j <= max_total_degree`` (default ``N``)."""
    K = N if max_total_degree is None else max_total_degree
    i, j = np.indices((N + 1, N + 1))
    c = rng.standard_normal((N + 1, N + 1)) * (i + j <= K)
    if mean_zero:
        c[0, 0] = 0.0
    return HermiteField(c, measure)


def eigenmode(gen: GeneratorMatrix, target: float) -> tuple[complex, HermiteField]:
    """Real eigenvector of ``A`` whose eigenvalue is closest to ``target``."""
    w, V = np.linalg.eig(gen.A)
    k = int(np.argmin(np.abs(w - target)))
    if abs(w[k].imag) > 1e-10:
        raise DomainError("closest eigenvalue is not real")
    vec = np.real(V[:, k])
    vec = vec / np.linalg.norm(vec)
    return w[k], HermiteField(vec.reshape(gen.N + 1, gen.N + 1), gen.measure)


# --------------------------------------------------------------------------
# steady state


@dataclass
class SteadyState:
    field: HermiteField
    residual: float
    singular_values: np.ndarray  # two smallest, ascending

    def as_dict(self) -> dict:
        return {"residual": self.residual, "sigma_min": float(self.singular_values[0]),
                "sigma_next": float(self.singular_values[1]),
                "coeffs": self.field.coeffs.tolist()}


def compute_steady_state(gen: GeneratorMatrix, tol: float = NULL_TOL) -> SteadyState:
    """Null vector of ``A`` normalised to unit mass (``c_00 = 1``).

    Uses the SVD: the smallest singular value must be below ``tol`` relative
    to the largest and the next one above it, otherwise the null space is
    not one-dimensional and :class:`NullSpaceError` is raised.
    """
    A = gen.A
    _, s, Vt = np.linalg.svd(A)
    scale = s[0] if s[0] > 0 else 1.0
    if s[-1] > tol * scale:
        raise NullSpaceError(f"null space not one-dimensional within tolerance: no singular value "
                             f"below {tol * scale:.3g} (smallest {s[-1]:.3g})")
    if s[-2] <= tol * scale:
        raise NullSpaceError("null space not one-dimensional within tolerance: "
                             f"second smallest singular value {s[-2]:.3g}")
    vec = Vt[-1]
    if abs(vec[0]) < 1e-14:
        raise NullSpaceError("null vector has no mass; cannot normalise")
    vec = vec / vec[0]
    F = HermiteField(vec.reshape(gen.N + 1, gen.N + 1), gen.measure)
    return SteadyState(F, float(np.linalg.norm(A @ vec)), np.array([s[-1], s[-2]]))
