"""Stochastic modified equation of ASGD and its exact Gaussian moments.

The SME is the damped second-order system

    dTheta = Y dt + tau dB,
    dY     = -grad f(Theta) dt - gamma Y dt,

with noise on the parameter block only.  For a purely quadratic loss it is an
Ornstein-Uhlenbeck process whose mean and covariance are available in closed
form; those closed forms serve as the ground truth for every Monte Carlo
comparison in the package.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from ._rng import PathStreams
from .ensemble import EnsembleMoments, batch_moments
from .errors import DomainError, NumericalInstabilityError
from .loss import GradientOracle, grad
from .params import DerivedParams


@dataclass
class SmeState:
    Theta: np.ndarray
    Y: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.Theta = np.atleast_1d(np.asarray(self.Theta, dtype=float))
        self.Y = np.atleast_1d(np.asarray(self.Y, dtype=float))


@dataclass
class MomentState:
    mean: np.ndarray
    cov: np.ndarray
    t: float


# --------------------------------------------------------------------------
# coordinate maps


def to_phase(theta, y, gamma: float, omega0: float):
    """``(theta, y) -> (x, v) = (y, -omega0**2 theta - gamma y)``."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    return y.copy(), -omega0**2 * theta - gamma * y


def from_phase(x, v, gamma: float, omega0: float):
    if omega0 == 0:
        raise DomainError("from_phase requires omega0 != 0")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    return -(v + gamma * x) / omega0**2, x.copy()


def phase_map_matrix(gamma: float, omega0: float, d: int = 1) -> np.ndarray:
    """Linear map taking a ``(Theta, Y)`` state vector to ``(x, v)``."""
    J = np.array([[0.0, 1.0], [-omega0**2, -gamma]])
    return np.kron(J, np.eye(d))


# --------------------------------------------------------------------------
# closed-form linear dynamics


def drift_matrix(gamma: float, omega0: float) -> np.ndarray:
    return np.array([[0.0, 1.0], [-omega0**2, -gamma]])


def propagator(t, gamma: float, omega0: float) -> np.ndarray:
    """``exp(A t)`` for the 2x2 drift, shape ``(*t.shape, 2, 2)``.

    Uses ``exp(At) = e^{st} [c(t) I + s(t) (A - sI)]`` with ``s = -gamma/2``
    and ``q**2 = gamma**2/4 - omega0**2``: hyperbolic functions for real
    ``q``, trigonometric ones for imaginary ``q`` and the limit ``c = 1``,
    ``s(t) = t`` at the defective point.  All branches are written in
    overflow-free form.
    """
    t = np.asarray(t, dtype=float)
    s = -0.5 * gamma
    q2 = 0.25 * gamma * gamma - omega0 * omega0
    if q2 > 0:
        q = math.sqrt(q2)
        fast = np.exp((s - q) * t)
        slow = np.exp((s + q) * t)
        ec = 0.5 * (slow + fast)
        es = slow * (-np.expm1(-2.0 * q * t)) / (2.0 * q)
    elif q2 < 0:
        w = math.sqrt(-q2)
        decay = np.exp(s * t)
        ec = decay * np.cos(w * t)
        es = decay * t * np.sinc(w * t / math.pi)
    else:
        decay = np.exp(s * t)
        ec = decay
        es = decay * t
    A = drift_matrix(gamma, omega0)
    shifted = A - s * np.eye(2)
    return ec[..., None, None] * np.eye(2) + es[..., None, None] * shifted


def stationary_cov(gamma: float, omega0: float, tau_noise: float) -> np.ndarray:
    """Stationary 2x2 covariance of ``(Theta, Y)``."""
    A = drift_matrix(gamma, omega0)
    D = np.diag([tau_noise**2, 0.0])
    S = solve_continuous_lyapunov(A, -D)
    return 0.5 * (S + S.T)


def ou_moment_oracle(m0, cov0, t: float, gamma: float, omega0: float, tau_noise: float,
                     oracle: Optional[GradientOracle] = None) -> MomentState:
    """Exact mean and covariance of the SME with a quadratic loss.

    ``m0`` has length ``2d`` (parameter block then auxiliary block).  The
    covariance is ``S_inf - Phi (S_inf - cov0) Phi^T`` with ``S_inf`` the
    stationary solution of the Lyapunov equation, exact for Hurwitz drift.
    """
    if oracle is not None and oracle.amplitude != 0:
        raise DomainError("the moment oracle is exact only for an unperturbed quadratic loss")
    m0 = np.asarray(m0, dtype=float)
    dim = m0.size
    if dim % 2:
        raise DomainError("state dimension must be even")
    d = dim // 2
    cov0 = np.zeros((dim, dim)) if cov0 is None else np.asarray(cov0, dtype=float)
    if t == 0:
        return MomentState(m0.copy(), cov0.copy(), 0.0)
    Phi = np.kron(propagator(t, gamma, omega0), np.eye(d))
    S_inf = np.kron(stationary_cov(gamma, omega0, tau_noise), np.eye(d))
    cov = S_inf - Phi @ (S_inf - cov0) @ Phi.T
    return MomentState(Phi @ m0, 0.5 * (cov + cov.T), float(t))


# --------------------------------------------------------------------------
# Euler-Maruyama


def _em_update(theta, y, dt, gamma, tau_noise, oracle, xi):
    g = grad(oracle, theta)
    new_theta = theta + y * dt + tau_noise * math.sqrt(dt) * xi
    new_y = y + (-g - gamma * y) * dt
    return new_theta, new_y


def _check_dt(dt: float, gamma: float) -> None:
    if not dt > 0:
        raise DomainError("dt must be positive")
    if dt > 0.1 / gamma:
        warnings.warn(f"dt={dt:g} exceeds the stability guard 0.1/gamma={0.1 / gamma:g}",
                      RuntimeWarning, stacklevel=3)


def em_step(state: SmeState, dt: float, derived: DerivedParams, oracle: GradientOracle,
            rng: np.random.Generator) -> SmeState:
    _check_dt(dt, derived.gamma)
    xi = rng.standard_normal(state.Theta.shape) if derived.tau_noise else np.zeros_like(state.Theta)
    theta, y = _em_update(state.Theta, state.Y, dt, derived.gamma, derived.tau_noise, oracle, xi)
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(y))):
        raise NumericalInstabilityError("non-finite SME state")
    return SmeState(theta, y, state.t + dt)


def default_dt(derived: DerivedParams) -> float:
    return min(0.05 / derived.gamma, derived.dt_map)


def run_sme_ensemble(init: SmeState, T: float, dt: float, N: int, derived: DerivedParams,
                     oracle: GradientOracle, seed: int, n_records: int = 2,
                     keep_final: bool = False, chunk: int = 256) -> EnsembleMoments:
    """Euler-Maruyama ensemble from a deterministic initial state.

    The step is adjusted to ``T / round(T / dt)`` so the final record falls
    exactly on ``T``.  Path ``i`` draws its noise from its own generator.
    """
    if N < 2:
        raise DomainError("ensemble needs N >= 2")
    if T < 0:
        raise DomainError("T must be non-negative")
    n_steps = max(1, int(round(T / dt))) if T > 0 else 0
    h = T / n_steps if n_steps else dt
    _check_dt(h, derived.gamma)
    d = init.Theta.size
    theta = np.tile(init.Theta, (N, 1))
    y = np.tile(init.Y, (N, 1))
    record_steps = np.unique(np.linspace(0, n_steps, max(n_records, 2)).round().astype(int))
    streams = PathStreams(seed, N) if derived.tau_noise else None

    times, means, covs = [], [], []

    def record(k):
        mean, cov = batch_moments(np.hstack([theta, y]))
        times.append(init.t + k * h)
        means.append(mean)
        covs.append(cov)

    next_rec = 0
    if record_steps[0] == 0:
        record(0)
        next_rec = 1
    k = 0
    while k < n_steps:
        m = min(chunk, n_steps - k)
        noise = streams.standard_normal((m, d)) if streams is not None else np.zeros((N, m, d))
        for j in range(m):
            theta, y = _em_update(theta, y, h, derived.gamma, derived.tau_noise, oracle, noise[:, j])
            k += 1
            if next_rec < len(record_steps) and k == record_steps[next_rec]:
                record(k)
                next_rec += 1
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(y))):
            raise NumericalInstabilityError("non-finite SME state in ensemble")
    return EnsembleMoments(
        times=np.asarray(times),
        mean=np.asarray(means),
        cov=np.asarray(covs),
        n=N,
        steps=record_steps,
        final_states=np.hstack([theta, y]) if keep_final else None,
    )
