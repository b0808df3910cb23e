"""Perturbed quadratic objective and its gradient oracles.

The gradient is ``omega0**2 * theta + eps(theta)`` with an optional
componentwise perturbation ``eps_i = a * tanh(theta_i) * exp(-theta_i**2)``,
which is smooth, odd and has bounded value and derivative.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

ZERO = "zero"
SCALED_BOUNDED = "scaled_bounded"


def profile(theta):
    return np.tanh(theta) * np.exp(-np.square(theta))


def profile_derivative(theta):
    t = np.tanh(theta)
    return np.exp(-np.square(theta)) * ((1.0 - t * t) - 2.0 * theta * t)


@dataclass(frozen=True)
class GradientOracle:
    omega0: float = 1.0
    amplitude: float = 0.0
    sigma_grad: float = 0.0

    def __post_init__(self):
        if not self.omega0 > 0:
            raise DomainError("omega0 must be positive")
        if not self.amplitude >= 0:
            raise DomainError("perturbation amplitude must be >= 0")
        if not self.sigma_grad >= 0:
            raise DomainError("sigma_grad must be >= 0")

    @property
    def epsilon_model(self) -> str:
        return ZERO if self.amplitude == 0 else SCALED_BOUNDED

    def eps(self, theta):
        if self.amplitude == 0:
            return np.zeros_like(np.asarray(theta, dtype=float))
        return self.amplitude * profile(np.asarray(theta, dtype=float))

    def eps_prime(self, theta):
        if self.amplitude == 0:
            return np.zeros_like(np.asarray(theta, dtype=float))
        return self.amplitude * profile_derivative(np.asarray(theta, dtype=float))


def grad(oracle: GradientOracle, theta):
    theta = np.asarray(theta, dtype=float)
    return oracle.omega0**2 * theta + oracle.eps(theta)


def stochastic_grad(oracle: GradientOracle, theta, rng: np.random.Generator):
    """Exact gradient plus isotropic Gaussian noise of standard deviation ``sigma_grad``."""
    g = grad(oracle, theta)
    if oracle.sigma_grad == 0:
        return g
    return g + oracle.sigma_grad * rng.standard_normal(g.shape)


@dataclass(frozen=True)
class PerturbationBounds:
    eps_sup: float          # max_i ||eps_i||
    eps_dot_x: float        # ||eps . x||
    eps_dot_v: float        # ||eps . v||
    d_eps_prime_sup: float  # d * max_i ||eps_i'||
    sum_eps_prime: float    # sum_i ||eps_i'||
    eps_prime_dot_x: float  # ||eps' . x||
    eps_prime_dot_v: float  # ||eps' . v||
    L: float
    n_grid: int

    @property
    def eps0(self) -> float:
        return max(self.eps_sup, self.eps_dot_x, self.eps_dot_v, self.d_eps_prime_sup,
                   self.sum_eps_prime, self.eps_prime_dot_x, self.eps_prime_dot_v)

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "eps_sup", "eps_dot_x", "eps_dot_v", "d_eps_prime_sup", "sum_eps_prime",
            "eps_prime_dot_x", "eps_prime_dot_v", "L", "n_grid")}
        out["eps0"] = self.eps0
        return out


def perturbation_bounds(oracle: GradientOracle, gamma: float, L: float = 6.0,
                        n_grid: int = 401, d: int = 1) -> PerturbationBounds:
    """Sup-norm seminorms of the perturbation on the box ``[-L, L]**(2d)``.

    The perturbation is read in phase-space coordinates through
    ``theta = -(v + gamma x) / omega0**2``.  Because every component uses the
    same profile of its own ``(x_i, v_i)`` pair, the ``d``-dimensional sups
    reduce to ``d`` times a two-dimensional grid maximum.
    """
    if not L > 0:
        raise DomainError("L must be positive")
    s = np.linspace(-L, L, n_grid)
    x, v = np.meshgrid(s, s, indexing="ij")
    theta = -(v + gamma * x) / oracle.omega0**2
    e = np.abs(oracle.eps(theta))
    ep = np.abs(oracle.eps_prime(theta))
    eps_sup = float(e.max())
    eps_prime_sup = float(ep.max())
    return PerturbationBounds(
        eps_sup=eps_sup,
        eps_dot_x=d * float((e * np.abs(x)).max()),
        eps_dot_v=d * float((e * np.abs(v)).max()),
        d_eps_prime_sup=d * eps_prime_sup,
        sum_eps_prime=d * eps_prime_sup,
        eps_prime_dot_x=d * float((ep * np.abs(x)).max()),
        eps_prime_dot_v=d * float((ep * np.abs(v)).max()),
        L=float(L),
        n_grid=int(n_grid),
    )
