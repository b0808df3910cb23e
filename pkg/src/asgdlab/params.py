"""Parameter algebra for the ASGD stochastic modified equation.

Maps the algorithmic inputs (learning rate, staleness rate, curvature, gradient
noise) to the constants of the second-order SDE and evaluates the closed-form
decay rates, the learning-rate threshold and the worker speedup condition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import DegenerateDiffusionError, DomainError

#: relative tolerance on |gamma - 2 omega0| / gamma for the critical regime
CRITICAL_RTOL = 1e-9

UNDERDAMPED = "underdamped"
OVERDAMPED = "overdamped"
CRITICAL = "critical"


@dataclass(frozen=True)
class Params:
    """Algorithmic inputs.

    ``kappa = 0`` is accepted as the synchronous (plain SGD) limit.
    ``sigma_grad`` is the scale of an isotropic gradient-noise covariance
    ``sigma_grad**2 * I``.
    """

    eta: float
    kappa: float
    omega0: float = 1.0
    sigma_grad: float = 1.0
    d: int = 1
    m: int = 1

    def __post_init__(self):
        if not self.eta > 0:
            raise DomainError(f"eta must be > 0, got {self.eta}")
        if not 0 <= self.kappa < 1:
            raise DomainError(f"kappa must lie in [0, 1), got {self.kappa}")
        if not self.omega0 > 0:
            raise DomainError(f"omega0 must be > 0, got {self.omega0}")
        if not self.sigma_grad >= 0:
            raise DomainError(f"sigma_grad must be >= 0, got {self.sigma_grad}")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"d must be a positive integer, got {self.d}")
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"m must be a positive integer, got {self.m}")


@dataclass(frozen=True)
class DerivedParams:
    gamma: float
    tau_noise: float
    dt_map: float
    omega0: float
    sigma_grad: float
    eta: float
    kappa: float

    @property
    def beta(self) -> float:
        """Inverse temperature ``2 gamma / (tau_noise**2 omega0**4)``."""
        if self.tau_noise == 0:
            raise DegenerateDiffusionError("degenerate diffusion: sigma_grad = 0 gives beta = inf")
        return 2.0 * self.gamma / (self.tau_noise**2 * self.omega0**4)

    @property
    def beta_closed_form(self) -> float:
        """``2 (1 - kappa) / (eta**2 sigma**2 omega0**4)``; equals :attr:`beta` algebraically."""
        if self.sigma_grad == 0:
            raise DegenerateDiffusionError("degenerate diffusion: sigma_grad = 0 gives beta = inf")
        return 2.0 * (1.0 - self.kappa) / (self.eta**2 * self.sigma_grad**2 * self.omega0**4)


@dataclass(frozen=True)
class RateCase:
    regime: str
    mu_thm: float
    C: Optional[float]
    C_hat: Optional[float]
    mu_matrix: float


def derive_params(p: Params) -> DerivedParams:
    one_minus_k = 1.0 - p.kappa
    gamma = math.sqrt(one_minus_k / p.eta)
    tau_noise = p.eta**0.75 / one_minus_k**0.25 * p.sigma_grad
    dt_map = math.sqrt(p.eta * one_minus_k)
    return DerivedParams(
        gamma=gamma,
        tau_noise=tau_noise,
        dt_map=dt_map,
        omega0=p.omega0,
        sigma_grad=p.sigma_grad,
        eta=p.eta,
        kappa=p.kappa,
    )


def regime(gamma: float, omega0: float) -> str:
    if abs(gamma - 2.0 * omega0) <= CRITICAL_RTOL * gamma:
        return CRITICAL
    return UNDERDAMPED if gamma < 2.0 * omega0 else OVERDAMPED


def friction_matrix_abscissa(gamma: float, omega0: float) -> float:
    """Smallest real part among the roots of ``lam**2 - gamma lam + omega0**2``."""
    disc = gamma * gamma - 4.0 * omega0 * omega0
    if disc <= 0:
        return gamma / 2.0
    return (gamma - math.sqrt(disc)) / 2.0


def theorem_rate(gamma: float, omega0: float, delta: Optional[float] = None) -> RateCase:
    """Three-case table of decay constants.

    In the critical regime ``mu_thm = gamma - delta`` (NaN without ``delta``)
    and ``C, C_hat`` are left as ``None``; use :func:`asgdlab.hypo.find_C_Chat`.
    """
    if not (gamma > 0 and omega0 > 0):
        raise DomainError("gamma and omega0 must be positive")
    reg = regime(gamma, omega0)
    mu_matrix = friction_matrix_abscissa(gamma, omega0)
    if reg == UNDERDAMPED:
        return RateCase(reg, gamma, omega0**2, gamma / 2.0, mu_matrix)
    if reg == OVERDAMPED:
        mu = gamma - math.sqrt(gamma * gamma - 4.0 * omega0 * omega0)
        return RateCase(reg, mu, gamma**2 / 2.0 - omega0**2, gamma / 2.0, mu_matrix)
    mu = gamma - delta if delta is not None else math.nan
    return RateCase(reg, mu, None, None, mu_matrix)


def lr_threshold(kappa: float, omega0: float) -> float:
    return (1.0 - kappa) / (4.0 * omega0**2)


def per_step_exponent(eta: float, kappa: float, omega0: float) -> float:
    """Decay exponent per iteration, ``mu_thm * dt_map``."""
    if not eta > 0 or not 0 <= kappa < 1:
        raise DomainError("need eta > 0 and 0 <= kappa < 1")
    a = 1.0 - kappa
    disc = a * a - 4.0 * omega0**2 * a * eta
    if eta >= lr_threshold(kappa, omega0) or disc <= 0:
        return a
    return a - math.sqrt(disc)


def speedup_predicate(m: int, kappa: float) -> bool:
    """True when ``m`` asynchronous workers beat single-worker SGD."""
    return (1.0 - kappa) * m > 1.0
