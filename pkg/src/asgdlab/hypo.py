"""Lyapunov-matrix certificates for hypocoercive decay.

Every block of the ``2d x 2d`` matrices is a scalar multiple of ``I_d``, so
the certificate is checked on the reduced ``2 x 2`` matrices

    Q = [[0, 1], [-omega0**2, gamma]],   P = [[1, C_hat], [C_hat, C]],
    K = Q P + P Q^T,

and ``K >= 2 mu P`` yields decay of the functional
``|d_x h|^2 + C |d_v h|^2 + 2 C_hat <d_x h, d_v h>`` at rate ``2 mu``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import CertificateError, DomainError
from .params import CRITICAL, theorem_rate

PSD_TOL = 1e-10


@dataclass(frozen=True)
class HypoMatrices:
    Q2: np.ndarray
    P2: np.ndarray
    K2: np.ndarray

    @property
    def p_positive_definite(self) -> bool:
        return bool(self.P2[1, 1] > self.P2[0, 1] ** 2)


def build_matrices(gamma: float, omega0: float, C: float, C_hat: float) -> HypoMatrices:
    w2 = omega0 * omega0
    Q2 = np.array([[0.0, 1.0], [-w2, gamma]])
    P2 = np.array([[1.0, C_hat], [C_hat, C]])
    off = C - w2 + gamma * C_hat
    K2 = np.array([[2.0 * C_hat, off], [off, 2.0 * gamma * C - 2.0 * w2 * C_hat]])
    recomposed = Q2 @ P2 + P2 @ Q2.T
    scale = max(1.0, float(np.abs(K2).max()))
    if not np.allclose(K2, recomposed, rtol=0, atol=1e-12 * scale):
        raise CertificateError("K != QP + PQ^T")
    return HypoMatrices(Q2, P2, K2)


def _min_eig_sym(a: np.ndarray) -> float:
    # closed form for symmetric 2x2: mean - sqrt(half-diff^2 + off^2)
    m = 0.5 * (a[0, 0] + a[1, 1])
    r = math.hypot(0.5 * (a[0, 0] - a[1, 1]), a[0, 1])
    return m - r


def check_certificate(mats: HypoMatrices, mu: float) -> float:
    """Minimum eigenvalue of ``K - 2 mu P``; the certificate holds iff >= -1e-10."""
    if not mats.p_positive_definite:
        raise CertificateError("P not positive definite (C <= C_hat**2)")
    return float(_min_eig_sym(mats.K2 - 2.0 * mu * mats.P2))


def certified_rate_sup(mats: HypoMatrices, tol: float = 1e-12, hi: Optional[float] = None) -> float:
    """Largest ``mu`` with a non-negative margin, by bisection.

    The margin is non-increasing in ``mu`` because ``P`` is positive definite.
    """
    lo = 0.0
    if check_certificate(mats, lo) < -PSD_TOL:
        raise CertificateError("K is not positive semidefinite; no mu >= 0 certified")
    hi = hi if hi is not None else 1.0
    while check_certificate(mats, hi) >= 0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if check_certificate(mats, mid) >= 0:
            lo = mid
        else:
            hi = mid
    return lo


def _margin_grid(gamma, omega0, C, C_hat, mu):
    w2 = omega0 * omega0
    off = C - w2 + gamma * C_hat - 2.0 * mu * C_hat
    a = 2.0 * C_hat - 2.0 * mu
    b = 2.0 * gamma * C - 2.0 * w2 * C_hat - 2.0 * mu * C
    return 0.5 * (a + b) - np.hypot(0.5 * (a - b), off)


def find_C_Chat(gamma: float, omega0: float, delta: float, n_grid: int = 400,
                resolution: float = 1e-4) -> tuple[float, float]:
    """Search ``(C, C_hat)`` certifying rate ``mu_matrix - delta`` at the critical point.

    Log-spaced grid over ``C_hat in (0, gamma]`` and ``C in (C_hat**2, 4 gamma**2]``
    scored by margin per unit ``C``; the best ``C_hat`` row is then refined by
    bisection on the upper edge of the admissible ``C`` interval.
    """
    rate = theorem_rate(gamma, omega0)
    if rate.regime != CRITICAL:
        raise DomainError("find_C_Chat is meant for the critical regime gamma = 2 omega0")
    if not 0 < delta < rate.mu_matrix:
        raise DomainError(f"need 0 < delta < {rate.mu_matrix}")
    mu = rate.mu_matrix - delta
    c_top = 4.0 * gamma * gamma

    Ch = np.geomspace(resolution, gamma, n_grid)[:, None]
    C = Ch**2 + np.geomspace(resolution, c_top, n_grid)[None, :]
    C = np.minimum(C, c_top)
    score = np.where(C > Ch**2, _margin_grid(gamma, omega0, C, Ch, mu) / C, -np.inf)
    i, j = np.unravel_index(np.argmax(score), score.shape)
    C_best, Ch_best = float(C[i, j]), float(Ch[i, 0])
    if _margin_grid(gamma, omega0, C_best, Ch_best, mu) < 0:
        raise CertificateError("no certificate found")

    # bisect for the largest admissible C on the chosen row; move halfway
    # toward it when that improves the score
    def ok(c):
        return c > Ch_best**2 and _margin_grid(gamma, omega0, c, Ch_best, mu) >= 0

    lo, hi = C_best, c_top
    if ok(hi):
        edge = hi
    else:
        while hi - lo > resolution * 1e-3:
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if ok(mid) else (lo, mid)
        edge = lo
    C_out = C_best
    mid = 0.5 * (C_best + edge)
    if ok(mid) and _margin_grid(gamma, omega0, mid, Ch_best, mu) / mid > score[i, j]:
        C_out = mid
    return float(C_out), Ch_best


def constants(gamma: float, beta: float, omega0: float, C: float, C_hat: float,
              eps0: float, mu: Optional[float] = None) -> dict:
    """Perturbation constants ``C2``, the rate shift ``eps_shift`` and ``2 (mu - eps_shift)``.

    ``eps_shift`` is linear in ``eps0``.
    """
    gap = C - C_hat * C_hat
    if gap <= 0:
        raise CertificateError("C - C_hat**2 must be positive")
    if eps0 < 0:
        raise DomainError("eps0 must be >= 0")
    w2 = omega0 * omega0
    C2 = max(1.0, gamma, gamma * gamma, beta * gamma, beta * w2) / min(1.0, w2)
    eps_shift = (11.0 + 11.0 * C + 15.0 * C_hat) * eps0 * C2 * C2 * max(1.0, C) / gap
    out = {"C2": C2, "eps_shift": eps_shift}
    if mu is not None:
        out["net_rate"] = 2.0 * (mu - eps_shift)
    return out


@dataclass(frozen=True)
class HypoReport:
    gamma: float
    omega0: float
    beta: float
    regime: str
    mu_matrix: float
    mu_thm: float
    C: float
    C_hat: float
    psd_margin: float
    psd_margin_at_mu_thm: float
    C2: float
    eps0: float
    eps_shift: float
    net_rate: float
    net_rate_thm: float
    mu_convention: str = "net_rate uses mu_matrix; net_rate_thm uses mu_thm"

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)


def hypo_report(gamma: float, omega0: float, beta: float, eps0: float = 0.0,
                delta: Optional[float] = None) -> HypoReport:
    """Full certificate for one parameter point.

    In the critical regime ``delta`` (default ``mu_matrix / 10``) sets the
    certified rate ``mu_matrix - delta`` and ``(C, C_hat)`` come from
    :func:`find_C_Chat`.
    """
    rate = theorem_rate(gamma, omega0, delta)
    mu = rate.mu_matrix
    if rate.regime == CRITICAL:
        delta = rate.mu_matrix / 10 if delta is None else delta
        rate = theorem_rate(gamma, omega0, delta)
        C, C_hat = find_C_Chat(gamma, omega0, delta)
        mu = rate.mu_matrix - delta
    else:
        C, C_hat = rate.C, rate.C_hat
    mats = build_matrices(gamma, omega0, C, C_hat)
    consts = constants(gamma, beta, omega0, C, C_hat, eps0, mu)
    return HypoReport(
        gamma=gamma,
        omega0=omega0,
        beta=beta,
        regime=rate.regime,
        mu_matrix=rate.mu_matrix,
        mu_thm=rate.mu_thm,
        C=C,
        C_hat=C_hat,
        psd_margin=check_certificate(mats, mu),
        psd_margin_at_mu_thm=check_certificate(mats, rate.mu_thm),
        C2=consts["C2"],
        eps0=eps0,
        eps_shift=consts["eps_shift"],
        net_rate=consts["net_rate"],
        net_rate_thm=2.0 * (rate.mu_thm - consts["eps_shift"]),
    )
