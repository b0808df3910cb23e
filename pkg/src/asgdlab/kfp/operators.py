"""Transport, Fokker-Planck and perturbation operators on Hermite fields.

In the scaled variables ``xi = x / s_x`` and ``zeta = v / s_v`` the operators
act on the coefficient array ``c[i, j]`` (row index for ``x``, column index
for ``v``) as

    T c = omega0 (D c D - D^T c D^T),     L c = -gamma c diag(j),

with ``D`` the lowering matrix.  ``T`` maps the degree-``(i, j)`` mode to
degrees ``(i-1, j+1)`` and ``(i+1, j-1)``, ``L`` is diagonal.  The
perturbation ``R`` has non-polynomial coefficients and is evaluated by
Gauss-Hermite quadrature.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from itertools import combinations_with_replacement
from typing import Callable, Optional

import numpy as np

from ..errors import DomainError, TruncationWarning
from ..hypo import constants
from ..loss import GradientOracle, PerturbationBounds
from .basis import GaussianMeasure, HermiteField, hermite_table, lowering, quadrature_inner, weighted_inner

TRUNCATION_TOL = 1e-8
INEQ_TOL = 1e-10


# --------------------------------------------------------------------------
# coefficient-space operators


def _pad(h: HermiteField, extend: bool) -> np.ndarray:
    return np.pad(h.coeffs, ((0, 1), (0, 1))) if extend else h.coeffs


def _truncation_check(full: np.ndarray, N: int, name: str) -> np.ndarray:
    dropped = float(np.sum(full[N + 1:, :] ** 2) + np.sum(full[:N + 1, N + 1:] ** 2))
    if dropped > TRUNCATION_TOL:
        warnings.warn(f"{name}: truncation at degree {N} drops mass {dropped:.3g}",
                      TruncationWarning, stacklevel=3)
    return full[:N + 1, :N + 1]


def transport_coeffs(c: np.ndarray, omega0: float) -> np.ndarray:
    D = lowering(c.shape[0] - 1)
    return omega0 * (D @ c @ D - D.T @ c @ D.T)


def fokker_planck_coeffs(c: np.ndarray, gamma: float) -> np.ndarray:
    return -gamma * c * np.arange(c.shape[1], dtype=float)[None, :]


def apply_T(h: HermiteField, extend: bool = False) -> HermiteField:
    """``v d_x h - omega0**2 x d_v h``.

    With ``extend=True`` the result lives at degree ``N + 1`` and is exact;
    otherwise it is truncated at ``N`` with a :class:`TruncationWarning` when
    more than ``1e-8`` of squared mass is lost.
    """
    full = transport_coeffs(np.pad(h.coeffs, ((0, 1), (0, 1))), h.measure.omega0)
    if extend:
        return HermiteField(full, h.measure)
    return HermiteField(_truncation_check(full, h.N, "apply_T"), h.measure)


def apply_L(h: HermiteField, gamma: float, extend: bool = False) -> HermiteField:
    """``gamma (-v d_v h + beta**-1 d_v**2 h)``; diagonal, so never truncates."""
    return HermiteField(fokker_planck_coeffs(_pad(h, extend), gamma), h.measure)


def eps_phase(oracle: GradientOracle, gamma: float, x, v):
    """Perturbation value and its ``x``/``v`` partials through ``theta = -(v + gamma x)/omega0**2``."""
    w2 = oracle.omega0**2
    theta = -(v + gamma * x) / w2
    e = oracle.eps(theta)
    ep = oracle.eps_prime(theta)
    return e, ep * (-gamma / w2), ep * (-1.0 / w2)


@dataclass
class _GridValues:
    """Point values of ``h`` and its derivatives up to order two on a tensor grid."""

    x: np.ndarray
    v: np.ndarray
    w: np.ndarray
    h: np.ndarray
    hx: np.ndarray
    hv: np.ndarray
    hxx: np.ndarray
    hxv: np.ndarray
    hvv: np.ndarray


def _grid(h: HermiteField, n_quad: int) -> _GridValues:
    (xs, wx), (vs, wv) = h.measure.quadrature(n_quad)
    hx, hv = h.dx(), h.dv()
    X, V = np.meshgrid(xs, vs, indexing="ij")
    return _GridValues(
        x=X, v=V, w=np.outer(wx, wv),
        h=h.evaluate(xs, vs), hx=hx.evaluate(xs, vs), hv=hv.evaluate(xs, vs),
        hxx=hx.dx().evaluate(xs, vs), hxv=hx.dv().evaluate(xs, vs), hvv=hv.dv().evaluate(xs, vs),
    )


def _project(values: np.ndarray, measure: GaussianMeasure, N: int, n_quad: int) -> np.ndarray:
    (xs, wx), (vs, wv) = measure.quadrature(n_quad)
    Bx = hermite_table(xs / measure.sx, N)
    Bv = hermite_table(vs / measure.sv, N)
    return (Bx * wx[:, None]).T @ values @ (Bv * wv[:, None])


def _R_values(g: _GridValues, oracle: GradientOracle, gamma: float, beta: float):
    e, _, _ = eps_phase(oracle, gamma, g.x, g.v)
    w2 = oracle.omega0**2
    return e * (g.hx - gamma * g.hv) - beta * e * (w2 * g.x - gamma * g.v) * g.h


def apply_R(h: HermiteField, oracle: GradientOracle, gamma: float, extend: bool = False,
            n_quad: Optional[int] = None) -> HermiteField:
    """``eps (d_x h - gamma d_v h) - beta eps (omega0**2 x - gamma v) h`` projected by quadrature.

    The truncation monitor projects onto degree ``N + 1`` and warns when the
    outer shell carries more than ``1e-8`` of squared mass.
    """
    m = h.measure
    if oracle.omega0 != m.omega0:
        raise DomainError("oracle and measure disagree on omega0")
    if oracle.amplitude == 0:
        N_out = h.N + 1 if extend else h.N
        return HermiteField.zeros(m, N_out)
    n = n_quad or max(4 * h.N + 5, 64)
    vals = _R_values(_grid(h, n), oracle, gamma, m.beta)
    full = _project(vals, m, h.N + 1, n)
    if extend:
        return HermiteField(full, m)
    return HermiteField(_truncation_check(full, h.N, "apply_R"), m)


# --------------------------------------------------------------------------
# polynomial battery


def standard_battery() -> dict[str, Callable]:
    """The test functions ``1, x, v, x**2, x v, v**2``."""
    return {
        "1": lambda x, v: np.ones_like(x),
        "x": lambda x, v: x,
        "v": lambda x, v: v,
        "x^2": lambda x, v: x * x,
        "xv": lambda x, v: x * v,
        "v^2": lambda x, v: v * v,
    }


def battery_fields(measure: GaussianMeasure, N: int,
                   battery: Optional[dict[str, Callable]] = None) -> dict[str, HermiteField]:
    battery = battery or standard_battery()
    return {name: HermiteField.from_function(f, measure, N) for name, f in battery.items()}


# --------------------------------------------------------------------------
# identities


@dataclass
class IdentityReport:
    transport_pair: dict = field(default_factory=dict)   # |<Tg,h> + <Th,g>|
    transport_self: dict = field(default_factory=dict)   # |<Th,h>|
    dissipation: dict = field(default_factory=dict)      # |<Lg,h> + gamma/beta <d_v g, d_v h>|
    route: str = "coefficient"

    @property
    def max_residual(self) -> float:
        vals = [*self.transport_pair.values(), *self.transport_self.values(), *self.dissipation.values()]
        return max(vals) if vals else 0.0

    def as_dict(self) -> dict:
        out = asdict(self)
        out["max_residual"] = self.max_residual
        return out


def verify_identities(measure: GaussianMeasure, gamma: float, N: int = 4,
                      battery: Optional[dict[str, Callable]] = None,
                      route: str = "coefficient") -> IdentityReport:
    """Residuals of the antisymmetry of ``T`` and the dissipation identity for ``L``.

    ``route="coefficient"`` uses Parseval; ``route="quadrature"`` evaluates
    point values of the operator images and integrates them.  Battery
    functions must have degree ``<= N - 1`` so ``T`` stays resolved.
    """
    if route not in ("coefficient", "quadrature"):
        raise DomainError(f"unknown route {route!r}")
    fields = battery_fields(measure, N, battery)
    for name, f in fields.items():
        if np.any(f.coeffs[N, :] ** 2 > 1e-20) or np.any(f.coeffs[:, N] ** 2 > 1e-20):
            raise DomainError(f"battery function {name} needs degree <= N - 1")
    beta = measure.beta
    n_quad = 2 * N + 3

    def inner(a, b):
        return weighted_inner(a, b) if route == "coefficient" else quadrature_inner(a, b, n_quad)

    rep = IdentityReport(route=route)
    Tf = {k: apply_T(f) for k, f in fields.items()}
    Lf = {k: apply_L(f, gamma) for k, f in fields.items()}
    dvf = {k: f.dv() for k, f in fields.items()}
    for a, b in combinations_with_replacement(fields, 2):
        key = f"{a}|{b}"
        rep.transport_pair[key] = abs(inner(Tf[a], fields[b]) + inner(Tf[b], fields[a]))
        rep.dissipation[key] = abs(inner(Lf[a], fields[b]) + gamma / beta * inner(dvf[a], dvf[b]))
    for a, f in fields.items():
        rep.transport_self[a] = abs(inner(Tf[a], f))
        s = f + fields["x"] if "x" in fields and a != "x" else f
        rep.transport_self[f"{a}+x"] = abs(inner(apply_T(s), s))
    return rep


# --------------------------------------------------------------------------
# perturbation inequalities


@dataclass(frozen=True)
class InequalityCheck:
    name: str
    functions: str
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + INEQ_TOL

    def as_dict(self) -> dict:
        return {"name": self.name, "functions": self.functions, "lhs": self.lhs,
                "rhs": self.rhs, "holds": self.holds}


def _d_R(g: _GridValues, oracle: GradientOracle, gamma: float, beta: float):
    """``d_x (R h)`` and ``d_v (R h)`` on the grid from analytic derivatives of ``eps``."""
    w2 = oracle.omega0**2
    e, ex, ev = eps_phase(oracle, gamma, g.x, g.v)
    lin = w2 * g.x - gamma * g.v
    flux = g.hx - gamma * g.hv
    dRx = (ex * flux + e * (g.hxx - gamma * g.hxv)
           - beta * (ex * lin + e * w2) * g.h - beta * e * lin * g.hx)
    dRv = (ev * flux + e * (g.hxv - gamma * g.hvv)
           - beta * (ev * lin - e * gamma) * g.h - beta * e * lin * g.hv)
    return dRx, dRv


def verify_perturbation_bounds(measure: GaussianMeasure, oracle: GradientOracle, gamma: float,
                               bounds: PerturbationBounds, N: int = 6,
                               battery: Optional[dict[str, Callable]] = None,
                               n_quad: int = 96) -> list[InequalityCheck]:
    """Evaluate both sides of the four perturbation inequalities by quadrature.

    The single-function form of the first inequality runs on every battery
    function and its pair form on every pair.  The three gradient
    inequalities are stated for fluctuations of zero mean, so they are
    checked on the mean-centred battery.
    """
    beta = measure.beta
    eps0 = bounds.eps0
    C2 = constants(gamma, beta, measure.omega0, 1.0, 0.0, 0.0)["C2"]
    fields = battery_fields(measure, N, battery)
    grids = {k: _grid(f, n_quad) for k, f in fields.items()}
    out: list[InequalityCheck] = []

    Rv = {k: _R_values(g, oracle, gamma, beta) for k, g in grids.items()}
    nsq = {k: f.norm_sq() for k, f in fields.items()}

    def q(a, b, w):
        return float(np.sum(w * a * b))

    for k, g in grids.items():
        out.append(InequalityCheck("c", k, q(Rv[k], g.h, g.w), eps0 * C2 * nsq[k]))
    for a, b in combinations_with_replacement(fields, 2):
        if a == b:
            continue
        ga, gb = grids[a], grids[b]
        lhs = q(Rv[a], gb.h, ga.w) + q(Rv[b], ga.h, ga.w)
        out.append(InequalityCheck("c_pair", f"{a}|{b}", lhs, eps0 * C2 * (nsq[a] + nsq[b])))

    k2 = eps0 * C2 * C2
    for k, f in fields.items():
        centred = HermiteField(f.coeffs.copy(), measure)
        centred.coeffs[0, 0] = 0.0
        g = _grid(centred, n_quad)
        nx = centred.dx().norm_sq()
        nv = centred.dv().norm_sq()
        dRx, dRv = _d_R(g, oracle, gamma, beta)
        out.append(InequalityCheck("d", k, q(dRx, g.hx, g.w), 5.5 * k2 * nx + 2.0 * k2 * nv))
        out.append(InequalityCheck("e", k, q(dRv, g.hv, g.w), 5.5 * k2 * nv + 2.0 * k2 * nx))
        out.append(InequalityCheck("f", k, q(dRx, g.hv, g.w) + q(dRv, g.hx, g.w), 7.5 * k2 * (nx + nv)))
    return out


def perturbation_identity_residual(h: HermiteField, oracle: GradientOracle, gamma: float,
                                   n_quad: int = 96) -> float:
    """``|<Rh, h> + 1/2 <beta eps (omega0**2 x - gamma v), h**2>|``, zero by integration by parts."""
    g = _grid(h, n_quad)
    beta = h.measure.beta
    e, _, _ = eps_phase(oracle, gamma, g.x, g.v)
    lhs = float(np.sum(g.w * _R_values(g, oracle, gamma, beta) * g.h))
    rhs = -0.5 * float(np.sum(g.w * beta * e * (oracle.omega0**2 * g.x - gamma * g.v) * g.h**2))
    return abs(lhs - rhs)


# --------------------------------------------------------------------------
# Poincare inequality and Lyapunov functional


@dataclass(frozen=True)
class PoincareCheck:
    lhs: float
    rhs: float
    d: int
    source: str = "coefficients"

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-12

    def as_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "d": self.d, "holds": self.holds,
                "source": self.source}


def check_poincare(h: HermiteField, d: int = 1) -> PoincareCheck:
    """``||h||^2 <= (||d_x h||^2 + ||d_v h||^2) / (d beta min(omega0**2, 1))`` for mean-zero ``h``."""
    if not h.is_mean_zero():
        raise DomainError("not mean-zero: the Poincare check needs c_00 = 0")
    m = h.measure
    rhs = (h.dx().norm_sq() + h.dv().norm_sq()) / (d * m.beta * min(m.omega0**2, 1.0))
    return PoincareCheck(h.norm_sq(), rhs, d)


def poincare_linear_closed_form(beta: float, omega0: float, d: int = 2) -> PoincareCheck:
    """Both sides for ``h = x_1`` in ``d`` dimensions from Gaussian moments.

    ``||x_1||^2 = 1/(beta omega0**2)`` and ``||grad h||^2 = 1``; with the
    ``1/d`` factor the inequality fails for ``d >= 2`` once ``omega0 >= 1``.
    """
    lhs = 1.0 / (beta * omega0**2)
    rhs = 1.0 / (d * beta * min(omega0**2, 1.0))
    return PoincareCheck(lhs, rhs, d, source="closed_form")


def lyapunov_H(h: HermiteField, C: float, C_hat: float) -> float:
    """``||d_x h||^2 + C ||d_v h||^2 + 2 C_hat <d_x h, d_v h>`` in coefficient space."""
    if not C > C_hat * C_hat:
        raise DomainError("need C > C_hat**2")
    hx, hv = h.dx(), h.dv()
    return hx.norm_sq() + C * hv.norm_sq() + 2.0 * C_hat * weighted_inner(hx, hv)


def lyapunov_H_coeffs(c: np.ndarray, measure: GaussianMeasure, C: float, C_hat: float) -> np.ndarray:
    """Vectorised :func:`lyapunov_H` over a stack of coefficient arrays ``(..., N+1, N+1)``."""
    D = lowering(c.shape[-1] - 1)
    cx = np.einsum("ij,...jk->...ik", D, c) / measure.sx
    cv = np.einsum("...ij,kj->...ik", c, D) / measure.sv
    return (np.sum(cx * cx, axis=(-2, -1)) + C * np.sum(cv * cv, axis=(-2, -1))
            + 2.0 * C_hat * np.sum(cx * cv, axis=(-2, -1)))
