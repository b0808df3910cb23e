"""Log-linear fits of exponential decay."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True)
class RateFit:
    """``y(t) ≈ exp(intercept) * exp(-rate * t)`` on ``window``."""

    rate: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    n_points: int
    rate_stderr: float

    def as_dict(self) -> dict:
        out = asdict(self)
        out["window"] = list(self.window)
        return out


def fit_rate(t: Sequence[float], y: Sequence[float],
             window: Optional[tuple[float, float]] = None) -> RateFit:
    """Least-squares line through ``(t, log y)`` restricted to ``window``.

    Raises :class:`DomainError` on a nonpositive sample inside the window or
    when fewer than three points fall in it.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise DomainError("t and y must be 1-D arrays of equal length")
    lo, hi = window if window is not None else (float(t.min()), float(t.max()))
    mask = (t >= lo) & (t <= hi)
    n = int(mask.sum())
    if n < 3:
        raise DomainError(f"insufficient points: {n} in window [{lo}, {hi}], need >= 3")
    ts, ys = t[mask], y[mask]
    if np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise DomainError("nonpositive sample in window")
    ly = np.log(ys)
    tm = ts.mean()
    dt = ts - tm
    sxx = float(dt @ dt)
    if sxx == 0:
        raise DomainError("window contains a single time value")
    slope = float(dt @ (ly - ly.mean())) / sxx
    intercept = float(ly.mean() - slope * tm)
    resid = ly - (intercept + slope * ts)
    ss_res = float(resid @ resid)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    if ss_tot <= 1e-300:
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    stderr = math.sqrt(ss_res / (n - 2) / sxx) if n > 2 else math.nan
    return RateFit(rate=-slope, intercept=intercept, r_squared=r2,
                   window=(float(lo), float(hi)), n_points=n, rate_stderr=stderr)


def proportional_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Slope and ``R^2`` of ``y ≈ b x`` through the origin.

    ``R^2`` uses the centred total sum of squares, so it is comparable with
    an ordinary regression.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b = float(x @ y / (x @ x))
    ss_res = float(((y - b * x) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    return b, (1.0 - ss_res / ss_tot) if ss_tot > 0 else 1.0


def first_crossing(t: Sequence[float], y: Sequence[float], target: float) -> Optional[float]:
    """First time ``y`` drops to ``target``, linearly interpolated between samples."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    below = np.nonzero(y <= target)[0]
    if len(below) == 0:
        return None
    k = int(below[0])
    if k == 0:
        return float(t[0])
    y0, y1 = y[k - 1], y[k]
    frac = (y0 - target) / (y0 - y1)
    return float(t[k - 1] + frac * (t[k] - t[k - 1]))
