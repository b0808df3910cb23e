"""Discrete asynchronous SGD with delayed parameter reads.

One step is one gradient commit to the shared parameter:

    theta_{k+1} = theta_k - eta * g(theta_{k - tau_k}),

where ``g`` is the stochastic gradient and ``tau_k`` the staleness of the
read.  Reads before step 0 are clamped to ``theta_0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ._rng import NOISE_STREAM, STALENESS_STREAM, PathStreams, path_generator
from .ensemble import EnsembleMoments, batch_moments, write_table_csv
from .errors import DomainError, StalenessOverflowError
from .loss import GradientOracle, grad, stochastic_grad
from .params import Params
from .staleness import FIXED, GEOMETRIC, StalenessModel, _geometric_from_uniform, worker_queue_commits

DEFAULT_HISTORY_CAP = 10_000


@dataclass
class Trajectory:
    steps: np.ndarray
    theta: np.ndarray   # (K+1, d)
    y: np.ndarray       # (K+1, d)
    tau: np.ndarray     # (K,)
    dt_map: float

    @property
    def times(self) -> np.ndarray:
        return self.steps * self.dt_map

    def table(self) -> tuple[list[str], list[list]]:
        """One row per step; ``tau`` is the delay of the read that produced the next step."""
        d = self.theta.shape[1]
        header = ["k", "t"] + [f"theta_{i}" for i in range(d)] + [f"y_{i}" for i in range(d)] + ["tau"]
        rows = []
        for k in range(len(self.steps)):
            tau = int(self.tau[k]) if k < len(self.tau) else ""
            rows.append([int(self.steps[k]), float(self.times[k])]
                        + [float(x) for x in self.theta[k]] + [float(x) for x in self.y[k]] + [tau])
        return header, rows

    def write_csv(self, path: str | Path) -> None:
        write_table_csv(path, *self.table())


def asgd_step(history: Sequence, eta: float, tau: int, oracle: GradientOracle,
              rng: np.random.Generator) -> np.ndarray:
    """One commit: ``history[-1] - eta * stochastic_grad(history[k - tau])``."""
    k = len(history) - 1
    if k < 0:
        raise ValueError("history must contain theta_0")
    read = history[max(k - int(tau), 0)]
    return np.asarray(history[-1], dtype=float) - eta * stochastic_grad(oracle, read, rng)


def y_scale(params: Params) -> float:
    """``sqrt(eta / (1 - kappa))``, which also equals ``eta / dt_map``."""
    return math.sqrt(params.eta / (1.0 - params.kappa))


def asgd_to_sme_state(theta, params: Params, oracle: GradientOracle):
    """Initialisation map ``(theta, y) = (theta, -sqrt(eta/(1-kappa)) grad f(theta))``.

    Exact when every delayed read returns ``theta`` itself, as at step 0.
    """
    theta = np.asarray(theta, dtype=float)
    return theta.copy(), -y_scale(params) * grad(oracle, theta)


class _History:
    """Per-path ring buffer wide enough for the longest read of the run."""

    def __init__(self, theta0: np.ndarray, width: int):
        n, d = theta0.shape
        self.width = width
        self.buf = np.empty((n, width, d))
        self.buf[:, 0] = theta0
        self.rows = np.arange(n)

    def read(self, k: int, tau: np.ndarray) -> np.ndarray:
        idx = np.maximum(k - tau, 0)
        return self.buf[self.rows, idx % self.width]

    def write(self, k: int, theta: np.ndarray) -> None:
        self.buf[:, k % self.width] = theta


class _StalenessSource:
    def __init__(self, model: StalenessModel, seed: int, n_paths: int):
        self.model = model
        self.n = n_paths
        if model.variant == GEOMETRIC:
            self.streams = PathStreams(seed, n_paths, STALENESS_STREAM)
        elif model.variant != FIXED:
            self.queues = [
                worker_queue_commits(model.m, model.service, model.service_mean,
                                     path_generator(seed, i, STALENESS_STREAM))
                for i in range(n_paths)
            ]

    def draw(self, m: int) -> np.ndarray:
        """``(n_paths, m)`` staleness values for the next ``m`` steps."""
        if self.model.variant == GEOMETRIC:
            return _geometric_from_uniform(self.streams.random((m,)), self.model.kappa)
        if self.model.variant == FIXED:
            return np.full((self.n, m), self.model.lag, dtype=np.int64)
        return np.array([[next(q) for _ in range(m)] for q in self.queues], dtype=np.int64)


def _max_lookback(model: StalenessModel, seed: int, N: int, K: int, chunk: int) -> int:
    """Longest clamped read ``min(tau_k, k)`` of the run.

    The delay stream is independent of the gradient noise, so it can be
    replayed from a fresh source before the simulation proper.
    """
    if model.variant == FIXED:
        return min(model.lag, K)
    src = _StalenessSource(model, seed, N)
    longest, k = 0, 0
    while k < K:
        m = min(chunk, K - k)
        look = np.minimum(src.draw(m), k + np.arange(m))
        longest = max(longest, int(look.max()))
        k += m
    return longest


def _simulate(params: Params, oracle: GradientOracle, model: StalenessModel, K: int, N: int,
              seed: int, theta0, on_record: Callable, record_steps: np.ndarray,
              history_cap: int = DEFAULT_HISTORY_CAP, chunk: int = 256,
              keep_taus: bool = False):
    d = params.d
    theta = np.broadcast_to(np.asarray(theta0, dtype=float), (N, d)).copy()
    lookback = _max_lookback(model, seed, N, K, chunk)
    if lookback > history_cap:
        raise StalenessOverflowError(
            f"delayed read {lookback} steps back exceeds the history cap {history_cap}")
    hist = _History(theta, lookback + 1)
    taus = np.empty((N, K), dtype=np.int64) if keep_taus else None
    kappa = params.kappa
    scale = y_scale(params)
    u = grad(oracle, theta)  # geometric average of exact gradients over the delay law
    sigma = oracle.sigma_grad
    noise_src = PathStreams(seed, N, NOISE_STREAM) if sigma else None
    stale_src = _StalenessSource(model, seed, N)

    rec = 0
    if record_steps[0] == 0:
        on_record(0, theta, -scale * u)
        rec = 1
    k = 0
    while k < K:
        m = min(chunk, K - k)
        tau_block = stale_src.draw(m)
        if taus is not None:
            taus[:, k:k + m] = tau_block
        xi_block = noise_src.standard_normal((m, d)) if noise_src is not None else None
        for j in range(m):
            g = grad(oracle, hist.read(k, tau_block[:, j]))
            if xi_block is not None:
                g = g + sigma * xi_block[:, j]
            theta = theta - params.eta * g
            k += 1
            hist.write(k, theta)
            u = kappa * u + (1.0 - kappa) * grad(oracle, theta)
            if rec < len(record_steps) and k == record_steps[rec]:
                on_record(k, theta, -scale * u)
                rec += 1
    return taus


def run_asgd(params: Params, oracle: GradientOracle, model: StalenessModel, K: int, seed: int,
             theta0=1.0, history_cap: int = DEFAULT_HISTORY_CAP) -> Trajectory:
    """Single trajectory of ``K`` commits.

    ``y_k`` is the geometric (rate ``kappa``) average of exact gradients over
    the clamped history, scaled by ``-sqrt(eta/(1-kappa))``; at ``k = 0`` it
    coincides with :func:`asgd_to_sme_state`.
    """
    if K < 0:
        raise DomainError("K must be non-negative")
    d = params.d
    thetas = np.empty((K + 1, d))
    ys = np.empty((K + 1, d))

    def on_record(k, theta, y):
        thetas[k] = theta[0]
        ys[k] = y[0]

    taus = _simulate(params, oracle, model, K, 1, seed, theta0, on_record,
                     np.arange(K + 1), history_cap, keep_taus=True)
    dt_map = math.sqrt(params.eta * (1.0 - params.kappa))
    return Trajectory(np.arange(K + 1), thetas, ys, taus[0], dt_map)


def run_ensemble(params: Params, oracle: GradientOracle, model: StalenessModel, K: int, N: int,
                 seed: int, theta0=1.0, n_records: int = 2, record_steps=None,
                 history_cap: int = DEFAULT_HISTORY_CAP, keep_final: bool = False) -> EnsembleMoments:
    """``N`` independent trajectories reduced to moments of ``(theta, y)``.

    Path ``i`` uses generators keyed by ``(seed, i)``, so the result does not
    depend on evaluation order.
    """
    if N < 2:
        raise DomainError("ensemble needs N >= 2")
    if record_steps is None:
        record_steps = np.unique(np.linspace(0, K, max(n_records, 2)).round().astype(int))
    record_steps = np.asarray(record_steps, dtype=int)
    means, covs = [], []
    final = {}

    def on_record(k, theta, y):
        state = np.hstack([theta, y])
        mean, cov = batch_moments(state)
        means.append(mean)
        covs.append(cov)
        if keep_final and k == K:
            final["states"] = state.copy()

    _simulate(params, oracle, model, K, N, seed, theta0, on_record, record_steps, history_cap)
    dt_map = math.sqrt(params.eta * (1.0 - params.kappa))
    return EnsembleMoments(
        times=record_steps * dt_map,
        mean=np.asarray(means),
        cov=np.asarray(covs),
        n=N,
        steps=record_steps,
        final_states=final.get("states"),
    )
