"""Delay models for the stale parameter reads of ASGD.

Three variants are supported: the geometric law ``P(tau = l) = (1-kappa) kappa**l``,
a fixed delay, and a discrete-event worker queue in which staleness emerges
from ``m`` workers sharing one update counter.
"""
from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy import stats

from .errors import DomainError

GEOMETRIC = "geometric"
FIXED = "fixed"
WORKER_QUEUE = "worker_queue"

DETERMINISTIC = "deterministic"
EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class StalenessModel:
    variant: str
    kappa: float = 0.0
    lag: int = 0
    m: int = 1
    service: str = EXPONENTIAL
    service_mean: float = 1.0

    def __post_init__(self):
        if self.variant == GEOMETRIC:
            if not 0 <= self.kappa < 1:
                raise DomainError(f"geometric kappa must lie in [0, 1), got {self.kappa}")
        elif self.variant == FIXED:
            if int(self.lag) != self.lag or self.lag < 0:
                raise DomainError(f"fixed lag must be a non-negative integer, got {self.lag}")
        elif self.variant == WORKER_QUEUE:
            if int(self.m) != self.m or self.m < 1:
                raise DomainError(f"worker_queue needs m >= 1, got {self.m}")
            if not self.service_mean > 0:
                raise DomainError("service_mean must be positive")
            if self.service not in (DETERMINISTIC, EXPONENTIAL):
                raise DomainError(f"unknown service law {self.service!r}")
        else:
            raise DomainError(f"unknown staleness variant {self.variant!r}")

    @classmethod
    def geometric(cls, kappa: float) -> "StalenessModel":
        return cls(GEOMETRIC, kappa=kappa)

    @classmethod
    def fixed(cls, lag: int) -> "StalenessModel":
        return cls(FIXED, lag=lag)

    @classmethod
    def worker_queue(cls, m: int, service: str = EXPONENTIAL, service_mean: float = 1.0) -> "StalenessModel":
        return cls(WORKER_QUEUE, m=m, service=service, service_mean=service_mean)


def geometric_pmf(l, kappa: float):
    l = np.asarray(l)
    return (1.0 - kappa) * np.power(kappa, l, dtype=float)


def _geometric_from_uniform(u: np.ndarray, kappa: float) -> np.ndarray:
    # u in [0, 1); 1 - u in (0, 1] keeps log finite.  P(tau >= l) = kappa**l.
    if kappa == 0:
        return np.zeros(np.shape(u), dtype=np.int64)
    return np.floor(np.log1p(-u) / math.log(kappa)).astype(np.int64)


def worker_queue_commits(m: int, service: str, service_mean: float,
                         rng: np.random.Generator) -> Iterator[int]:
    """Yield the staleness of each commit, in commit order, forever.

    Each worker reads the shared update counter, computes for one service
    time, then commits (incrementing the counter) and reads again at once.
    Simultaneous completions are resolved by worker index.
    """
    def service_time() -> float:
        if service == DETERMINISTIC:
            return service_mean
        return rng.exponential(service_mean)

    counter = 0
    heap = [(service_time(), w, 0) for w in range(m)]
    heapq.heapify(heap)
    while True:
        t, w, read_at = heapq.heappop(heap)
        yield counter - read_at
        counter += 1
        heapq.heappush(heap, (t + service_time(), w, counter))


def sample_staleness(model: StalenessModel, rng: np.random.Generator, size: int | None = None):
    """Draw staleness values.

    Returns an ``int`` if ``size`` is None, otherwise an int64 array.  For the
    worker queue the values are the first ``size`` commits of a fresh
    schedule, so consecutive entries are correlated.
    """
    n = 1 if size is None else int(size)
    if model.variant == GEOMETRIC:
        out = _geometric_from_uniform(rng.random(n), model.kappa)
    elif model.variant == FIXED:
        out = np.full(n, model.lag, dtype=np.int64)
    else:
        gen = worker_queue_commits(model.m, model.service, model.service_mean, rng)
        out = np.fromiter((next(gen) for _ in range(n)), dtype=np.int64, count=n)
    return int(out[0]) if size is None else out


@dataclass
class StalenessStats:
    n: int
    mean: float
    kappa_hat: float
    pmf: np.ndarray
    chi2: float
    dof: int
    p_value: float

    @property
    def pmf_mean(self) -> float:
        """Mean of the fitted pmf, ``kappa/(1-kappa)``."""
        return self.kappa_hat / (1.0 - self.kappa_hat)

    @property
    def expected_staleness(self) -> float:
        """``1/(1-kappa)``: the mean delay counted inclusively (one more than ``pmf_mean``)."""
        return 1.0 / (1.0 - self.kappa_hat)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "kappa_hat": self.kappa_hat,
            "pmf_mean": self.pmf_mean,
            "expected_staleness": self.expected_staleness,
            "pmf": [float(p) for p in self.pmf],
            "chi2": self.chi2,
            "dof": self.dof,
            "p_value": self.p_value,
        }


def staleness_stats(trace: Sequence[int], min_expected: float = 5.0) -> StalenessStats:
    """Summary statistics and a chi-square fit to the geometric law.

    ``kappa_hat = mean / (1 + mean)`` is the moment estimator.  Bins
    ``0..L`` each hold at least ``min_expected`` expected counts; everything
    above ``L`` is pooled into one tail bin.
    """
    tau = np.asarray(trace, dtype=np.int64)
    if tau.size == 0:
        raise ValueError("empty staleness trace")
    if np.any(tau < 0):
        raise ValueError("staleness values must be non-negative")
    n = tau.size
    mean = float(tau.mean())
    kappa_hat = mean / (1.0 + mean)
    counts = np.bincount(tau)
    pmf = counts / n

    if kappa_hat == 0.0:
        return StalenessStats(n, mean, kappa_hat, pmf, 0.0, 0, 1.0)

    L = 0
    while n * geometric_pmf(L + 1, kappa_hat) >= min_expected and n * kappa_hat ** (L + 2) >= min_expected:
        L += 1
    expected = n * geometric_pmf(np.arange(L + 1), kappa_hat)
    expected = np.append(expected, n * kappa_hat ** (L + 1))
    observed = np.zeros(L + 2)
    head = min(L + 1, counts.size)
    observed[:head] = counts[:head]
    observed[L + 1] = n - observed[: L + 1].sum()
    dof = len(observed) - 2  # one fitted parameter
    if dof < 1:
        chi2 = float(((observed - expected) ** 2 / expected).sum())
        return StalenessStats(n, mean, kappa_hat, pmf, chi2, 0, math.nan)
    res = stats.chisquare(observed, expected, ddof=1)
    return StalenessStats(n, mean, kappa_hat, pmf, float(res.statistic), dof, float(res.pvalue))


def write_trace_csv(path: str | Path, trace: Sequence[int]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "tau"])
        for k, t in enumerate(trace):
            w.writerow([k, int(t)])
