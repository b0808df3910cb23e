"""Ensemble statistics shared by the ASGD and SME simulators."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


@dataclass
class EnsembleMoments:
    """Per-record-time mean and covariance of an ensemble state.

    ``mean`` has shape ``(n_times, dim)`` and ``cov`` ``(n_times, dim, dim)``;
    the state is ordered parameter block first, auxiliary block second.
    """

    times: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    n: int
    steps: Optional[np.ndarray] = None
    final_states: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def std_error(self) -> np.ndarray:
        """Standard error of each mean component."""
        return np.sqrt(np.clip(np.diagonal(self.cov, axis1=1, axis2=2), 0, None) / self.n)

    def table(self) -> tuple[list[str], list[list]]:
        """Header and rows: ``k, t``, means, then the upper triangle of each covariance."""
        dim = self.mean.shape[1]
        header = ["k", "t"] + [f"mean_{i}" for i in range(dim)]
        header += [f"cov_{i}_{j}" for i in range(dim) for j in range(i, dim)]
        steps = self.steps if self.steps is not None else np.arange(len(self.times))
        rows = []
        for r in range(len(self.times)):
            row = [int(steps[r]), float(self.times[r])]
            row += [float(x) for x in self.mean[r]]
            row += [float(self.cov[r, i, j]) for i in range(dim) for j in range(i, dim)]
            rows.append(row)
        return header, rows

    def write_csv(self, path: str | Path) -> None:
        write_table_csv(path, *self.table())


def batch_moments(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and unbiased covariance over axis 0 of an ``(N, dim)`` array."""
    mean = states.mean(axis=0)
    centered = states - mean
    cov = centered.T @ centered / max(states.shape[0] - 1, 1)
    return mean, 0.5 * (cov + cov.T)


def _cell(x):
    return repr(x) if isinstance(x, float) else x


def write_table_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    """CSV with floats written by ``repr``, so identical values give identical bytes."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
