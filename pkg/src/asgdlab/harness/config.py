"""Strict JSON experiment configuration."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..errors import ConfigError

SCHEMA_VERSION = 1

KINDS = ("analyze", "sample-staleness", "sim-asgd", "sim-sme", "solve-pde", "fit-rate",
         "sweep-threshold", "speedup", "compare")
#: kinds that draw random numbers and therefore need an explicit seed
SIMULATION_KINDS = ("sample-staleness", "sim-asgd", "sim-sme", "speedup", "compare")
ALIASES = {"sweep": "sweep-threshold"}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ParamsSection(_Strict):
    eta: float = Field(0.01, gt=0)
    kappa: float = Field(0.5, ge=0, lt=1)
    omega0: float = Field(1.0, gt=0)
    sigma_grad: float = Field(1.0, ge=0)
    d: int = Field(1, ge=1)
    m: int = Field(1, ge=1)


class StalenessSection(_Strict):
    variant: Literal["geometric", "fixed", "worker_queue"] = "geometric"
    lag: int = Field(0, ge=0)
    service: Literal["deterministic", "exponential"] = "exponential"
    service_mean: float = Field(1.0, gt=0)


class LossSection(_Strict):
    amplitude: float = Field(0.0, ge=0)


class NumericsSection(_Strict):
    ensemble: int = Field(1000, ge=1)
    steps: int = Field(100, ge=0)
    T: float = Field(1.0, gt=0)
    dt: Optional[float] = Field(None, gt=0)
    n_records: int = Field(11, ge=2)
    theta0: float = 1.0
    samples: int = Field(10_000, ge=1)
    max_workers: int = Field(1, ge=1)


class PdeSection(_Strict):
    basis_degree: int = Field(16, ge=2)
    gamma: Optional[float] = Field(None, gt=0)
    beta: Optional[float] = Field(None, gt=0)
    T: float = Field(40.0, gt=0)
    n_out: int = Field(401, ge=2)
    method: Literal["rk4", "trapezoidal"] = "rk4"
    init: Literal["random", "linear"] = "random"
    init_seed: int = Field(0, ge=0)
    fit_from: float = Field(0.5, ge=0, lt=1)


class CompareSection(_Strict):
    etas: list[float] = [0.04, 0.02, 0.01]
    t: float = Field(1.0, gt=0)
    refine_etas: list[float] = [0.04, 0.02, 0.01, 0.005]

    @field_validator("etas", "refine_etas")
    @classmethod
    def _positive(cls, v):
        if any(e <= 0 for e in v):
            raise ValueError("learning rates must be positive")
        return v


class SweepSection(_Strict):
    eta_factors: list[float] = [0.125, 0.1768, 0.25, 0.3536, 0.5, 0.7071,
                                1.0, 1.4142, 2.0, 2.8284, 4.0]
    kappas: list[float] = [0.25, 0.5, 0.75]
    kappa_eta_factor: float = Field(2.0, gt=1)


class SpeedupSection(_Strict):
    workers: list[int] = [1, 2, 4, 8]
    kappas: list[float] = [0.25, 0.5, 0.75]
    eta: float = Field(0.5, gt=0)
    sigma_grad: float = Field(0.01, ge=0)
    target: float = Field(1e-5, gt=0)
    ensemble: int = Field(2000, ge=2)
    boundary_margin: float = Field(0.2, ge=0)
    include_discrete: bool = True
    discrete_ensemble: int = Field(200, ge=2)


class FitSection(_Strict):
    input: Optional[str] = None
    time_column: str = "t"
    column: str = "norm_h_sq"
    t_lo: Optional[float] = None
    t_hi: Optional[float] = None


class ExperimentConfig(_Strict):
    schema_version: int = SCHEMA_VERSION
    kind: Literal[KINDS]  # type: ignore[valid-type]
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    out: str = "out"
    params: ParamsSection = ParamsSection()
    staleness: StalenessSection = StalenessSection()
    loss: LossSection = LossSection()
    numerics: NumericsSection = NumericsSection()
    pde: PdeSection = PdeSection()
    compare: CompareSection = CompareSection()
    sweep: SweepSection = SweepSection()
    speedup: SpeedupSection = SpeedupSection()
    fit: FitSection = FitSection()

    @field_validator("schema_version")
    @classmethod
    def _version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {v}; expected {SCHEMA_VERSION}")
        return v

    @property
    def needs_seed(self) -> bool:
        return self.kind in SIMULATION_KINDS

    def report_view(self) -> dict:
        """Configuration as echoed into reports: everything except the output directory."""
        return self.model_dump(mode="json", exclude={"out"})


def parse_config(data: dict) -> ExperimentConfig:
    if isinstance(data, dict) and data.get("kind") in ALIASES:
        data = {**data, "kind": ALIASES[data["kind"]]}
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"schema violation: {exc}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(data)


def with_overrides(cfg: ExperimentConfig, **fields) -> ExperimentConfig:
    """Copy with the non-``None`` top-level fields replaced, re-validated."""
    data = cfg.model_dump(mode="json")
    data.update({k: v for k, v in fields.items() if v is not None})
    return parse_config(data)
