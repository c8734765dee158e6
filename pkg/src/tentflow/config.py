"""Run configuration: one validated JSON document per CLI invocation."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .grid import PeriodicGrid
from .solver import SolverConfig

__all__ = [
    "GridConfig",
    "BallConfig",
    "EnsembleConfig",
    "NormConfig",
    "VerifyConfig",
    "SweepConfig",
    "RunConfig",
    "load_config",
    "CAMPAIGN_IDS",
]

CAMPAIGN_IDS = (
    "timederiv",
    "maxreg",
    "offdiagonal",
    "gradient_product",
    "leray",
    "key",
    "bilinear",
    "embeddings",
    "mollification",
    "scaling",
    "e_alpha_linear",
)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridConfig(_Strict):
    dim: int = 2
    L: float = 2 * math.pi
    N: int = 64

    @field_validator("N")
    @classmethod
    def _n(cls, v):
        if v < 4 or v & (v - 1):
            raise ValueError("N must be a power of two >= 4")
        return v

    def build(self) -> PeriodicGrid:
        return PeriodicGrid(self.dim, self.L, self.N)


class BallConfig(_Strict):
    centers_per_axis: int = 8
    j_min: int = Field(2, ge=2)
    j_max: int = 4


class EnsembleConfig(_Strict):
    seed: int = 7
    size: int = Field(50, ge=1)


class NormConfig(_Strict):
    family: Literal["U", "BMO-1", "V", "besov_inf_inf", "besov_two_inf", "sobolev"] = "U"
    param: float = 0.5


class VerifyConfig(_Strict):
    id: str = "all"
    ns: tuple[int, int] = (64, 128)
    alpha: float = 0.5
    maxreg_betas: tuple[float, ...] = (0.0, 0.5, 0.9)
    leray_betas: tuple[float, ...] = (0.0, 1.0, 1.9)
    mollify_k_max: int = 20
    offdiag_n: int = 512

    @field_validator("id")
    @classmethod
    def _id(cls, v):
        if v != "all" and v not in CAMPAIGN_IDS:
            raise ValueError(f"unknown inequality id {v!r}; choose 'all' or one of {list(CAMPAIGN_IDS)}")
        return v


class SweepConfig(_Strict):
    alphas: tuple[float, ...] = (0.5,)
    eps0s: tuple[float, ...] = (0.05, 0.1)
    ns: tuple[int, ...] = (64,)
    preset: str = "bump"
    rho_deviation: float = 0.02


class RunConfig(_Strict):
    command: Literal["norm", "verify", "solve", "sweep"]
    inputs: tuple[str, ...] = ()
    output_dir: str = "out"
    preset: str | None = None
    rho_deviation: float = Field(0.0, ge=0.0)
    grid: GridConfig = GridConfig()
    balls: BallConfig = BallConfig()
    solver: SolverConfig = SolverConfig()
    ensemble: EnsembleConfig = EnsembleConfig()
    norm: NormConfig = NormConfig()
    verify: VerifyConfig = VerifyConfig()
    sweep: SweepConfig = SweepConfig()

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.model_validate_json(text)


def load_config(path: str | Path, **overrides) -> RunConfig:
    data = json.loads(Path(path).read_text())
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.model_validate(data)
