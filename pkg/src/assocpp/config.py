"""Experiment configuration schemas (JSON, unknown keys rejected)."""

from __future__ import annotations

import hashlib
import json
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .estimator import FitConfig
from .functionals import statistic_from_name
from .kernels import AffineCovariates, CorrelationFamily, Homogeneous, KernelSpec, LogLinear
from .window import Window

U64 = Field(ge=0, lt=2**64)


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CovariateConfig(Strict):
    type: Literal["intercept_x1", "constant", "affine"] = "intercept_x1"
    L: float | None = Field(default=None, gt=0)
    offset: list[float] | None = None
    linear: list[list[float]] | None = None

    @model_validator(mode="after")
    def _needs(self):
        if self.type == "intercept_x1" and self.L is None:
            raise ValueError("intercept_x1 covariates need L")
        if self.type == "affine" and (self.offset is None or self.linear is None):
            raise ValueError("affine covariates need offset and linear")
        return self

    def build(self, d: int):
        if self.type == "intercept_x1":
            return AffineCovariates.intercept_and_x1(self.L, d)
        if self.type == "constant":
            return AffineCovariates((1.0,), np.zeros((1, d)))
        return AffineCovariates(tuple(self.offset), self.linear)


class IntensityConfig(Strict):
    type: Literal["homogeneous", "loglinear"] = "homogeneous"
    rho: float | None = Field(default=None, ge=0)
    beta: list[float] | None = None
    covariate: CovariateConfig | None = None

    @model_validator(mode="after")
    def _needs(self):
        if self.type == "homogeneous" and self.rho is None:
            raise ValueError("homogeneous intensity needs rho")
        if self.type == "loglinear" and (self.beta is None or self.covariate is None):
            raise ValueError("loglinear intensity needs beta and covariate")
        return self


class KernelConfig(Strict):
    family: Literal["gaussian", "cauchy", "bessel"]
    params: dict[str, float]
    dim: int = Field(default=2, ge=1, le=3)
    intensity: IntensityConfig
    rho_max: float | None = Field(default=None, gt=0)

    def build(self) -> KernelSpec:
        fam = CorrelationFamily(self.family, dict(self.params), self.dim)
        if self.intensity.type == "homogeneous":
            return KernelSpec(fam, Homogeneous(self.intensity.rho), self.rho_max)
        z = self.intensity.covariate.build(self.dim)
        return KernelSpec(fam, LogLinear(tuple(self.intensity.beta), z), self.rho_max)


class WindowConfig(Strict):
    lower: list[float]
    upper: list[float]

    def build(self) -> Window:
        return Window(tuple(self.lower), tuple(self.upper))


class McConfig(Strict):
    replicates: int = Field(default=1, ge=1)
    master_seed: int = U64


class SimulateConfig(Strict):
    command: Literal["simulate"] = "simulate"
    kernel: KernelConfig
    window: WindowConfig
    margin: float = Field(default=0.0, ge=0)
    truncation: int | None = Field(default=None, ge=1)
    mc: McConfig


class MixingConfig(Strict):
    command: Literal["mixing-bounds"] = "mixing-bounds"
    kernel: KernelConfig
    r_grid: list[float] = Field(min_length=1)
    p: float = Field(default=1.0, gt=0)
    q: float = Field(default=1.0, gt=0)
    grid_n: int = Field(default=24, ge=8)
    mc: McConfig | None = None


class StatisticConfig(Strict):
    name: Literal["count", "pair_count", "triangle_count"]
    tau: float = Field(default=1.0, gt=0)

    def build(self):
        return statistic_from_name(self.name, self.tau)


class CltConfig(Strict):
    command: Literal["clt"] = "clt"
    kernel: KernelConfig
    statistics: list[StatisticConfig] = Field(min_length=1)
    window_sides: list[float] = Field(min_length=1)
    margin: float = Field(default=0.0, ge=0)
    mc: McConfig


class FitSection(Strict):
    r_l: float = 0.05
    r_u: float = 2.5
    c: float = 0.5
    t_grid: int = 64
    newton_tol: float = 1e-9
    newton_max_iter: int = 100
    family: Literal["gaussian", "cauchy", "bessel"] = "gaussian"
    psi_bounds: list[tuple[float, float]] = [(0.05, 5.0)]
    fixed: dict[str, float] = {}

    def build(self) -> FitConfig:
        return FitConfig(**{**self.model_dump(), "psi_bounds": tuple(self.psi_bounds)})


class EstimateConfig(Strict):
    command: Literal["estimate"] = "estimate"
    pattern: str
    window: WindowConfig | None = None
    covariate: CovariateConfig
    fit: FitSection = FitSection()
    beta0: list[float] | None = None


class PropsConfig(Strict):
    command: Literal["props"] = "props"
    instances: int = Field(default=1000, ge=1)
    min_size: int = Field(default=2, ge=2)
    max_size: int = Field(default=8, ge=2)
    tolerance: float = Field(default=1e-10, gt=0)
    mc: McConfig = McConfig(master_seed=0)


MODELS = {
    "simulate": SimulateConfig,
    "mixing-bounds": MixingConfig,
    "clt": CltConfig,
    "estimate": EstimateConfig,
    "props": PropsConfig,
}


def config_hash(data: dict) -> str:
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()
