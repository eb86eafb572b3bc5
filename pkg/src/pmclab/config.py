"""Experiment configuration: a JSON document validated with pydantic.

A config describes either a radial run (``metric`` + ``R``) or a mesh run
(``domain``). Unknown keys are rejected everywhere.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .fem import FemOptions
from .geometry import Domain2D
from .metric import MetricSpec
from .nonlinearity import Nonlinearity

CHECKS = (
    "p_function",
    "superharmonic",
    "min_principle",
    "prop2",
    "hk",
    "soap",
    "pohozaev",
    "rigidity",
    "compat",
)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Affine(_Strict):
    kind: Literal["affine"]
    a: float
    b: float = 0.0


class Polynomial(_Strict):
    kind: Literal["polynomial"]
    coeffs: list[float] = Field(min_length=1, max_length=16)


class WarpCoeffs(_Strict):
    coeffs: list[float] = Field(min_length=2, max_length=16)


class MetricModel(_Strict):
    n: int = Field(2, ge=2, le=16)
    warp: Union[Literal["flat"], WarpCoeffs] = "flat"


class Disk(_Strict):
    kind: Literal["disk"]
    R: float = Field(gt=0, le=100)


class Ellipse(_Strict):
    kind: Literal["ellipse"]
    a: float = Field(gt=0, le=100)
    b: float = Field(gt=0, le=100)


class RadialGraph(_Strict):
    kind: Literal["radial_graph"]
    cos: list[float] = Field(min_length=1, max_length=64)
    sin: list[float] = Field(default_factory=list, max_length=64)


class SolverModel(_Strict):
    tol: float = Field(1e-10, gt=0, le=1e-2)
    nodes: int = Field(256, ge=16, le=4096)
    nr: int = Field(32, ge=2, le=512)
    ntheta: int = Field(128, ge=8, le=4096)
    newton_tol: float = Field(1e-10, gt=0, le=1e-2)
    max_iter: int = Field(50, ge=1, le=500)
    continuation_steps: int = Field(4, ge=1, le=64)


class ExperimentConfig(_Strict):
    id: str = "experiment"
    n: int | None = Field(None, ge=2, le=16)
    metric: MetricModel | None = None
    R: float | None = Field(None, gt=0, le=100)
    domain: Annotated[Union[Disk, Ellipse, RadialGraph], Field(discriminator="kind")] | None = None
    f: Annotated[Union[Affine, Polynomial], Field(discriminator="kind")]
    solver: SolverModel = SolverModel()
    checks: list[Literal[CHECKS]] = Field(default_factory=lambda: list(CHECKS))
    h0: Union[Literal["auto"], float] = "auto"
    h0_window: Literal["proof", "statement"] = "proof"
    levels: int = Field(1, ge=1, le=8)
    pohozaev_base: tuple[float, float] = (0.0, 0.0)
    output_dir: str | None = None

    @field_validator("h0")
    @classmethod
    def _negative_h0(cls, v):
        if v != "auto" and not v < 0:
            raise ValueError("h0 must be negative or 'auto'")
        return v

    @model_validator(mode="after")
    def _one_backend(self):
        radial = self.metric is not None or self.R is not None
        if radial and self.domain is not None:
            raise ValueError("give either metric/R (radial run) or domain (mesh run), not both")
        if not radial and self.domain is None:
            raise ValueError("config needs metric/R or a domain")
        if radial and self.R is None:
            raise ValueError("radial run needs R")
        dim = (self.metric.n if self.metric else 2) if radial else 2
        if self.n is not None and self.n != dim:
            raise ValueError(f"declared n={self.n} does not match the geometry dimension {dim}")
        return self

    # ------------------------------------------------------------------ conversions

    @property
    def backend(self) -> str:
        return "fem" if self.domain is not None else "radial"

    @property
    def dimension(self) -> int:
        return self.metric_spec().n if self.backend == "radial" else 2

    def nonlinearity(self) -> Nonlinearity:
        return Nonlinearity.from_dict(self.f.model_dump())

    def metric_spec(self) -> MetricSpec:
        if self.metric is None:
            return MetricSpec.flat(2)
        warp = self.metric.warp
        return MetricSpec.from_dict({
            "n": self.metric.n,
            "warp": warp if warp == "flat" else {"coeffs": list(warp.coeffs)},
        })

    def domain2d(self) -> Domain2D:
        return Domain2D.from_dict(self.domain.model_dump())

    def fem_options(self) -> FemOptions:
        s = self.solver
        return FemOptions(newton_tol=s.newton_tol, max_iter=s.max_iter, continuation_steps=s.continuation_steps)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", exclude={"output_dir"}), sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    def with_updates(self, **changes) -> "ExperimentConfig":
        data = self.model_dump(mode="json")
        for key, value in changes.items():
            node = data
            *path, last = key.split(".")
            for p in path:
                node = node[p]
            node[last] = value
        return parse_config(data)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(data)
