"""Run configuration: strict JSON schema with located parse errors."""

import json
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .models import LatticeSpec


class RunConfig(BaseModel):
    """Everything a CLI run needs; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    spec: LatticeSpec | None = None
    spec_path: Path | None = None
    m1: float | None = Field(default=None, description="Strip increment of the uniform example")
    m2: float | None = Field(default=None, description="Point increment of the uniform example")

    grid: int = Field(default=64, ge=64, description="Wavevector grid for bands and projections")
    tol: float = Field(default=1e-11, gt=0, description="Determinant quadrature tolerance")
    edge_tol: float = Field(default=1e-8, gt=0, description="Band-edge refinement tolerance")
    k1: float | None = None
    k1_samples: int = Field(default=33, ge=2)
    omega: float | None = Field(default=None, gt=0)
    omega_samples: int = Field(default=200, ge=2)
    size: int = Field(default=61, ge=41, description="Finite oracle box side in nodes")
    window: int = Field(default=21, ge=3)
    synthesis_grid: int = Field(default=256, ge=64)
    m_tilde_min: float = Field(default=0.05, gt=0)
    m_tilde_max: float = Field(default=1e4, gt=0)
    m_tilde_samples: int = Field(default=200, ge=2)
    seed: int = 0
    threads: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        if self.spec is not None and self.spec_path is not None:
            raise ValueError("give either spec or spec_path, not both")
        if self.window % 2 == 0:
            raise ValueError("window must be odd so the defect sits at its centre")
        if self.m_tilde_min >= self.m_tilde_max:
            raise ValueError("m_tilde_min must be below m_tilde_max")
        return self

    def resolve_spec(self, base: Path | None = None) -> LatticeSpec:
        if self.spec is not None:
            return self.spec
        if self.spec_path is not None:
            path = self.spec_path if base is None or self.spec_path.is_absolute() else base / self.spec_path
            return parse_spec(path.read_text(encoding="utf-8"), source=str(path))
        if self.m1 is not None or self.m2 is not None:
            return _validated(LatticeSpec, {"strip_perturbation": self.m1 or 0.0, "point_perturbation": self.m2 or 0.0}, "uniform example")
        raise ConfigError("no lattice spec: give spec, spec_path or --m1/--m2")


def format_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def _validated(model, data, source: str):
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"{source}: {format_validation_error(e)}") from e


def _load_json(text: str, source: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: {e.msg}", line=e.lineno, column=e.colno) from e
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be an object", line=1, column=1)
    return data


def parse_spec(text: str, source: str = "<spec>") -> LatticeSpec:
    return _validated(LatticeSpec, _load_json(text, source), source)


def parse_run_config(text: str, source: str = "<config>", overrides: dict | None = None) -> RunConfig:
    data = _load_json(text, source)
    data.update(overrides or {})
    return _validated(RunConfig, data, source)


def load_run_config(path: Path | None, overrides: dict | None = None) -> RunConfig:
    if path is None:
        return _validated(RunConfig, overrides or {}, "command line")
    return parse_run_config(path.read_text(encoding="utf-8"), source=str(path), overrides=overrides)
