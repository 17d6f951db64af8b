"""Scenario configuration (JSON) validated with pydantic."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError

MODES = ("check-matrices", "compat", "linear-solve", "smoothing-audit", "nashmoser-run",
         "relativistic-audit")
Mode = Literal["check-matrices", "compat", "linear-solve", "smoothing-audit", "nashmoser-run",
               "relativistic-audit"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class EosConstants(_Section):
    rho_ref: float = Field(1.0, gt=0)
    c0: float = Field(1.0, gt=0)
    cV: float = Field(1.0, gt=0)
    e0: float = 0.0
    K0: float = Field(1.0, gt=0)
    gamma: float = Field(1.4, gt=1)


class PhysicsConfig(_Section):
    eos: Literal["stiffened", "polytropic"] = "stiffened"
    constants: EosConstants = Field(default_factory=EosConstants)
    G: float = Field(1.0, gt=0)
    eps: float = Field(0.1, gt=0)
    relativistic: bool = False
    q_sign: Literal[1, -1] = 1


class DomainConfig(_Section):
    d: Literal[1, 2] = 1
    X1: float = Field(0.8, gt=0)
    L2: float = Field(6.283185307179586, gt=0)
    L3: float = Field(6.283185307179586, gt=0)
    nt: int = Field(24, ge=4)
    n1: int = Field(33, ge=8)
    n2: int = Field(8, ge=1)
    n3: int = Field(1, ge=1)
    T: float = Field(0.4, gt=0)
    ghost: int = Field(3, ge=2)

    @field_validator("n3")
    @classmethod
    def _n3(cls, v, info):
        if info.data.get("d") == 1 and v != 1:
            raise ValueError("n3 must be 1 when d = 1")
        return v


class NashMoserSection(_Section):
    alpha: int = 7
    delta: float = Field(0.1, gt=0)
    theta0: float = 1.0
    max_iter: int = Field(40, ge=1)
    tol: float = Field(1e-6, gt=0)
    s_max: int = Field(8, ge=3, le=8)
    theta_identity: float = Field(4.0, ge=1)
    max_halvings: int = Field(3, ge=0)
    telescoping_tol: float = Field(1e-10, gt=0)

    @field_validator("theta0")
    @classmethod
    def _theta0(cls, v):
        if v < 1:
            raise ValueError("theta0 must be ≥ 1")
        return v

    @field_validator("alpha")
    @classmethod
    def _alpha(cls, v):
        if v < 7:
            raise ValueError("alpha must be ≥ 7")
        return v


class OutputsConfig(_Section):
    directory: str = "vf-out"
    snapshot_cadence: int = Field(0, ge=0)  # 0: only the final field
    snapshots: bool = True


class ScenarioConfig(_Section):
    mode: Mode
    preset: Literal["manufactured", "rest", "bump", "wavefront"] = "manufactured"
    seed: int = Field(42, ge=0, lt=2**64)
    physics: PhysicsConfig = Field(default_factory=PhysicsConfig)
    domain: DomainConfig = Field(default_factory=DomainConfig)
    nashmoser: NashMoserSection = Field(default_factory=NashMoserSection)
    outputs: OutputsConfig = Field(default_factory=OutputsConfig)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def _format(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        msg = e["msg"].removeprefix("Value error, ")
        parts.append(f"{path}: {msg}")
    return "; ".join(parts)


def parse_config(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format(exc), module="cli", operation="load_config") from None


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", module="cli",
                          operation="load_config") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}", module="cli",
                          operation="load_config") from None
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object", module="cli", operation="load_config")
    return parse_config(data)


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(cfg.to_json(), encoding="utf-8")
