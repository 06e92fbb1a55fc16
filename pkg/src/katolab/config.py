"""Experiment configuration: YAML files validated against a strict schema."""
from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import DomainError

__all__ = [
    "ExponentsBlock",
    "OdiBlock",
    "SimulateBlock",
    "SweepBlock",
    "SyntheticBlock",
    "Tolerances",
    "ExperimentConfig",
    "load_config",
    "dump_config",
    "config_hash",
    "output_root",
    "OUTPUT_ENV",
]

OUTPUT_ENV = "KATOLAB_OUTPUT_ROOT"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ExponentsBlock(_Strict):
    n: Optional[int] = None
    p: Optional[float] = None
    table: bool = False
    n_range: tuple[int, int] = (2, 6)
    a_of_eps: Optional[float] = None


class OdiBlock(_Strict):
    lemma: Literal["lemma1", "lemma2"] = "lemma1"
    # explicit problem; ignored when random > 0
    p: float = 2.0
    a: float = 2.0
    q: float = 2.0
    A: float = 1.0
    B: float = 1.0
    R: float = 1.0
    T0: float = 1.0
    F0: float = 0.0
    F0p: float = 1.0
    t0: Optional[float] = None
    random: int = Field(0, ge=0)
    rtol: float = 1e-10
    atol: float = 1e-12
    F_max: float = 1e8
    bracket_tol: float = 1e-3


class SimulateBlock(_Strict):
    n: int = 3
    p: float = 2.0
    eps: float = 1.0
    f_profile: Literal["zero", "bump"] = "zero"
    g_profile: Literal["zero", "bump"] = "bump"
    R: float = 1.0
    dx: float = 0.1
    cfl: Optional[float] = None
    L: Optional[float] = None
    U_max: float = 1e6
    t_horizon: float = 100.0
    levels: int = Field(1, ge=1)
    nonlinear: bool = True
    snapshot_times: tuple[float, ...] = ()
    checks: tuple[Literal["convexity", "identity", "odi", "support", "step0",
                          "condition_F", "pointwise_2d"], ...] = ()
    # further amplitudes for the ε-stability part of step0 / condition_F
    check_eps: tuple[float, ...] = ()


class SyntheticBlock(_Strict):
    C: float = 1.0
    form: Literal["power", "a_of_eps"] = "power"
    # None uses the scenario's predicted exponent
    kappa: Optional[float] = None


class SweepBlock(_Strict):
    scenario: Literal["general_nd", "one_d_g_positive", "one_d_f_only",
                      "two_d_p2_f_zero", "two_d_sub2_f_zero"] = "one_d_g_positive"
    n: Optional[int] = None
    p: Optional[float] = None
    eps_hi: Optional[float] = None
    eps_lo: Optional[float] = None
    count: int = Field(8, ge=1)
    dx: Optional[float] = None
    t_horizon: Optional[float] = None
    levels: int = Field(3, ge=1)
    workers: int = Field(1, ge=1)
    n_boot: int = Field(1000, ge=1)
    synthetic: Optional[SyntheticBlock] = None


class Tolerances(_Strict):
    fit_tol: float = 0.15
    ratio_spread: float = 2.5
    drift_tol: float = 0.05
    identity_rtol: float = 1e-2
    odi_rtol: float = 1e-6
    band: tuple[float, float] = (0.8, 1.25)
    support_atol: float = 1e-12
    pointwise_tol: float = 0.0


class ExperimentConfig(_Strict):
    command: Literal["exponents", "odi", "simulate", "sweep"]
    output_dir: Optional[str] = None
    seed: int = 0
    exponents: Optional[ExponentsBlock] = None
    odi: Optional[OdiBlock] = None
    simulate: Optional[SimulateBlock] = None
    sweep: Optional[SweepBlock] = None
    tolerances: Tolerances = Tolerances()

    @model_validator(mode="after")
    def _fill_block(self):
        # the block for the chosen command always exists after validation
        if getattr(self, self.command) is None:
            defaults = {"exponents": ExponentsBlock, "odi": OdiBlock,
                        "simulate": SimulateBlock, "sweep": SweepBlock}
            object.__setattr__(self, self.command, defaults[self.command]())
        return self

    @property
    def block(self):
        return getattr(self, self.command)

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            return cls.model_validate(d)
        except ValidationError as exc:
            raise DomainError(f"invalid config: {exc}") from exc

    def hash(self) -> str:
        return config_hash(self)


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the canonical JSON form.

    Settings that cannot change any result (output directory, worker count)
    are excluded, so a sweep can resume under a different worker count.
    """
    d = cfg.to_dict()
    d.pop("output_dir", None)
    if d.get("sweep"):
        d["sweep"].pop("workers", None)
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise DomainError(f"{path}: top level must be a mapping")
    return ExperimentConfig.from_dict(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)


def output_root(cfg: ExperimentConfig | None = None, override: str | None = None) -> Path:
    """Explicit flag, then the environment variable, then the config, then ./katolab_out."""
    if override:
        return Path(override)
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    if cfg is not None and cfg.output_dir:
        return Path(cfg.output_dir)
    return Path("katolab_out")
