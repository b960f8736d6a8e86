from __future__ import annotations

import pathlib
from typing import List, Literal, Optional, Tuple

import yaml
from pydantic import BaseModel, Field, field_validator, model_validator


class RuleWeights(BaseModel):
    rule_weight: float = Field(1.0, ge=0.0, description="λ shared by ensemble and constraint rules")
    prior_weight: float = Field(0.1, ge=0.0, description="κ for the better-than-chance prior rules")
    error_prior_weight: float = Field(0.1, ge=0.0, description="κₑ of the per-output rule pulling error rates toward 0")
    exponent: Literal[1, 2] = Field(1, description="Hinge exponent p")


class SolverSettings(BaseModel):
    rho: float = Field(1.0, gt=0.0, description="ADMM penalty parameter")
    eps_abs: float = Field(1e-5, gt=0.0)
    eps_rel: float = Field(1e-3, gt=0.0)
    max_iterations: int = Field(25_000, ge=1)
    stochastic_k: Optional[int] = Field(None, ge=1, description="Subproblems sampled per iteration; None runs full ADMM")
    distance_floor: float = Field(1e-6, ge=0.0, description="ε₀ added to every sampling weight")
    seed: int = 0
    random_multipliers: bool = Field(False, description="Start multipliers and copies at random values")

    @property
    def mode(self) -> str:
        return "full" if self.stochastic_k is None else "stochastic"


class SynthSpec(BaseModel):
    """Parameters of the synthetic benchmark generator."""

    num_domains: int = Field(..., ge=1)
    num_classifiers: int = Field(..., ge=1)
    num_instances: int = Field(..., ge=0)
    error_range: Tuple[float, float] = (0.05, 0.4)
    error_rates: Optional[List[List[float]]] = Field(None, description="Explicit per-domain, per-classifier rates")
    soft: bool = False
    density: float = Field(1.0, ge=0.0, le=1.0)
    positive_rate: float = Field(0.2, ge=0.0, le=1.0)
    forced_positive: List[int] = Field(default_factory=list)
    seed: int = 0

    @field_validator("error_range")
    @classmethod
    def _check_range(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if not 0.0 <= low <= high <= 1.0:
            raise ValueError(f"error_range must satisfy 0 <= low <= high <= 1, got {value}")
        return value

    @model_validator(mode="after")
    def _check_rates(self) -> "SynthSpec":
        if self.error_rates is not None:
            if len(self.error_rates) != self.num_domains or any(len(row) != self.num_classifiers for row in self.error_rates):
                raise ValueError("error_rates must be a num_domains x num_classifiers table")
            if any(not 0.0 <= rate <= 1.0 for row in self.error_rates for rate in row):
                raise ValueError("error_rates must lie in [0, 1]")
        return self


class RunConfig(BaseModel):
    rules: RuleWeights = Field(default_factory=RuleWeights)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    threshold: float = Field(0.5, ge=0.0, le=1.0, description="Soft target value at which the hard label becomes 1")

    @classmethod
    def load(cls, path: str | pathlib.Path) -> "RunConfig":
        cfg_path = pathlib.Path(path)
        with cfg_path.open("r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        return cls(**data)

    def dump(self, path: str | pathlib.Path) -> pathlib.Path:
        target = pathlib.Path(path)
        target.write_text(self.to_yaml(), encoding="utf-8")
        return target

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=True)

    def with_overrides(self, **overrides: object) -> "RunConfig":
        """Return a copy with dotted keys (``solver.rho``) replaced when not None."""
        data = self.model_dump()
        for dotted, value in overrides.items():
            if value is None:
                continue
            section, _, key = dotted.rpartition(".")
            target = data[section] if section else data
            target[key] = value
        return RunConfig(**data)
