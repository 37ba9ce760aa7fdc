"""Experiment configuration: a JSON file, overridden by command-line flags."""

from collections.abc import Mapping
from pathlib import Path
from typing import Any, Final, Self

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    model_validator,
)

from random_fractals import geometry
from random_fractals.construction import Semantics
from random_fractals.models import ModelName

SEED_ENVVAR: Final = "RANDOM_FRACTALS_SEED"


class ConfigError(ValueError):
    """Raised for unreadable or invalid experiment configurations."""


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: ModelName = Field(default=ModelName.CANTOR)
    ratio: float = Field(default=1.0 / 3.0, gt=0, lt=1)
    arity: int = Field(default=2, ge=1)
    p: float | None = Field(default=None, gt=0)
    ratio_low: float | None = Field(default=None, gt=0, lt=1)
    ratio_high: float | None = Field(default=None, gt=0, lt=1)
    keep_probability: float = Field(default=1.0, gt=0, le=1)
    cutoff: float | None = Field(
        default=None,
        gt=0,
        description="Smallest gap kept in an orbit set; r_min / 10 if unset.",
    )

    @model_validator(mode="after")
    def _orbit_set_needs_p(self) -> Self:
        if self.name is ModelName.ORBIT_SET and self.p is None:
            msg = "orbit_set needs an exponent p"
            raise ValueError(msg)
        return self


class ScaleGrid(BaseModel):
    model_config = ConfigDict(extra="forbid")

    r_max: float = Field(default=1e-1, gt=0)
    r_min: float = Field(default=1e-6, gt=0)
    points_per_decade: int = Field(default=8, ge=2)

    @model_validator(mode="after")
    def _ordered(self) -> Self:
        if not self.r_min < self.r_max:
            msg = "r_min must be smaller than r_max"
            raise ValueError(msg)
        return self

    def radii(self) -> list[float]:
        return geometry.dyadic_scales(
            self.r_max, self.r_min, self.points_per_decade
        )


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelConfig = Field(default_factory=ModelConfig)
    seed: int = Field(default=0, ge=0)
    max_depth: int = Field(default=3, ge=0)
    eps_trunc: float = Field(default=1e-6, gt=0)
    point_resolution: float | None = Field(default=None, gt=0)
    scales: ScaleGrid = Field(default_factory=ScaleGrid)
    replicas: int = Field(default=1, ge=1)
    semantics: Semantics = Field(default=Semantics.RECURSIVE)
    condition_on_survival: bool = Field(default=False)
    threads: int = Field(default=1, ge=1)
    output: Path | None = Field(default=None)


def _validation_message(error: ValidationError) -> str:
    parts = [
        f"{'.'.join(str(loc) for loc in e['loc']) or 'config'}: {e['msg']}"
        for e in error.errors()
    ]
    return "invalid configuration: " + "; ".join(parts)


def load_config(path: Path) -> ExperimentConfig:
    """Read an experiment configuration from a JSON file.

    Raises:
        ConfigError: If the file cannot be read, is not JSON, or has
            unknown or invalid fields.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        msg = f"cannot read configuration {path}: {e.strerror}"
        raise ConfigError(msg) from e
    try:
        return ExperimentConfig.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(_validation_message(e)) from e


_MODEL_FIELDS: Final = frozenset(ModelConfig.model_fields)
_SCALE_FIELDS: Final = frozenset(ScaleGrid.model_fields)


def merge_overrides(
    config: ExperimentConfig, overrides: Mapping[str, Any]
) -> ExperimentConfig:
    """Apply flag values on top of a configuration.

    Keys name fields of the experiment, its model, or its scale grid;
    ``None`` means the flag was not given.

    Raises:
        ConfigError: If a key is unknown or the merged values are invalid.
    """
    merged = config.model_dump()
    for key, value in overrides.items():
        if value is None:
            continue
        if key in _MODEL_FIELDS:
            merged["model"][key] = value
        elif key in _SCALE_FIELDS:
            merged["scales"][key] = value
        elif key in ExperimentConfig.model_fields:
            merged[key] = value
        else:
            msg = f"unknown configuration key {key!r}"
            raise ConfigError(msg)
    try:
        return ExperimentConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(_validation_message(e)) from e
