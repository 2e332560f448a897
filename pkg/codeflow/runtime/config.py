"""Run configuration.

RunConfig starts from the environment defaults in codeflow.config.settings;
a YAML file can override them and CLI flags override the file.
"""

from enum import Enum
from pathlib import Path
from typing import Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError

from codeflow.config import settings
from codeflow.errors import ConfigError

FIRST_REGION = "first_region"


class CompileMode(str, Enum):
    JIT = "jit"
    AOT = "aot"


class MigrationPolicy(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    epoch_instructions: PositiveInt = Field(default_factory=lambda: settings.epoch_instructions)
    hot_threshold: PositiveInt = Field(default_factory=lambda: settings.hot_threshold)
    migration_fixed_overhead_ns: PositiveFloat = Field(default_factory=lambda: settings.migration_overhead_ns)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    mode: CompileMode = CompileMode.JIT
    quantum: PositiveInt = Field(default_factory=lambda: settings.quantum)
    # Reserved for stochastic policies; round-robin ignores it
    seed: int = Field(default=0, ge=0, lt=2**64)
    migration: Optional[MigrationPolicy] = None
    initial_placement: str = FIRST_REGION
    r_threshold: PositiveFloat = Field(default_factory=lambda: settings.r_threshold)
    max_instructions: Optional[PositiveInt] = None


def load_run_config(path: Union[str, Path], **overrides) -> RunConfig:
    """Read a YAML run configuration; keyword overrides win over the file.

    Raises:
        ConfigError: unreadable file, bad YAML, or a value out of range.
    """
    try:
        with open(path, encoding="utf-8") as f:
            doc = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot load run config {path}: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"run config {path} must be a mapping")
    return make_run_config(doc, **overrides)


def make_run_config(base: Optional[dict] = None, **overrides) -> RunConfig:
    doc = dict(base or {})
    doc.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(part) for part in first["loc"]) or "config"
        raise ConfigError(f"{loc}: {first['msg']}") from None
