"""Experiment configuration: one JSON document per run, unknown keys rejected."""
from __future__ import annotations
import hashlib
import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, model_validator

from aggmin.errors import ConfigError
from aggmin.minimizer import FlowConfig
from aggmin.models import EntropyLaw, Kernel
from aggmin.radial import Dimension, RadialGrid


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')


class GridConfig(_Section):
    d: Dimension = 2
    R: PositiveFloat = 20.0
    N: int = Field(512, ge=2)

    def build(self) -> RadialGrid:
        return RadialGrid(d=self.d, R=self.R, N=self.N)


class CriticalityConfig(_Section):
    delta: PositiveFloat = 1.0
    # None: estimated from a seeded ensemble when the check needs it
    C0: PositiveFloat | None = None
    nu: float | None = None
    alpha: PositiveFloat | None = None
    p: float | None = Field(None, gt=1)
    ensemble_size: PositiveInt = 200


class ProbeConfig(_Section):
    lambdas: list[PositiveFloat] = Field(default_factory=lambda: [2.0**-k for k in range(9)], min_length=1)
    width: PositiveFloat = 1.0


class SweepConfig(_Section):
    parameter: Literal['amplitude', 'mass', 'm']
    values: list[PositiveFloat]


class ExperimentConfig(_Section):
    grid: GridConfig = GridConfig()
    kernel: Kernel
    entropy: EntropyLaw
    mass: PositiveFloat = 1.0
    criticality: CriticalityConfig = CriticalityConfig()
    flow: FlowConfig = FlowConfig()
    probe: ProbeConfig = ProbeConfig()
    sweep: SweepConfig | None = None
    profile: str | None = None
    seed: int = 0

    @model_validator(mode='before')
    @classmethod
    def _kernel_dimension(cls, data: Any) -> Any:
        """The kernel lives in the grid's dimension unless it says otherwise."""
        if isinstance(data, dict) and isinstance(data.get('kernel'), dict):
            d = (data.get('grid') or {}).get('d', 2)
            data = {**data, 'kernel': {'d': d, **data['kernel']}}
        return data

    @model_validator(mode='after')
    def _consistent(self):
        if self.kernel.d != self.grid.d:
            raise ValueError(f'kernel dimension {self.kernel.d} differs from grid dimension {self.grid.d}')
        return self


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def parse_config(text: str) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(json.loads(text))
    except json.JSONDecodeError as e:
        raise ConfigError(f'config is not valid JSON: {e}') from e
    except ValidationError as e:
        raise ConfigError(f'invalid config:\n{e}') from e


def load_config(path: str | Path) -> tuple[ExperimentConfig, str]:
    """Validated config and the sha256 of its raw text. OSError propagates."""
    text = Path(path).read_text(encoding='utf-8')
    return parse_config(text), config_hash(text)
