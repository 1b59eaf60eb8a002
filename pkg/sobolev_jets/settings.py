"""
Settings for the Sobolev jet toolkit
YAML defaults validated by pydantic, with environment and CLI overrides
"""

import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

load_dotenv()

DEFAULT_CONFIG_PATH = Path(__file__).parent / "config" / "extension_config.yaml"


class WhitneySettings(BaseModel):
    inflate: float = Field(4.0, ge=4.0)
    depth_cap: Union[int, str] = "auto"
    max_depth: int = Field(14, ge=1, le=24)
    resolution_factor: float = Field(64.0, gt=0)

    @field_validator("depth_cap")
    @classmethod
    def _depth_cap_value(cls, value: Union[int, str]) -> Union[int, str]:
        if isinstance(value, str):
            if value != "auto":
                raise ValueError("depth_cap must be a positive integer or 'auto'")
            return value
        if value < 1:
            raise ValueError("depth_cap must be >= 1")
        return value


class LacunaSettings(BaseModel):
    tau: float = Field(4.0, gt=0)
    gamma_tilde: float = Field(180.0, ge=1.0)


class GraphSettings(BaseModel):
    gamma: Optional[float] = Field(None, ge=1.0)
    bruteforce_gamma: float = Field(3.0, ge=1.0)
    bruteforce_max_points: int = Field(8, ge=1, le=8)


class QuadratureSettings(BaseModel):
    order: int = Field(4, ge=1, le=12)
    refinement_check: bool = False
    refinement_tolerance: float = Field(0.05, gt=0)
    chunk_cubes: int = Field(64, ge=1)


class MetricSettings(BaseModel):
    resolution: int = Field(32, ge=2)
    sample_radius_cells: float = Field(4.0, gt=0)
    substeps: int = Field(4, ge=1)
    slack: float = Field(0.05, ge=0)


class ExtensionSettings(BaseModel):
    epsilon: float = Field(1.0, gt=0)
    grid_resolution: int = Field(17, ge=2)
    delta_factor: float = Field(1.0e-5, gt=0)


class VerificationSettings(BaseModel):
    pou_samples: int = Field(1000, ge=1)
    reproduction_samples: int = Field(200, ge=1)
    empirical_bounds: Dict[str, float] = Field(
        default_factory=lambda: {
            "fiber": 64,
            "contacts": 64,
            "degree": 64,
            "geodesic_stretch": 32,
        }
    )


class LoggingSettings(BaseModel):
    level: str = "INFO"


class Settings(BaseModel):
    """All tunable constants of a run"""

    whitney: WhitneySettings = Field(default_factory=WhitneySettings)
    lacunae: LacunaSettings = Field(default_factory=LacunaSettings)
    graph: GraphSettings = Field(default_factory=GraphSettings)
    quadrature: QuadratureSettings = Field(default_factory=QuadratureSettings)
    metric: MetricSettings = Field(default_factory=MetricSettings)
    extension: ExtensionSettings = Field(default_factory=ExtensionSettings)
    verification: VerificationSettings = Field(default_factory=VerificationSettings)
    logging: LoggingSettings = Field(default_factory=LoggingSettings)
    output_dir: str = "output"

    @property
    def gamma(self) -> float:
        """Sparsity constant of the graph certificates"""
        if self.graph.gamma is not None:
            return self.graph.gamma
        return 1.0e4 * self.lacunae.gamma_tilde

    def with_overrides(self, overrides: Dict[str, Any]) -> "Settings":
        """Return a copy with dotted-key overrides applied, skipping None values"""
        data = self.model_dump()
        for dotted, value in overrides.items():
            if value is None:
                continue
            section, _, key = dotted.partition(".")
            if key:
                data.setdefault(section, {})[key] = value
            else:
                data[section] = value
        return _validate(data)


def _validate(data: Dict[str, Any]) -> Settings:
    try:
        return Settings.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid settings: {e}") from e


def load_settings(path: Optional[Union[str, Path]] = None) -> Settings:
    """
    Load settings from YAML.

    Args:
        path: YAML file; defaults to SOBOLEV_JETS_CONFIG or the bundled config

    Returns:
        Validated Settings with environment overrides applied
    """
    config_path = Path(path or os.getenv("SOBOLEV_JETS_CONFIG") or DEFAULT_CONFIG_PATH)
    try:
        with open(config_path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle) or {}
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {config_path}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Config file is not valid YAML: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError(f"Config root must be a mapping: {config_path}")

    output_dir = os.getenv("SOBOLEV_JETS_OUTPUT_DIR")
    if output_dir:
        data["output_dir"] = output_dir
    log_level = os.getenv("SOBOLEV_JETS_LOG_LEVEL")
    if log_level:
        data.setdefault("logging", {})["level"] = log_level

    return _validate(data)


class RunConfig(BaseModel):
    """One CLI invocation: input, command and constant overrides"""

    command: str
    input_path: Optional[Path] = None
    output_dir: Optional[Path] = None
    seed: int = 0
    tau: Optional[float] = Field(None, gt=0)
    gamma: Optional[float] = Field(None, ge=1.0)
    depth_cap: Optional[int] = Field(None, ge=1)
    inflate: Optional[float] = Field(None, ge=4.0)
    epsilon: Optional[float] = Field(None, gt=0)
    quad_order: Optional[int] = Field(None, ge=1, le=12)

    @model_validator(mode="after")
    def _input_required(self) -> "RunConfig":
        if self.command not in ("gen", "sweep", "metric") and self.input_path is None:
            raise ValueError(f"command '{self.command}' needs an input jet file")
        return self

    def apply(self, settings: Settings) -> Settings:
        """Fold CLI overrides into the loaded settings"""
        return settings.with_overrides(
            {
                "lacunae.tau": self.tau,
                "graph.gamma": self.gamma,
                "whitney.depth_cap": self.depth_cap,
                "whitney.inflate": self.inflate,
                "extension.epsilon": self.epsilon,
                "quadrature.order": self.quad_order,
                "output_dir": str(self.output_dir) if self.output_dir else None,
            }
        )


