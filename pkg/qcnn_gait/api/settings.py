from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Literal

import yaml
from dotenv import load_dotenv
from pydantic import Field, ValidationError, field_validator

from qcnn_gait._base import StrictBaseModel
from qcnn_gait._exceptions import ConfigurationError
from qcnn_gait.layers.network import ModelSpec
from qcnn_gait.layers.presets import PRESETS, preset_spec

logger = logging.getLogger(__name__)

MAX_WORKERS_ENV = "QCNN_MAX_WORKERS"
LOG_LEVEL_ENV = "QCNN_LOG_LEVEL"


class TrainConfig(StrictBaseModel):
    """Optimisation settings for one training run."""

    epochs: int = Field(default=6, ge=1)
    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = Field(default=1e-3, ge=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_epsilon: float = Field(default=1e-8, gt=0.0)
    seed: int = 0
    augmentation: Literal["none", "rotate"] = "none"
    model: str | ModelSpec = "qcnn"
    selection_metric: Literal["top1-val"] = "top1-val"
    val_fraction: float = Field(default=1 / 7, gt=0.0, lt=1.0)
    clip_norm: float | None = Field(default=10.0, gt=0.0)
    dataset: Path | None = None

    @field_validator("model")
    @classmethod
    def _validate_preset(cls, value: str | ModelSpec) -> str | ModelSpec:
        if isinstance(value, str) and value not in PRESETS:
            raise ValueError(f"unknown preset; expected one of {', '.join(PRESETS)}")
        return value

    def model_spec(self, num_classes: int, input_length: int = 100) -> ModelSpec:
        """Resolve the preset name or check an inline spec against the dataset."""
        if isinstance(self.model, str):
            return preset_spec(self.model, num_classes, input_length)
        if self.model.num_classes != num_classes:
            raise ConfigurationError(
                f"model spec has {self.model.num_classes} classes, dataset has {num_classes}"
            )
        if self.model.input_length != input_length:
            raise ConfigurationError(
                f"model spec expects cycles of length {self.model.input_length}, "
                f"dataset has {input_length}"
            )
        return self.model


class SyntheticDataSettings(StrictBaseModel):
    """Synthetic cohort used by the experiments, or a dataset file to load instead."""

    num_classes: int = Field(default=10, ge=2)
    cycles_per_class: int = Field(default=120, ge=2)
    noise_sigma: float = Field(default=0.05, ge=0.0)
    max_phase_shift: float = Field(default=0.05, ge=0.0, le=0.5)
    seed: int = 7
    dataset: Path | None = None


class SplitSettings(StrictBaseModel):
    """How many cycles per class are held out for testing."""

    test_per_class: int = Field(default=20, ge=1)


class FlipSettings(StrictBaseModel):
    """Fixed half-turn used by the flip experiment."""

    axis: tuple[float, float, float] = (1.0, 0.0, 0.0)
    trials: int = Field(default=1, ge=1)
    num_classes: int | None = Field(default=8, ge=2)

    @field_validator("axis")
    @classmethod
    def _validate_axis(cls, value: tuple[float, float, float]) -> tuple[float, float, float]:
        if not any(value):
            raise ValueError("must be a non-zero vector")
        return value


class RuntimeSettings(StrictBaseModel):
    """Concurrency and output location."""

    max_workers: int | None = Field(default=None, ge=1)
    output_dir: Path = Path("results")


class ExperimentSettings(StrictBaseModel):
    """Complete settings for the experiment matrix and the flip experiment."""

    data: SyntheticDataSettings = SyntheticDataSettings()
    train: TrainConfig = TrainConfig()
    split: SplitSettings = SplitSettings()
    flip: FlipSettings = FlipSettings()
    runtime: RuntimeSettings = RuntimeSettings()
    config_path: Path | None = None


class SettingsError(Exception):
    """Error loading or validating settings."""

    def __init__(
        self,
        message: str,
        *,
        validation_error: ValidationError | None = None,
        config_path: Path | None = None,
    ) -> None:
        super().__init__(message)
        self.validation_error = validation_error
        self.config_path = config_path


def _resolve_path(base_dir: Path, path_str: str | Path) -> Path:
    """Resolve a path relative to the config file directory."""
    path = Path(path_str)
    if path.is_absolute():
        return path
    return (base_dir / path).resolve()


def _load_yaml(config_path: Path) -> dict[str, Any]:
    """Load a YAML (or JSON) configuration file."""
    if not config_path.exists():
        raise SettingsError(f"Config file not found: {config_path}")

    with open(config_path) as f:
        try:
            config = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise SettingsError(f"Could not parse {config_path}: {exc}") from exc

    if config is None:
        return {}
    if not isinstance(config, dict):
        raise SettingsError(f"Invalid config file format: {config_path}")

    return config


def _load_env(base_dir: Path, load_env: bool, env_path: str | Path | None) -> None:
    if not load_env:
        return
    env_file = Path(env_path).resolve() if env_path else (base_dir / ".env")
    load_dotenv(env_file)
    if env_file.exists():
        logger.debug("Loaded environment from %s", env_file)


def _max_workers_from_env() -> int | None:
    raw = os.environ.get(MAX_WORKERS_ENV)
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        raise SettingsError(f"{MAX_WORKERS_ENV} must be an integer, got {raw!r}") from None


def _section(config: dict[str, Any], key: str) -> dict[str, Any]:
    value = config.get(key) or {}
    if not isinstance(value, dict):
        raise SettingsError(f"{key} must be a mapping in the config file")
    return value


def _with_resolved_dataset(section: dict[str, Any], base_dir: Path) -> dict[str, Any]:
    if section.get("dataset") is None:
        return section
    return {**section, "dataset": _resolve_path(base_dir, section["dataset"])}


def load_train_config(
    config_path: str | Path,
    load_env: bool = True,
    env_path: str | Path | None = None,
) -> TrainConfig:
    """Load a training config (JSON or YAML mirroring ``TrainConfig``).

    Raises:
        SettingsError: If the file is missing or invalid.
    """
    config_path = Path(config_path).resolve()
    base_dir = config_path.parent
    _load_env(base_dir, load_env, env_path)

    config = _with_resolved_dataset(_load_yaml(config_path), base_dir)
    try:
        return TrainConfig.model_validate(config)
    except ValidationError as exc:
        raise SettingsError(
            "Invalid configuration",
            validation_error=exc,
            config_path=config_path,
        ) from exc


def load_experiment_settings(
    config_path: str | Path,
    load_env: bool = True,
    env_path: str | Path | None = None,
) -> ExperimentSettings:
    """Load experiment settings; ``QCNN_MAX_WORKERS`` fills ``runtime.max_workers`` if unset.

    Raises:
        SettingsError: If the file is missing or invalid.
    """
    config_path = Path(config_path).resolve()
    base_dir = config_path.parent
    _load_env(base_dir, load_env, env_path)

    config = _load_yaml(config_path)
    runtime = dict(_section(config, "runtime"))
    if runtime.get("max_workers") is None:
        runtime["max_workers"] = _max_workers_from_env()
    runtime["output_dir"] = _resolve_path(base_dir, runtime.get("output_dir", "results"))

    payload = {
        **config,
        "data": _with_resolved_dataset(_section(config, "data"), base_dir),
        "train": _with_resolved_dataset(_section(config, "train"), base_dir),
        "split": _section(config, "split"),
        "flip": _section(config, "flip"),
        "runtime": runtime,
        "config_path": config_path,
    }

    try:
        return ExperimentSettings.model_validate(payload)
    except ValidationError as exc:
        raise SettingsError(
            "Invalid configuration",
            validation_error=exc,
            config_path=config_path,
        ) from exc


def default_experiment_settings() -> ExperimentSettings:
    """Settings used when no config file is given; honours ``QCNN_MAX_WORKERS``."""
    return ExperimentSettings(runtime=RuntimeSettings(max_workers=_max_workers_from_env()))
