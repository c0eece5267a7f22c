from __future__ import annotations

from pathlib import Path
from textwrap import dedent

import pytest
from pydantic import ValidationError

from qcnn_gait.api.settings import (
    MAX_WORKERS_ENV,
    SettingsError,
    TrainConfig,
    default_experiment_settings,
    load_experiment_settings,
    load_train_config,
)
from qcnn_gait.layers.network import ModelSpec


def _write_config(path: Path, content: str) -> None:
    path.write_text(dedent(content).strip() + "\n")


def test_load_train_config_resolves_dataset_relative_to_config(tmp_path: Path) -> None:
    config_path = tmp_path / "train.yaml"
    _write_config(
        config_path,
        """
        epochs: 3
        batch_size: 8
        augmentation: rotate
        model: small-qcnn
        dataset: ./data/gait.qgc1
        """,
    )

    config = load_train_config(config_path, load_env=False)

    assert config.dataset == (tmp_path / "data/gait.qgc1").resolve()
    assert config.epochs == 3
    assert config.augmentation == "rotate"
    assert config.model_spec(3, 16).name == "small-qcnn"


def test_load_train_config_accepts_json(tmp_path: Path) -> None:
    config_path = tmp_path / "train.json"
    config_path.write_text('{"epochs": 2, "learning_rate": 0.01, "seed": 5}\n')

    config = load_train_config(config_path, load_env=False)

    assert (config.epochs, config.learning_rate, config.seed) == (2, 0.01, 5)
    assert config.dataset is None


def test_load_train_config_rejects_unknown_config_key(tmp_path: Path) -> None:
    config_path = tmp_path / "train.yaml"
    _write_config(
        config_path,
        """
        epochs: 3
        momentum: 0.9
        """,
    )

    with pytest.raises(SettingsError) as exc_info:
        load_train_config(config_path, load_env=False)

    assert isinstance(exc_info.value.validation_error, ValidationError)
    assert exc_info.value.config_path == config_path.resolve()
    assert "momentum" in str(exc_info.value.validation_error)


def test_load_train_config_rejects_unknown_preset(tmp_path: Path) -> None:
    config_path = tmp_path / "train.yaml"
    _write_config(config_path, "model: resnet\n")

    with pytest.raises(SettingsError) as exc_info:
        load_train_config(config_path, load_env=False)

    assert "unknown preset" in str(exc_info.value.validation_error)


def test_missing_config_file_is_a_settings_error(tmp_path: Path) -> None:
    with pytest.raises(SettingsError, match="Config file not found"):
        load_train_config(tmp_path / "absent.yaml", load_env=False)


def test_inline_model_spec_must_match_the_dataset() -> None:
    spec = {
        "num_classes": 4,
        "input_length": 16,
        "layers": [{"kind": "dense", "units": 4}],
    }
    config = TrainConfig(model=spec)

    assert isinstance(config.model, ModelSpec)
    assert config.model_spec(4, 16) is config.model
    with pytest.raises(ValueError, match="classes"):
        config.model_spec(5, 16)
    with pytest.raises(ValueError, match="length"):
        config.model_spec(4, 100)


def test_load_experiment_settings_resolves_output_dir_and_reads_env(
    monkeypatch: pytest.MonkeyPatch, tmp_path: Path
) -> None:
    monkeypatch.setenv(MAX_WORKERS_ENV, "3")
    config_path = tmp_path / "experiment.yaml"
    _write_config(
        config_path,
        """
        data:
          num_classes: 4
          cycles_per_class: 30
        train:
          epochs: 2
          model: small-qcnn
        flip:
          axis: [0.0, 0.0, 1.0]
          trials: 2
        runtime:
          output_dir: ./out
        """,
    )

    settings = load_experiment_settings(config_path, load_env=False)

    assert settings.runtime.output_dir == (tmp_path / "out").resolve()
    assert settings.runtime.max_workers == 3
    assert settings.data.num_classes == 4
    assert settings.flip.axis == (0.0, 0.0, 1.0)
    assert settings.split.test_per_class == 20
    assert settings.config_path == config_path.resolve()


def test_config_max_workers_wins_over_env(
    monkeypatch: pytest.MonkeyPatch, tmp_path: Path
) -> None:
    monkeypatch.setenv(MAX_WORKERS_ENV, "3")
    config_path = tmp_path / "experiment.yaml"
    _write_config(
        config_path,
        """
        runtime:
          max_workers: 1
        """,
    )

    assert load_experiment_settings(config_path, load_env=False).runtime.max_workers == 1


def test_bad_max_workers_env_is_a_settings_error(
    monkeypatch: pytest.MonkeyPatch, tmp_path: Path
) -> None:
    monkeypatch.setenv(MAX_WORKERS_ENV, "many")
    config_path = tmp_path / "experiment.yaml"
    _write_config(config_path, "data: {}\n")

    with pytest.raises(SettingsError, match=MAX_WORKERS_ENV):
        load_experiment_settings(config_path, load_env=False)
    with pytest.raises(SettingsError, match=MAX_WORKERS_ENV):
        default_experiment_settings()


def test_zero_flip_axis_is_rejected(tmp_path: Path) -> None:
    config_path = tmp_path / "experiment.yaml"
    _write_config(
        config_path,
        """
        flip:
          axis: [0, 0, 0]
        """,
    )

    with pytest.raises(SettingsError) as exc_info:
        load_experiment_settings(config_path, load_env=False)

    assert isinstance(exc_info.value.validation_error, ValidationError)


def test_env_file_next_to_config_is_loaded(
    monkeypatch: pytest.MonkeyPatch, tmp_path: Path
) -> None:
    monkeypatch.setenv(MAX_WORKERS_ENV, "0")
    monkeypatch.delenv(MAX_WORKERS_ENV)
    config_path = tmp_path / "experiment.yaml"
    _write_config(config_path, "train:\n  epochs: 1\n")
    (tmp_path / ".env").write_text(f"{MAX_WORKERS_ENV}=2\n")

    settings = load_experiment_settings(config_path)

    assert settings.runtime.max_workers == 2
