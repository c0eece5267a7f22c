from __future__ import annotations

from pydantic import ValidationError
from rich.panel import Panel

from qcnn_gait.api.cli_errors import (
    format_pydantic_validation_error,
    format_settings_error,
    missing_key_snippet,
    render_config_error_panel,
)
from qcnn_gait.api.settings import ExperimentSettings, SettingsError
from qcnn_gait.layers.network import ModelSpec


def test_format_pydantic_validation_error_includes_yaml_snippet_for_missing_fields() -> None:
    payload = {"name": "tiny", "layers": [{"kind": "dense", "units": 3}]}

    try:
        ModelSpec.model_validate(payload)
    except ValidationError as exc:
        message = format_pydantic_validation_error(exc, file_name="/tmp/model.yaml")
    else:
        raise AssertionError("Expected ValidationError")

    assert "Invalid configuration in /tmp/model.yaml" in message
    assert "• num_classes: Field required" in message
    assert "Example config snippet:" in message
    assert "num_classes: <required>" in message
    assert "• Add or correct these values in model.yaml" in message


def test_format_pydantic_validation_error_reports_nested_paths() -> None:
    try:
        ExperimentSettings.model_validate({"flip": {"axis": [0, 0, 0]}, "train": {"epochs": 0}})
    except ValidationError as exc:
        message = format_pydantic_validation_error(exc)
    else:
        raise AssertionError("Expected ValidationError")

    lines = message.splitlines()
    assert lines[0] == "Invalid configuration in config.yaml:"
    assert any(line.startswith("• flip.axis:") and "non-zero" in line for line in lines)
    assert any(line.startswith("• train.epochs:") for line in lines)
    assert "Example config snippet:" not in message
    assert "Or pass --axis on the command line." in message


def test_format_settings_error_without_validation_error_is_the_message(tmp_path) -> None:
    exc = SettingsError("Config file not found: missing.yaml")

    assert format_settings_error(exc, config_path=tmp_path / "x.yaml") == str(exc)


def test_render_config_error_panel_wraps_message() -> None:
    panel = render_config_error_panel("bad value")

    assert isinstance(panel, Panel)
    assert panel.renderable == "bad value"
    assert panel.title == "Configuration error"


def test_missing_layer_field_is_placed_under_its_section() -> None:
    payload = {
        "train": {"model": {"name": "m", "num_classes": 3, "layers": [{"kind": "dense"}]}}
    }

    try:
        ExperimentSettings.model_validate(payload)
    except ValidationError as exc:
        message = format_pydantic_validation_error(exc)
    else:
        raise AssertionError("Expected ValidationError")

    assert "Example config snippet:\ntrain:\n  model:\n    layers:\n    - dense:" in message
    assert "units: <required>" in message
    assert "ModelSpec:" not in message


def test_missing_key_snippet_nests_sections_and_lists() -> None:
    snippet = missing_key_snippet([("data", "seed"), ("layers", 0, "units"), ("name",)])

    assert snippet.splitlines() == [
        "Example config snippet:",
        "data:",
        "  seed: <required>",
        "layers:",
        "- units: <required>",
        "name: <required>",
    ]
    assert missing_key_snippet([]) == ""
