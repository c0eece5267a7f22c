from __future__ import annotations

import json
from pathlib import Path
from textwrap import dedent

import pytest

from qcnn_gait._exceptions import ConfigurationError
from qcnn_gait.api.api import (
    evaluate_checkpoint,
    generate_dataset_file,
    train_from_config,
    visualize_checkpoint,
)
from qcnn_gait.api.settings import TrainConfig
from qcnn_gait.data.io import load_dataset, save_dataset
from qcnn_gait.data.synthetic import generate_synthetic_dataset
from qcnn_gait.training.checkpoint import load_checkpoint


@pytest.fixture
def dataset_path(tmp_path: Path) -> Path:
    dataset = generate_synthetic_dataset(3, 6, 0.05, 11, length=16)
    return save_dataset(dataset, tmp_path / "data" / "gait.qgc1")


def test_generate_dataset_file_round_trips(tmp_path: Path) -> None:
    out = tmp_path / "gait.qgc1"
    dataset = generate_dataset_file(
        out, num_classes=2, cycles_per_class=4, noise_sigma=0.0, seed=3, split="test"
    )

    loaded = load_dataset(out)

    assert loaded.split == "test"
    assert loaded.num_classes == 2
    assert len(loaded) == len(dataset) == 8


def test_train_from_yaml_config_then_evaluate(tmp_path: Path, dataset_path: Path) -> None:
    config_path = tmp_path / "train.yaml"
    config_path.write_text(
        dedent(
            """
            epochs: 2
            batch_size: 6
            model: small-qcnn
            augmentation: rotate
            dataset: ./data/gait.qgc1
            """
        ).strip()
        + "\n"
    )

    outputs = train_from_config(config_path, out_dir=tmp_path / "run", seed=1)

    assert outputs.checkpoint_path.exists()
    assert len(outputs.metrics_path.read_text().splitlines()) == 3
    assert load_checkpoint(outputs.checkpoint_path).spec.name == "small-qcnn"

    report = evaluate_checkpoint(outputs.checkpoint_path, dataset_path, tmp_path / "eval.json")

    assert report.num_samples == 18
    assert 0.0 <= report.top1 <= report.top5 <= 1.0
    assert json.loads((tmp_path / "eval.json").read_text())["top1"] == report.top1


def test_training_without_a_dataset_is_a_configuration_error(tmp_path: Path) -> None:
    with pytest.raises(ConfigurationError, match="no dataset"):
        train_from_config(TrainConfig(model="small-qcnn"), out_dir=tmp_path)


def test_evaluate_rejects_class_count_mismatch(tmp_path: Path, dataset_path: Path) -> None:
    config = TrainConfig(epochs=1, batch_size=6, model="small-qcnn")
    outputs = train_from_config(config, out_dir=tmp_path / "run", dataset_path=dataset_path)
    other = save_dataset(
        generate_synthetic_dataset(2, 4, 0.05, 5, length=16), tmp_path / "two.qgc1"
    )

    with pytest.raises(ConfigurationError, match="output classes"):
        evaluate_checkpoint(outputs.checkpoint_path, other)


def test_visualize_checkpoint_writes_json_and_svg(tmp_path: Path, dataset_path: Path) -> None:
    config = TrainConfig(epochs=1, batch_size=6, model="small-qcnn")
    outputs = train_from_config(config, out_dir=tmp_path / "run", dataset_path=dataset_path)

    document = visualize_checkpoint(
        outputs.checkpoint_path,
        tmp_path / "viz" / "kernels.json",
        steps=25,
        trace_dataset=dataset_path,
        trace_index=2,
        svg_path=tmp_path / "viz" / "kernels.svg",
    )

    written = json.loads((tmp_path / "viz" / "kernels.json").read_text())
    assert written == json.loads(json.dumps(document))
    assert len(written["fragments"]) == 2
    assert len(written["traces"]) == 2
    assert (tmp_path / "viz" / "kernels.svg").read_text().startswith("<svg")

    with pytest.raises(ConfigurationError, match="trace index"):
        visualize_checkpoint(
            outputs.checkpoint_path,
            tmp_path / "k.json",
            steps=1,
            trace_dataset=dataset_path,
            trace_index=18,
        )
