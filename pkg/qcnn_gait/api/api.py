from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qcnn_gait._exceptions import ConfigurationError
from qcnn_gait.api.settings import (
    ExperimentSettings,
    TrainConfig,
    default_experiment_settings,
    load_experiment_settings,
    load_train_config,
)
from qcnn_gait.data.cycles import GaitDataset, Split
from qcnn_gait.data.io import load_dataset, save_dataset
from qcnn_gait.data.synthetic import generate_synthetic_dataset
from qcnn_gait.training.checkpoint import load_checkpoint, restore_model, save_checkpoint
from qcnn_gait.training.experiments import ResultTable, flip_experiment, run_experiment_matrix
from qcnn_gait.training.metrics import EvalReport, write_metrics_csv
from qcnn_gait.training.trainer import TrainingResult, build_model, evaluate, train
from qcnn_gait.viz.kernels import (
    DEFAULT_STEP_SIZE,
    DEFAULT_STEPS,
    apply_kernel_trace,
    build_document,
    visualize_kernels,
    write_document,
)
from qcnn_gait.viz.svg import write_svg

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.qckp"
METRICS_NAME = "metrics.csv"


@dataclass(frozen=True)
class TrainOutputs:
    result: TrainingResult
    checkpoint_path: Path
    metrics_path: Path


def generate_dataset_file(
    out: Path,
    *,
    num_classes: int,
    cycles_per_class: int,
    noise_sigma: float,
    seed: int,
    max_phase_shift: float = 0.05,
    split: Split = "train",
) -> GaitDataset:
    """Generate a synthetic cohort from ``seed`` and write it with its manifest."""
    dataset = generate_synthetic_dataset(
        num_classes,
        cycles_per_class,
        noise_sigma,
        seed,
        max_phase_shift=max_phase_shift,
        split=split,
    )
    save_dataset(dataset, out)
    return dataset


def train_from_config(
    config: TrainConfig | Path,
    *,
    out_dir: Path,
    dataset_path: Path | None = None,
    seed: int | None = None,
    env_file: Path | None = None,
) -> TrainOutputs:
    """Train on a dataset file and write the selected checkpoint plus the metrics CSV."""
    if not isinstance(config, TrainConfig):
        config = load_train_config(config, env_path=env_file)
    if seed is not None:
        config = config.model_copy(update={"seed": seed})
    dataset_path = dataset_path or config.dataset
    if dataset_path is None:
        raise ConfigurationError("no dataset given: set 'dataset' in the config or pass --dataset")

    dataset = load_dataset(dataset_path)
    model = build_model(config, dataset.num_classes, dataset.length)
    result = train(model, dataset, config)

    out_dir = Path(out_dir)
    checkpoint_path = save_checkpoint(result.checkpoint, out_dir / CHECKPOINT_NAME)
    metrics_path = write_metrics_csv(result.history, out_dir / METRICS_NAME)
    return TrainOutputs(result, checkpoint_path, metrics_path)


def evaluate_checkpoint(
    checkpoint_path: Path, dataset_path: Path, out: Path | None = None
) -> EvalReport:
    """Evaluate a checkpoint on a dataset file; optionally write the report as JSON."""
    model = restore_model(load_checkpoint(checkpoint_path))
    dataset = load_dataset(dataset_path)
    if dataset.num_classes != model.num_classes:
        raise ConfigurationError(
            f"checkpoint model has {model.num_classes} output classes but {dataset_path} "
            f"declares {dataset.num_classes}"
        )
    report = evaluate(model, dataset)
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return report


def _experiment_settings(
    config_path: Path | None, seed: int | None, env_file: Path | None
) -> ExperimentSettings:
    settings = (
        load_experiment_settings(config_path, env_path=env_file)
        if config_path is not None
        else default_experiment_settings()
    )
    if seed is not None:
        settings = settings.model_copy(
            update={
                "data": settings.data.model_copy(update={"seed": seed}),
                "train": settings.train.model_copy(update={"seed": seed}),
            }
        )
    return settings


def run_matrix_from_config(
    config_path: Path | None,
    *,
    out_dir: Path | None = None,
    seed: int | None = None,
    env_file: Path | None = None,
) -> tuple[ResultTable, Path, Path]:
    settings = _experiment_settings(config_path, seed, env_file)
    table = run_experiment_matrix(settings)
    csv_path, text_path = table.write(out_dir or settings.runtime.output_dir, "experiment_matrix")
    return table, csv_path, text_path


def run_flip_from_config(
    config_path: Path | None,
    *,
    out_dir: Path | None = None,
    seed: int | None = None,
    trials: int | None = None,
    axis: tuple[float, float, float] | None = None,
    env_file: Path | None = None,
) -> tuple[ResultTable, Path, Path]:
    settings = _experiment_settings(config_path, seed, env_file)
    flip_update: dict[str, object] = {}
    if trials is not None:
        flip_update["trials"] = trials
    if axis is not None:
        flip_update["axis"] = axis
    if flip_update:
        flip = type(settings.flip).model_validate({**settings.flip.model_dump(), **flip_update})
        settings = settings.model_copy(update={"flip": flip})
    table = flip_experiment(settings)
    csv_path, text_path = table.write(out_dir or settings.runtime.output_dir, "flip_experiment")
    return table, csv_path, text_path


def visualize_checkpoint(
    checkpoint_path: Path,
    out: Path,
    *,
    layer: int = 0,
    seed: int = 0,
    channels: list[int] | None = None,
    steps: int = DEFAULT_STEPS,
    step_size: float = DEFAULT_STEP_SIZE,
    trace_dataset: Path | None = None,
    trace_index: int = 0,
    svg_path: Path | None = None,
    max_workers: int | None = None,
) -> dict[str, object]:
    """Optimise kernel fragments, optionally trace them over one cycle, and write JSON/SVG."""
    model = restore_model(load_checkpoint(checkpoint_path))
    fragments = visualize_kernels(
        model,
        layer,
        seed,
        channels=channels,
        steps=steps,
        step_size=step_size,
        max_workers=max_workers,
    )
    traces = None
    if trace_dataset is not None:
        dataset = load_dataset(trace_dataset)
        if not 0 <= trace_index < len(dataset):
            raise ConfigurationError(
                f"trace index {trace_index} outside dataset of {len(dataset)} cycles"
            )
        cycle = np.asarray(dataset.samples[trace_index])
        traces = [
            apply_kernel_trace(model, layer, fragment.out_channel, cycle) for fragment in fragments
        ]

    document = build_document(str(checkpoint_path), layer, seed, fragments, traces)
    write_document(document, out)
    if svg_path is not None:
        write_svg(document, svg_path)
    logger.info("Wrote %d kernel fragments to %s", len(fragments), out)
    return document
