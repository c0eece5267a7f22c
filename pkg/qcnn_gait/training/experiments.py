"""Rotation-robustness experiments: the orientation train/test matrix and the flip test."""

from __future__ import annotations

import csv
import io
import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from time import perf_counter

import numpy as np
from rich import box
from rich.console import Console
from rich.table import Table

from qcnn_gait.api.settings import ExperimentSettings, TrainConfig
from qcnn_gait.data.cycles import (
    GaitDataset,
    concat_datasets,
    randomly_rotate_dataset,
    rotate_dataset,
    split_train_val,
    stratified_holdout,
)
from qcnn_gait.data.io import load_dataset
from qcnn_gait.data.synthetic import generate_synthetic_dataset
from qcnn_gait.quaternion.algebra import from_axis_angle
from qcnn_gait.training.metrics import EvalReport
from qcnn_gait.training.trainer import build_model, evaluate, train

logger = logging.getLogger(__name__)

MODELS: tuple[str, ...] = ("qcnn", "cnn")
FLIP_SPLITS: tuple[str, ...] = (
    "test",
    "test-flipped",
    "train-flipped",
    "val-flipped",
    "all-flipped",
)


@dataclass(frozen=True)
class Regime:
    """Orientation of the training and test cycles in one matrix row."""

    name: str
    train_rotated: bool
    test_rotated: bool


REGIMES: tuple[Regime, ...] = (
    Regime("Original/Original", train_rotated=False, test_rotated=False),
    Regime("Original/Rotated", train_rotated=False, test_rotated=True),
    Regime("Rotated/Rotated", train_rotated=True, test_rotated=True),
)


@dataclass(frozen=True)
class Cohort:
    """Train/val pool and held-out test cycles, each in canonical and rotated form."""

    pool: GaitDataset
    test: GaitDataset
    rotated_pool: GaitDataset
    rotated_test: GaitDataset


@dataclass(frozen=True)
class MatrixJob:
    model: str
    regime: Regime
    seed: int


@dataclass(frozen=True)
class JobResult:
    job: MatrixJob
    parameter_count: int
    report: EvalReport
    seconds: float


@dataclass(frozen=True)
class ResultTable:
    """Column names plus rows; written as CSV and as aligned plain text."""

    title: str
    columns: tuple[str, ...]
    rows: list[tuple[object, ...]]

    def column(self, name: str) -> list[object]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]

    def lookup(self, key: object, column: str) -> object:
        """Value in ``column`` of the first row whose leading cells match ``key``."""
        keys = key if isinstance(key, tuple) else (key,)
        index = self.columns.index(column)
        for row in self.rows:
            if row[: len(keys)] == keys:
                return row[index]
        raise KeyError(key)

    def to_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(self.columns)
            writer.writerows([[_format_cell(cell) for cell in row] for row in self.rows])
        return path

    def render(self) -> str:
        table = Table(title=self.title, box=box.ASCII, show_lines=False)
        for name in self.columns:
            justify = "left" if name in {"regime", "model", "split"} else "right"
            table.add_column(name, justify=justify)
        for row in self.rows:
            table.add_row(*[_format_cell(cell) for cell in row])
        buffer = io.StringIO()
        Console(file=buffer, width=160, color_system=None, force_terminal=False).print(table)
        return buffer.getvalue()

    def write(self, out_dir: Path, stem: str) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        csv_path = self.to_csv(out_dir / f"{stem}.csv")
        text_path = out_dir / f"{stem}.txt"
        text_path.write_text(self.render())
        return csv_path, text_path


def _format_cell(cell: object) -> str:
    if isinstance(cell, float):
        return f"{cell:.4f}"
    return str(cell)


def _derived_seeds(seed: int, count: int) -> list[int]:
    return [
        int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(count)
    ]


def prepare_cohort(settings: ExperimentSettings, num_classes: int | None = None) -> Cohort:
    """Generate (or load) the cohort, hold out the test cycles and draw the rotated copies."""
    data = settings.data
    if data.dataset is not None:
        dataset = load_dataset(data.dataset)
    else:
        dataset = generate_synthetic_dataset(
            num_classes or data.num_classes,
            data.cycles_per_class,
            data.noise_sigma,
            data.seed,
            max_phase_shift=data.max_phase_shift,
        )
    rng = np.random.default_rng(np.random.SeedSequence(data.seed).spawn(2)[1])
    pool, test = stratified_holdout(dataset, settings.split.test_per_class, rng)
    return Cohort(
        pool=pool,
        test=test,
        rotated_pool=randomly_rotate_dataset(pool, rng),
        rotated_test=randomly_rotate_dataset(test, rng, "test"),
    )


def _run_job(job: MatrixJob, cohort: Cohort, base: TrainConfig) -> JobResult:
    start = perf_counter()
    config = base.model_copy(update={"model": job.model, "seed": job.seed})
    pool = cohort.rotated_pool if job.regime.train_rotated else cohort.pool
    test = cohort.rotated_test if job.regime.test_rotated else cohort.test

    model = build_model(config, pool.num_classes, pool.length)
    train(model, pool, config)
    report = evaluate(model, test)
    seconds = perf_counter() - start
    logger.info(
        "%s %s: top1 %.4f top5 %.4f (%.1fs)",
        job.model,
        job.regime.name,
        report.top1,
        report.top5,
        seconds,
    )
    return JobResult(job, model.parameter_count, report, seconds)


def run_experiment_matrix(
    settings: ExperimentSettings, cohort: Cohort | None = None
) -> ResultTable:
    """Train both models under every regime (six jobs) and tabulate test accuracy."""
    cohort = cohort or prepare_cohort(settings)
    seeds = _derived_seeds(settings.train.seed, len(MODELS) * len(REGIMES))
    jobs = [
        MatrixJob(model, regime, seeds[i * len(MODELS) + j])
        for i, regime in enumerate(REGIMES)
        for j, model in enumerate(MODELS)
    ]

    logger.info("=" * 60)
    logger.info("Experiment matrix: %d jobs, %d classes", len(jobs), cohort.pool.num_classes)
    logger.info("=" * 60)
    start = perf_counter()
    with ThreadPoolExecutor(max_workers=settings.runtime.max_workers) as pool:
        results = list(pool.map(lambda job: _run_job(job, cohort, settings.train), jobs))
    logger.info("Experiment matrix finished in %.1fs", perf_counter() - start)

    by_key = {(r.job.regime.name, r.job.model): r for r in results}
    parameters = {model: by_key[(REGIMES[0].name, model)].parameter_count for model in MODELS}
    columns = (
        "regime",
        *[f"{model}_{metric}" for model in MODELS for metric in ("top1", "top5")],
        *[f"{model}_parameters" for model in MODELS],
    )
    rows: list[tuple[object, ...]] = []
    for regime in REGIMES:
        cells: list[object] = [regime.name]
        for model in MODELS:
            report = by_key[(regime.name, model)].report
            cells.extend([report.top1, report.top5])
        cells.extend(parameters[model] for model in MODELS)
        rows.append(tuple(cells))
    return ResultTable("Test accuracy by train/test orientation", columns, rows)


def flip_rotation(axis: Sequence[float]) -> np.ndarray:
    """Half turn about ``axis``."""
    return from_axis_angle(axis, np.pi)


def flip_splits(
    train_set: GaitDataset, val_set: GaitDataset, test: GaitDataset, axis: Sequence[float]
) -> dict[str, GaitDataset]:
    flip = flip_rotation(axis)
    flipped = {
        "test-flipped": rotate_dataset(test, flip, "test-flipped"),
        "train-flipped": rotate_dataset(train_set, flip, "train-flipped"),
        "val-flipped": rotate_dataset(val_set, flip, "val-flipped"),
    }
    return {
        "test": test,
        **flipped,
        "all-flipped": concat_datasets(list(flipped.values()), "all-flipped"),
    }


def _flip_trial(
    model_name: str, seed: int, cohort: Cohort, settings: ExperimentSettings
) -> tuple[int, dict[str, EvalReport]]:
    config = settings.train.model_copy(update={"model": model_name, "seed": seed})
    split_rng = np.random.default_rng(seed)
    train_set, val_set = split_train_val(cohort.pool, config.val_fraction, split_rng)
    model = build_model(config, cohort.pool.num_classes, cohort.pool.length)
    train(model, train_set, config, val_dataset=val_set)
    splits = flip_splits(train_set, val_set, cohort.test, settings.flip.axis)
    reports = {name: evaluate(model, splits[name]) for name in FLIP_SPLITS}
    logger.info(
        "%s flip trial (seed %d): test %.4f test-flipped %.4f",
        model_name,
        seed,
        reports["test"].top1,
        reports["test-flipped"].top1,
    )
    return model.parameter_count, reports


def flip_experiment(settings: ExperimentSettings, cohort: Cohort | None = None) -> ResultTable:
    """Train on canonical orientation and evaluate on half-turn flipped splits.

    With ``flip.trials > 1`` every trial uses its own derived seed and the table reports the
    mean and standard deviation across trials.
    """
    cohort = cohort or prepare_cohort(settings, settings.flip.num_classes)
    seeds = _derived_seeds(settings.train.seed, settings.flip.trials)
    jobs = [(model, seed) for model in MODELS for seed in seeds]

    logger.info("=" * 60)
    logger.info(
        "Flip experiment: %d trials, axis %s", settings.flip.trials, tuple(settings.flip.axis)
    )
    logger.info("=" * 60)
    with ThreadPoolExecutor(max_workers=settings.runtime.max_workers) as pool:
        outcomes = list(pool.map(lambda job: _flip_trial(*job, cohort, settings), jobs))

    columns = (
        "model",
        "split",
        "parameters",
        "top1_mean",
        "top1_std",
        "top5_mean",
        "top5_std",
        "trials",
    )
    rows: list[tuple[object, ...]] = []
    for model in MODELS:
        trials = [
            outcome for (name, _), outcome in zip(jobs, outcomes, strict=True) if name == model
        ]
        parameter_count = trials[0][0]
        for split in FLIP_SPLITS:
            top1 = np.array([reports[split].top1 for _, reports in trials])
            top5 = np.array([reports[split].top5 for _, reports in trials])
            rows.append(
                (
                    model,
                    split,
                    parameter_count,
                    float(top1.mean()),
                    float(top1.std()),
                    float(top5.mean()),
                    float(top5.std()),
                    len(trials),
                )
            )
    return ResultTable("Accuracy on flipped orientations", columns, rows)
