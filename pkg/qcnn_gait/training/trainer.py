"""Training loop with best-validation selection, and evaluation."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from time import perf_counter

import numpy as np

from qcnn_gait._exceptions import ConfigurationError, TrainingDivergedError
from qcnn_gait.api.settings import TrainConfig
from qcnn_gait.autodiff.tape import Tape
from qcnn_gait.data.cycles import GaitDataset, rotate_samples, split_train_val
from qcnn_gait.layers.network import Model, build_network
from qcnn_gait.quaternion.algebra import random_unit_quaternion
from qcnn_gait.training.checkpoint import Checkpoint, checkpoint_from_model
from qcnn_gait.training.metrics import EpochMetrics, EvalReport, report_from_logits
from qcnn_gait.training.optim import Adam, clip_by_global_norm

logger = logging.getLogger(__name__)

STREAMS = ("init", "split", "shuffle", "augment")


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators for initialisation, splitting, batch order and augmentation."""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {
        name: np.random.default_rng(child) for name, child in zip(STREAMS, children, strict=True)
    }


def build_model(config: TrainConfig, num_classes: int, input_length: int = 100) -> Model:
    spec = config.model_spec(num_classes, input_length)
    return build_network(spec, seed_streams(config.seed)["init"])


@dataclass(frozen=True)
class TrainingResult:
    checkpoint: Checkpoint
    history: list[EpochMetrics]
    best_epoch: int


def evaluate(model: Model, dataset: GaitDataset) -> EvalReport:
    """Eval-mode top-1/top-5 with ties broken towards the lower class index."""
    if dataset.num_classes != model.num_classes:
        raise ConfigurationError(
            f"model predicts {model.num_classes} classes but the dataset has "
            f"{dataset.num_classes}"
        )
    if len(dataset) and dataset.length != model.spec.input_length:
        raise ConfigurationError(
            f"model expects cycles of length {model.spec.input_length}, "
            f"dataset has {dataset.length}"
        )
    logits = model.logits(dataset.samples)
    return report_from_logits(logits, dataset.labels, model.num_classes)


def train(
    model: Model,
    dataset: GaitDataset,
    config: TrainConfig,
    *,
    val_dataset: GaitDataset | None = None,
) -> TrainingResult:
    """Minimise cross-entropy with Adam and keep the parameters with the best val top-1.

    Without ``val_dataset`` the dataset is shuffled with the config seed and split
    ``1 - val_fraction : val_fraction``. On return ``model`` holds the selected parameters.

    Raises:
        TrainingDivergedError: If a batch loss is not finite.
    """
    if dataset.num_classes != model.num_classes:
        raise ConfigurationError(
            f"model predicts {model.num_classes} classes but the dataset has "
            f"{dataset.num_classes}"
        )
    streams = seed_streams(config.seed)
    if val_dataset is None:
        train_set, val_set = split_train_val(dataset, config.val_fraction, streams["split"])
    else:
        train_set, val_set = dataset, val_dataset
    if len(train_set) == 0:
        raise ConfigurationError("training split is empty")

    optimizer = Adam(config.learning_rate, config.beta1, config.beta2, config.adam_epsilon)
    params = model.get_flat_parameters()
    best_top1 = -1.0
    best_epoch = 0
    best_params = params.copy()
    best_mu = model.get_batchnorm_mu()
    history: list[EpochMetrics] = []

    logger.info(
        "Training %s (%d parameters) on %d cycles, validating on %d",
        model.spec.name,
        model.parameter_count,
        len(train_set),
        len(val_set),
    )
    start = perf_counter()
    for epoch in range(1, config.epochs + 1):
        order = streams["shuffle"].permutation(len(train_set))
        loss_sum = 0.0
        clip_events = 0
        for step, begin in enumerate(range(0, len(order), config.batch_size), start=1):
            index = order[begin : begin + config.batch_size]
            cycles = train_set.samples[index]
            if config.augmentation == "rotate":
                cycles = rotate_samples(
                    cycles, random_unit_quaternion(streams["augment"], size=len(index))
                )

            tape = Tape()
            loss, param_vars = model.loss(tape, cycles, train_set.labels[index], training=True)
            loss_value = float(loss.value)
            if not np.isfinite(loss_value):
                logger.error(
                    "Non-finite loss %r at epoch %d step %d; aborting", loss_value, epoch, step
                )
                raise TrainingDivergedError(
                    f"loss became {loss_value!r} at epoch {epoch}, step {step}",
                    epoch=epoch,
                    step=step,
                )
            grads = tape.backward(loss)
            flat_grad = np.concatenate([grads[v].ravel() for v in param_vars])
            flat_grad, norm, clipped = clip_by_global_norm(flat_grad, config.clip_norm)
            if clipped:
                clip_events += 1
                logger.debug("Clipped gradient norm %.4g at epoch %d step %d", norm, epoch, step)

            params = optimizer.step(params, flat_grad)
            model.set_flat_parameters(params)
            loss_sum += loss_value * len(index)

        report = evaluate(model, val_set)
        metrics = EpochMetrics(
            epoch=epoch,
            train_loss=loss_sum / len(train_set),
            val_top1=report.top1,
            val_top5=report.top5,
            clip_events=clip_events,
            degenerate_rotations=model.degeneracy_count,
        )
        history.append(metrics)
        logger.info(
            "epoch %d: loss %.4f val top1 %.4f top5 %.4f clip events %d",
            epoch,
            metrics.train_loss,
            metrics.val_top1,
            metrics.val_top5,
            clip_events,
        )
        if report.top1 > best_top1:
            best_top1 = report.top1
            best_epoch = epoch
            best_params = params.copy()
            best_mu = model.get_batchnorm_mu()

    model.set_flat_parameters(best_params)
    model.set_batchnorm_mu(best_mu)
    logger.info(
        "Finished %d epochs in %.2fs; best val top1 %.4f at epoch %d",
        config.epochs,
        perf_counter() - start,
        best_top1,
        best_epoch,
    )
    metadata = {
        "seed": config.seed,
        "epoch": best_epoch,
        "val_top1": best_top1,
        "metrics": [asdict(row) for row in history],
    }
    return TrainingResult(checkpoint_from_model(model, metadata), history, best_epoch)
