from __future__ import annotations

import numpy as np
import pytest

from qcnn_gait._exceptions import ConfigurationError, TrainingDivergedError
from qcnn_gait.api.settings import TrainConfig
from qcnn_gait.data.cycles import GaitDataset, randomly_rotate_dataset
from qcnn_gait.data.synthetic import generate_synthetic_dataset
from qcnn_gait.layers.network import DenseSpec, ModelSpec, build_network
from qcnn_gait.training.trainer import build_model, evaluate, seed_streams, train

DENSE_ONLY = ModelSpec(name="dense", num_classes=2, layers=[DenseSpec(units=2)])


def _separable(cycles_per_class: int = 35, seed: int = 0) -> GaitDataset:
    rng = np.random.default_rng(seed)
    samples = rng.normal(0.0, 0.1, size=(2 * cycles_per_class, 100, 3))
    samples[:cycles_per_class] += 0.5
    samples[cycles_per_class:] -= 0.5
    labels = np.repeat([0, 1], cycles_per_class)
    return GaitDataset(samples, labels, 2)


def test_seed_streams_are_independent_and_reproducible() -> None:
    first, second = seed_streams(3), seed_streams(3)

    draws = {name: rng.integers(0, 2**32, size=4) for name, rng in first.items()}

    assert set(first) == {"init", "split", "shuffle", "augment"}
    for name, rng in second.items():
        np.testing.assert_array_equal(rng.integers(0, 2**32, size=4), draws[name])
    assert not np.array_equal(draws["init"], draws["shuffle"])


def test_zero_learning_rate_keeps_parameters_and_loss() -> None:
    config = TrainConfig(epochs=3, batch_size=16, learning_rate=0.0, model=DENSE_ONLY)
    model = build_model(config, 2)
    before = model.get_flat_parameters()

    result = train(model, _separable(), config)

    np.testing.assert_array_equal(model.get_flat_parameters(), before)
    losses = [row.train_loss for row in result.history]
    assert losses == pytest.approx([losses[0]] * 3, rel=1e-12)


def test_same_seed_gives_identical_history() -> None:
    config = TrainConfig(epochs=2, batch_size=8, learning_rate=0.01, model=DENSE_ONLY, seed=5)
    dataset = _separable(12)

    first = train(build_model(config, 2), dataset, config)
    second = train(build_model(config, 2), dataset, config)

    assert first.history == second.history
    np.testing.assert_array_equal(first.checkpoint.parameters, second.checkpoint.parameters)


def test_separable_toy_problem_is_learned() -> None:
    config = TrainConfig(epochs=50, batch_size=16, learning_rate=0.01, model=DENSE_ONLY)
    dataset = _separable()
    model = build_model(config, 2)

    result = train(model, dataset, config)

    assert max(row.val_top1 for row in result.history) >= 0.99
    assert evaluate(model, dataset).top1 >= 0.99


def test_model_keeps_the_best_validation_epoch() -> None:
    config = TrainConfig(epochs=4, batch_size=8, learning_rate=0.05, model=DENSE_ONLY, seed=2)
    model = build_model(config, 2)

    result = train(model, _separable(10, seed=3), config)

    best = max(row.val_top1 for row in result.history)
    assert result.history[result.best_epoch - 1].val_top1 == best
    assert all(row.val_top1 < best for row in result.history[: result.best_epoch - 1])
    np.testing.assert_array_equal(model.get_flat_parameters(), result.checkpoint.parameters)
    assert result.checkpoint.metadata["epoch"] == result.best_epoch
    assert len(result.checkpoint.metadata["metrics"]) == 4


def test_non_finite_loss_aborts_with_location() -> None:
    config = TrainConfig(epochs=2, batch_size=4, model=DENSE_ONLY)
    model = build_model(config, 2)
    model.set_flat_parameters(np.ones(model.parameter_count))
    dataset = GaitDataset(np.full((8, 100, 3), 1e308), np.array([0, 1] * 4), 2)

    with pytest.raises(TrainingDivergedError, match="epoch 1, step 1") as excinfo:
        with np.errstate(over="ignore", invalid="ignore"):
            train(model, dataset, config)
    assert (excinfo.value.epoch, excinfo.value.step) == (1, 1)


def test_class_count_mismatch_is_a_configuration_error() -> None:
    config = TrainConfig(model=DENSE_ONLY)
    model = build_model(config, 2)
    dataset = generate_synthetic_dataset(3, 2, 0.0, 0)

    with pytest.raises(ConfigurationError):
        train(model, dataset, config)
    with pytest.raises(ConfigurationError):
        evaluate(model, dataset)


def test_inline_spec_must_match_dataset() -> None:
    with pytest.raises(ConfigurationError, match="classes"):
        TrainConfig(model=DENSE_ONLY).model_spec(3)


def test_rotation_augmentation_trains_a_quaternion_model() -> None:
    config = TrainConfig(epochs=1, batch_size=8, model="small-qcnn", augmentation="rotate")
    dataset = generate_synthetic_dataset(3, 6, 0.05, 4, length=16)
    model = build_model(config, 3, input_length=16)

    result = train(model, dataset, config)

    assert len(result.history) == 1
    assert np.isfinite(result.history[0].train_loss)
    assert result.checkpoint.spec.name == "small-qcnn"


@pytest.mark.slow
def test_quaternion_model_is_invariant_after_training() -> None:
    config = TrainConfig(epochs=2, batch_size=16, model="qcnn", seed=1)
    dataset = generate_synthetic_dataset(4, 14, 0.05, 6)
    model = build_model(config, 4)
    train(model, dataset, config)

    logits = model.logits(dataset.samples)
    rotated = model.logits(randomly_rotate_dataset(dataset, np.random.default_rng(0)).samples)

    assert np.max(np.abs(rotated - logits)) <= 1e-6 * np.max(np.abs(logits))


def test_build_network_uses_the_init_stream() -> None:
    config = TrainConfig(seed=9)
    spec = config.model_spec(4)

    direct = build_network(spec, seed_streams(9)["init"])

    np.testing.assert_array_equal(
        build_model(config, 4).get_flat_parameters(), direct.get_flat_parameters()
    )
