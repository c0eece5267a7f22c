from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.transform import Rotation
from scipy.stats import kstest

from qcnn_gait._exceptions import QuaternionDomainError
from qcnn_gait.quaternion.algebra import (
    IDENTITY,
    conjugate,
    conjugation_rotate,
    embed_pure,
    from_axis_angle,
    hamilton_product,
    inverse,
    left_multiplication_matrix,
    magnitude,
    random_unit_quaternion,
    rotation_matrix,
    vector_part,
)


def _scipy_rotation(r: np.ndarray) -> Rotation:
    # scipy stores quaternions scalar-last
    return Rotation.from_quat(np.roll(r, -1))


def _relative(actual: np.ndarray, expected: np.ndarray) -> float:
    return float(np.max(np.abs(actual - expected)) / max(np.max(np.abs(expected)), 1e-300))


def test_hamilton_product_basis_relations() -> None:
    i = np.array([0.0, 1.0, 0.0, 0.0])
    j = np.array([0.0, 0.0, 1.0, 0.0])

    np.testing.assert_array_equal(hamilton_product(i, j), [0.0, 0.0, 0.0, 1.0])
    q = np.array([0.3, -1.2, 2.0, 0.7])
    np.testing.assert_array_equal(hamilton_product(IDENTITY, q), q)


def test_hamilton_product_matches_left_multiplication_matrix() -> None:
    p = np.array([0.5, 1.0, -2.0, 0.25])
    q = np.array([-1.0, 0.5, 0.5, 3.0])

    expected = left_multiplication_matrix(p) @ q

    np.testing.assert_allclose(hamilton_product(p, q), expected, rtol=0, atol=1e-15)


def test_conjugate_examples() -> None:
    np.testing.assert_array_equal(conjugate([1.0, 2.0, 3.0, 4.0]), [1.0, -2.0, -3.0, -4.0])
    pure = np.array([0.0, 1.5, -2.0, 0.5])
    np.testing.assert_array_equal(conjugate(pure), -pure)

    q = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(hamilton_product(q, conjugate(q)), [30.0, 0.0, 0.0, 0.0])


def test_inverse_examples_and_zero_rejection() -> None:
    unit = from_axis_angle([1.0, 2.0, -0.5], 0.9)
    np.testing.assert_allclose(inverse(unit), conjugate(unit), atol=1e-15)
    np.testing.assert_array_equal(inverse([2.0, 0.0, 0.0, 0.0]), [0.5, 0.0, 0.0, 0.0])

    with pytest.raises(QuaternionDomainError):
        inverse([0.0, 0.0, 0.0, 0.0])


def test_conjugation_rotate_quarter_turn_about_z() -> None:
    half = np.pi / 4
    r = np.array([np.cos(half), 0.0, 0.0, np.sin(half)])
    q = embed_pure([1.0, 0.0, 0.0])

    rotated = conjugation_rotate(r, q)

    np.testing.assert_allclose(rotated, [0.0, 0.0, 1.0, 0.0], atol=1e-15)
    expected = _scipy_rotation(r).apply([1.0, 0.0, 0.0])
    np.testing.assert_allclose(vector_part(rotated), expected, atol=1e-15)


def test_conjugation_rotate_identity_and_zero_rotation() -> None:
    q = np.array([0.2, 1.0, -3.0, 4.0])
    np.testing.assert_allclose(conjugation_rotate(IDENTITY, q), q, atol=0)

    with pytest.raises(QuaternionDomainError):
        conjugation_rotate(np.zeros(4), q)


def test_conjugation_rotate_matches_rotation_matrix_oracle() -> None:
    rng = np.random.default_rng(11)
    r = rng.normal(size=(1000, 4))
    v = rng.normal(size=(1000, 3))

    rotated = vector_part(conjugation_rotate(r, embed_pure(v)))
    expected = Rotation.from_quat(np.roll(r, -1, axis=1)).apply(v)

    assert np.max(np.abs(rotated - expected)) < 1e-10
    for k in range(5):
        np.testing.assert_allclose(rotation_matrix(r[k]) @ v[k], expected[k], atol=1e-12)


def test_conjugation_rotate_ignores_rotation_scale() -> None:
    rng = np.random.default_rng(3)
    r = rng.normal(size=4)
    q = rng.normal(size=4)

    scaled = conjugation_rotate(7.5 * r, q)
    unit = conjugation_rotate(r / magnitude(r), q)

    assert _relative(scaled, unit) <= 1e-12


def test_embed_pure_and_vector_part() -> None:
    np.testing.assert_array_equal(embed_pure([1.0, 2.0, 3.0]), [0.0, 1.0, 2.0, 3.0])
    np.testing.assert_array_equal(vector_part([7.0, 1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    v = np.random.default_rng(0).normal(size=(5, 3))
    np.testing.assert_array_equal(vector_part(embed_pure(v)), v)


def test_algebraic_identities_hold_for_random_triples() -> None:
    rng = np.random.default_rng(2024)
    p, q, s, r = rng.normal(size=(4, 200, 4))

    left = hamilton_product(hamilton_product(p, q), s)
    right = hamilton_product(p, hamilton_product(q, s))
    assert _relative(left, right) <= 1e-12

    np.testing.assert_allclose(
        magnitude(hamilton_product(p, q)), magnitude(p) * magnitude(q), rtol=1e-12
    )

    whole = conjugation_rotate(r, hamilton_product(p, q))
    parts = hamilton_product(conjugation_rotate(r, p), conjugation_rotate(r, q))
    assert _relative(whole, parts) <= 1e-12


def test_random_unit_quaternion_is_unit_and_centred() -> None:
    rng = np.random.default_rng(5)
    samples = random_unit_quaternion(rng, 100_000)

    assert samples.shape == (100_000, 4)
    np.testing.assert_allclose(magnitude(samples), 1.0, atol=1e-12)
    assert np.all(np.abs(samples.mean(axis=0)) < 0.02)

    single = random_unit_quaternion(rng)
    assert single.shape == (4,)


def test_random_rotations_spread_a_vector_uniformly_in_z() -> None:
    rng = np.random.default_rng(9)
    r = random_unit_quaternion(rng, 100_000)

    z = vector_part(conjugation_rotate(r, embed_pure([1.0, 0.0, 0.0])))[:, 2]

    assert kstest(z, "uniform", args=(-1.0, 2.0)).statistic < 0.02


def test_random_unit_quaternion_is_reproducible() -> None:
    a = random_unit_quaternion(np.random.default_rng(42), 8)
    b = random_unit_quaternion(np.random.default_rng(42), 8)

    np.testing.assert_array_equal(a, b)
