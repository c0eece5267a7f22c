"""Quaternion algebra on numpy arrays.

Quaternions are stored scalar-first, ``(w, x, y, z)``, in the trailing axis of a float64
array. Every function broadcasts over leading axes, so a single quaternion is an array of
shape ``(4,)`` and a batch of them is ``(..., 4)``. Vectors in R^3 are ``(..., 3)``.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from qcnn_gait._exceptions import QuaternionDomainError

Quaternion = NDArray[np.float64]
Vector3 = NDArray[np.float64]

# Below this magnitude an inverse is treated as undefined.
INVERSE_MIN_NORM = 1e-30

IDENTITY: Quaternion = np.array([1.0, 0.0, 0.0, 0.0])


def as_quaternion(q: ArrayLike) -> Quaternion:
    """Coerce to a float64 array whose trailing axis has length 4."""
    arr = np.asarray(q, dtype=np.float64)
    if arr.shape[-1:] != (4,):
        raise ValueError(f"quaternion arrays need a trailing axis of length 4, got {arr.shape}")
    return arr


def quaternion(w: float, x: float, y: float, z: float) -> Quaternion:
    return np.array([w, x, y, z], dtype=np.float64)


def hamilton_product(p: ArrayLike, q: ArrayLike) -> Quaternion:
    """Hamilton product ``p * q`` (broadcasting over leading axes)."""
    p = as_quaternion(p)
    q = as_quaternion(q)
    pw, px, py, pz = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    qw, qx, qy, qz = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        (
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ),
        axis=-1,
    )


def conjugate(q: ArrayLike) -> Quaternion:
    q = as_quaternion(q)
    out = -q
    out[..., 0] = q[..., 0]
    return out


def squared_norm(q: ArrayLike) -> NDArray[np.float64]:
    q = as_quaternion(q)
    return np.einsum("...i,...i->...", q, q)


def magnitude(q: ArrayLike) -> NDArray[np.float64]:
    return np.sqrt(squared_norm(q))


def inverse(q: ArrayLike) -> Quaternion:
    """Multiplicative inverse ``conj(q) / |q|^2``.

    Raises:
        QuaternionDomainError: If any quaternion has magnitude below ``INVERSE_MIN_NORM``.
    """
    q = as_quaternion(q)
    n2 = squared_norm(q)
    if np.any(np.sqrt(n2) < INVERSE_MIN_NORM):
        raise QuaternionDomainError("cannot invert a zero quaternion")
    return conjugate(q) / n2[..., None]


def conjugation_rotate(r: ArrayLike, q: ArrayLike) -> Quaternion:
    """Return ``r q r^-1``: rotates the vector part of ``q`` and keeps its scalar part."""
    r = as_quaternion(r)
    try:
        r_inv = inverse(r)
    except QuaternionDomainError as exc:
        raise QuaternionDomainError("rotation quaternion must be non-zero") from exc
    return hamilton_product(hamilton_product(r, q), r_inv)


def embed_pure(v: ArrayLike) -> Quaternion:
    """Map vectors ``(..., 3)`` to pure quaternions ``(..., 4)`` with ``w = 0``."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1:] != (3,):
        raise ValueError(f"vector arrays need a trailing axis of length 3, got {v.shape}")
    out = np.zeros((*v.shape[:-1], 4), dtype=np.float64)
    out[..., 1:] = v
    return out


def vector_part(q: ArrayLike) -> Vector3:
    return as_quaternion(q)[..., 1:].copy()


def normalize(q: ArrayLike) -> Quaternion:
    q = as_quaternion(q)
    n = magnitude(q)
    if np.any(n < INVERSE_MIN_NORM):
        raise QuaternionDomainError("cannot normalise a zero quaternion")
    return q / n[..., None]


def random_unit_quaternion(
    rng: np.random.Generator, size: int | tuple[int, ...] | None = None
) -> Quaternion:
    """Sample quaternions uniformly on S^3 (normalised i.i.d. standard normals).

    The induced rotations are Haar-uniform on SO(3).
    """
    shape = (4,) if size is None else (*np.atleast_1d(size), 4)
    while True:
        raw = rng.standard_normal(shape)
        norms = magnitude(raw)
        if np.all(norms > INVERSE_MIN_NORM):
            return raw / norms[..., None]


def from_axis_angle(axis: ArrayLike, angle: float) -> Quaternion:
    """Unit quaternion rotating by ``angle`` radians about ``axis``."""
    axis = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(axis)
    if norm < INVERSE_MIN_NORM:
        raise QuaternionDomainError("rotation axis must be non-zero")
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * axis / norm))


def rotation_angle(r: ArrayLike) -> NDArray[np.float64]:
    """Rotation angle ``2 arccos(w / |r|)`` in ``[0, 2*pi]`` induced by conjugation with ``r``."""
    r = as_quaternion(r)
    cos_half = np.clip(r[..., 0] / magnitude(r), -1.0, 1.0)
    return 2.0 * np.arccos(cos_half)


def rotation_matrix(r: ArrayLike) -> NDArray[np.float64]:
    """3x3 rotation matrix equal to conjugation by ``r`` on vector parts."""
    w, x, y, z = normalize(r)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def left_multiplication_matrix(p: ArrayLike) -> NDArray[np.float64]:
    """4x4 matrix ``L(p)`` with ``L(p) @ q == hamilton_product(p, q)``."""
    w, x, y, z = as_quaternion(p)
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, -z, y],
            [y, z, w, -x],
            [z, -y, x, w],
        ]
    )
