"""Rotation-equivariant quaternion convolution.

For a window ``q_0 .. q_{L-1}`` with pivot ``q_l`` (``l = (L - 1) / 2``) one filter computes

    f = sum_i a_i (q_i + b_i) (q_l + c_i) q_i (d_i + c_i)^-1

where ``a_i, b_i, c_i`` are real. The ``pivot`` rotation form uses ``d_i = q_l``, so every tap
is conjugated by ``q_l + c_i``; the ``literal`` form uses ``d_i = q_i``. Conjugating every input
by a unit quaternion conjugates each factor, so both forms commute with 3-D rotations of the
vector parts. At the pivot tap both factors commute with ``q_l`` and the term is
``a_l (q_l + b_l) q_l``.

Multi-channel layers sum filter outputs over input channels with independent
``(a, b, c)`` per (out, in, tap). Padding positions hold the zero quaternion.

The batched kernel expands ``(p + c) q (conj(d) + c) = Y0 + c Y1 + c^2 q`` so that quaternion
products depend only on the input; each (out, in) pair then costs a few real multiplies
divided by ``|d + c|^2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
from numpy.typing import NDArray

from qcnn_gait._exceptions import ContractViolation
from qcnn_gait.autodiff.primitives import Primitive
from qcnn_gait.autodiff.tape import Variable
from qcnn_gait.quaternion.algebra import conjugate, hamilton_product, inverse

logger = logging.getLogger(__name__)

RotationForm = Literal["pivot", "literal"]

# Rotation factors smaller than this fall back to the identity rotation.
ROTATION_GUARD = 1e-6


@dataclass
class DegeneracyCounter:
    """Running count of rotation factors that hit the singularity guard."""

    count: int = 0


@dataclass
class QConvParams:
    """Real parameter triples of shape (C_out, C_in, L)."""

    a: NDArray[np.float64]
    b: NDArray[np.float64]
    c: NDArray[np.float64]
    stride: int = 1
    padding: int = 0
    rotation_form: RotationForm = "pivot"

    def __post_init__(self) -> None:
        shapes = {self.a.shape, self.b.shape, self.c.shape}
        if len(shapes) != 1 or self.a.ndim != 3:
            raise ContractViolation(f"a, b, c must share one (C_out, C_in, L) shape, got {shapes}")
        if self.taps % 2 == 0:
            raise ContractViolation(f"qconv tap count must be odd, got {self.taps}")
        if self.stride < 1 or self.padding < 0:
            raise ContractViolation("stride must be >= 1 and padding >= 0")

    @classmethod
    def zeros(
        cls,
        out_channels: int,
        in_channels: int,
        taps: int,
        *,
        stride: int = 1,
        padding: int = 0,
        rotation_form: RotationForm = "pivot",
    ) -> QConvParams:
        shape = (out_channels, in_channels, taps)
        return cls(
            np.zeros(shape), np.zeros(shape), np.zeros(shape), stride, padding, rotation_form
        )

    @property
    def out_channels(self) -> int:
        return self.a.shape[0]

    @property
    def in_channels(self) -> int:
        return self.a.shape[1]

    @property
    def taps(self) -> int:
        return self.a.shape[2]

    @property
    def pivot(self) -> int:
        return (self.taps - 1) // 2

    @property
    def parameter_count(self) -> int:
        return 3 * self.taps * self.in_channels * self.out_channels


def output_length(length: int, taps: int, stride: int, padding: int) -> int:
    """``floor((n + 2 * padding - L) / stride) + 1``."""
    if length + 2 * padding < taps:
        raise ContractViolation(
            f"input length {length} with padding {padding} is shorter than {taps} taps"
        )
    return (length + 2 * padding - taps) // stride + 1


def qconv_window(
    window: NDArray[np.float64],
    a: NDArray[np.float64],
    b: NDArray[np.float64],
    c: NDArray[np.float64],
    *,
    rotation_form: RotationForm = "pivot",
    counter: DegeneracyCounter | None = None,
) -> NDArray[np.float64]:
    """Single-filter output for one window of ``L`` quaternions, shape (L, 4) -> (4,)."""
    window = np.asarray(window, dtype=np.float64)
    taps = window.shape[0]
    if taps % 2 == 0 or window.shape != (taps, 4):
        raise ContractViolation(f"window must be (L, 4) with odd L, got {window.shape}")
    centre = (taps - 1) // 2
    pivot = window[centre]
    out = np.zeros(4)
    for i in range(taps):
        q = window[i]
        left = pivot.copy()
        left[0] += c[i]
        right = (pivot if rotation_form == "pivot" else q).copy()
        right[0] += c[i]
        shifted = q.copy()
        shifted[0] += b[i]
        degenerate = min(np.sqrt(left @ left), np.sqrt(right @ right)) < ROTATION_GUARD
        if degenerate and counter is not None:
            counter.count += 1
        if degenerate or i == centre:
            rotated = q
        else:
            rotated = hamilton_product(hamilton_product(left, q), inverse(right))
        out += a[i] * hamilton_product(shifted, rotated)
    return out


def _pad(x: NDArray[np.float64], padding: int) -> NDArray[np.float64]:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (0, 0)))


@dataclass
class _TapTerms:
    """Input-only pieces of one tap, laid out (B, n, C_in, ...)."""

    q: NDArray[np.float64]
    p: NDArray[np.float64]
    features: NDArray[np.float64]  # (B, n, C_in, 6, 4): q*Y0, q*Y1, q*q, Y0, Y1, q
    d_real: NDArray[np.float64]
    d_vec2: NDArray[np.float64]
    p_real: NDArray[np.float64]
    p_vec2: NDArray[np.float64]


def _tap_slice(tap: int, stride: int, n_out: int) -> slice:
    return slice(tap, tap + stride * (n_out - 1) + 1, stride)


def _tap_terms(
    xp: NDArray[np.float64], tap_slice: slice, pivot_slice: slice, form: RotationForm
) -> _TapTerms:
    q = xp[:, :, tap_slice].transpose(0, 2, 1, 3)
    p = xp[:, :, pivot_slice].transpose(0, 2, 1, 3)
    if form == "pivot":
        y0 = hamilton_product(hamilton_product(p, q), conjugate(p))
        y1 = hamilton_product(q, conjugate(p)) + hamilton_product(p, q)
        d = p
    else:
        q_norm2 = np.einsum("...k,...k->...", q, q)
        y0 = q_norm2[..., None] * p
        y1 = hamilton_product(p, q)
        y1[..., 0] += q_norm2
        d = q
    ys = np.stack((y0, y1, q), axis=-2)
    xs = hamilton_product(q[..., None, :], ys)
    return _TapTerms(
        q=q,
        p=p,
        features=np.concatenate((xs, ys), axis=-2),
        d_real=d[..., 0],
        d_vec2=np.einsum("...k,...k->...", d[..., 1:], d[..., 1:]),
        p_real=p[..., 0],
        p_vec2=np.einsum("...k,...k->...", p[..., 1:], p[..., 1:]),
    )


@dataclass
class _TapWeights:
    """Per (B, n, C_out, C_in) coefficients of the six feature rows."""

    weights: NDArray[np.float64]  # (B, n, C_out, C_in, 6)
    powers: NDArray[np.float64]  # (B, n, C_out, C_in, 3): 1, c, c^2 over |d + c|^2
    inv_denom: NDArray[np.float64]
    shift: NDArray[np.float64]
    degenerate: NDArray[np.bool_]


def _tap_weights(
    terms: _TapTerms,
    a: NDArray[np.float64],
    b: NDArray[np.float64],
    c: NDArray[np.float64],
    identity_tap: bool,
) -> _TapWeights:
    shift = terms.d_real[:, :, None, :] + c
    denom = shift * shift + terms.d_vec2[:, :, None, :]
    left_shift = terms.p_real[:, :, None, :] + c
    left_norm2 = left_shift * left_shift + terms.p_vec2[:, :, None, :]
    guard2 = ROTATION_GUARD * ROTATION_GUARD
    degenerate = (denom < guard2) | (left_norm2 < guard2)
    identity = degenerate | identity_tap

    inv_denom = np.where(identity, 0.0, 1.0 / np.where(identity, 1.0, denom))
    powers = np.stack(
        (inv_denom, c * inv_denom, np.where(identity, 1.0, c * c * inv_denom)), axis=-1
    )
    weights = a[..., None] * np.concatenate((powers, b[..., None] * powers), axis=-1)
    return _TapWeights(weights, powers, inv_denom, shift, degenerate)


def _contract(weights: NDArray[np.float64], features: NDArray[np.float64]) -> NDArray[np.float64]:
    """sum over (C_in, row) of weights (B, n, O, I, 6) times features (B, n, I, 6, 4)."""
    batch, n_out, c_out = weights.shape[:3]
    flat_w = weights.reshape(batch, n_out, c_out, -1)
    flat_f = features.reshape(batch, n_out, -1, 4)
    return flat_w @ flat_f


def _qconv_forward(
    x: NDArray[np.float64],
    a: NDArray[np.float64],
    b: NDArray[np.float64],
    c: NDArray[np.float64],
    *,
    stride: int,
    padding: int,
    rotation_form: RotationForm,
    counter: DegeneracyCounter | None = None,
) -> tuple[NDArray[np.float64], Any]:
    if x.ndim != 4 or x.shape[-1] != 4:
        raise ContractViolation(f"qconv input must be (B, C_in, n, 4), got {x.shape}")
    c_out, c_in, taps = a.shape
    if x.shape[1] != c_in:
        raise ContractViolation(f"qconv expects {c_in} input channels, got {x.shape[1]}")
    n_out = output_length(x.shape[2], taps, stride, padding)
    xp = _pad(x, padding)
    pivot = (taps - 1) // 2
    pivot_slice = _tap_slice(pivot, stride, n_out)

    out = np.zeros((x.shape[0], n_out, c_out, 4))
    degenerate_total = 0
    for i in range(taps):
        terms = _tap_terms(xp, _tap_slice(i, stride, n_out), pivot_slice, rotation_form)
        tap = _tap_weights(terms, a[:, :, i], b[:, :, i], c[:, :, i], i == pivot)
        degenerate_total += int(tap.degenerate.sum())
        out += _contract(tap.weights, terms.features)

    if degenerate_total:
        logger.debug("qconv rotation guard hit %d times", degenerate_total)
        if counter is not None:
            counter.count += degenerate_total
    saved = (x, a, b, c, stride, padding, rotation_form)
    return np.ascontiguousarray(out.transpose(0, 2, 1, 3)), saved


def _qconv_backward(grad: NDArray[np.float64], saved: Any) -> tuple[NDArray[np.float64], ...]:
    x, a, b, c, stride, padding, rotation_form = saved
    batch = x.shape[0]
    c_out, c_in, taps = a.shape
    n_out = grad.shape[2]
    xp = _pad(x, padding)
    pivot = (taps - 1) // 2
    pivot_slice = _tap_slice(pivot, stride, n_out)

    grad_xp = np.zeros_like(xp)
    grad_a = np.zeros_like(a)
    grad_b = np.zeros_like(b)
    grad_c = np.zeros_like(c)
    g = np.ascontiguousarray(grad.transpose(0, 2, 1, 3))

    for i in range(taps):
        tap_slice = _tap_slice(i, stride, n_out)
        terms = _tap_terms(xp, tap_slice, pivot_slice, rotation_form)
        a_i, b_i, c_i = a[:, :, i], b[:, :, i], c[:, :, i]
        tap = _tap_weights(terms, a_i, b_i, c_i, i == pivot)

        # <g, feature row> for every (out, in) pair
        flat_f = terms.features.reshape(batch, n_out, -1, 4)
        inner = (g @ flat_f.swapaxes(-1, -2)).reshape(batch, n_out, c_out, c_in, 6)
        per_power = inner[..., :3] + b_i[..., None] * inner[..., 3:]
        grad_a[:, :, i] = np.einsum("bnoip,bnoip->oi", tap.powers, per_power)
        grad_b[:, :, i] = a_i * np.einsum("bnoip,bnoip->oi", tap.powers, inner[..., 3:])

        # <g, numerator>; the denominator is |d + c|^2 = shift^2 + |vec d|^2
        numerator = per_power[..., 0] + c_i * per_power[..., 1] + c_i * c_i * per_power[..., 2]
        inv2 = tap.inv_denom * tap.inv_denom
        grad_c[:, :, i] = np.einsum(
            "bnoi->oi",
            a_i
            * (
                (per_power[..., 1] + 2.0 * c_i * per_power[..., 2]) * tap.inv_denom
                - 2.0 * numerator * tap.shift * inv2
            ),
        )
        grad_denom = -a_i * numerator * inv2

        flat_w = tap.weights.reshape(batch, n_out, c_out, -1)
        grad_f = (flat_w.swapaxes(-1, -2) @ g).reshape(batch, n_out, c_in, 6, 4)
        grad_xs, grad_ys = grad_f[..., :3, :], grad_f[..., 3:, :].copy()
        q, p = terms.q, terms.p
        ys = terms.features[..., 3:, :]
        # xs = q * ys
        grad_q = np.sum(hamilton_product(grad_xs, conjugate(ys)), axis=-2)
        grad_ys += hamilton_product(conjugate(q)[..., None, :], grad_xs)
        grad_q += grad_ys[..., 2, :]
        grad_y0, grad_y1 = grad_ys[..., 0, :], grad_ys[..., 1, :]

        if rotation_form == "pivot":
            # y0 = (p q) conj(p), y1 = q conj(p) + p q
            pq = hamilton_product(p, q)
            grad_pq = hamilton_product(grad_y0, p)
            grad_p = conjugate(hamilton_product(conjugate(pq), grad_y0))
            grad_p += hamilton_product(grad_pq, conjugate(q))
            grad_q += hamilton_product(conjugate(p), grad_pq)
            grad_q += hamilton_product(grad_y1, p)
            grad_p += conjugate(hamilton_product(conjugate(q), grad_y1))
            grad_p += hamilton_product(grad_y1, conjugate(q))
            grad_q += hamilton_product(conjugate(p), grad_y1)
            grad_d = grad_p
        else:
            # y0 = |q|^2 p, y1 = p q + |q|^2
            q_norm2 = np.einsum("...k,...k->...", q, q)
            grad_p = q_norm2[..., None] * grad_y0
            grad_q += 2.0 * np.einsum("...k,...k->...", grad_y0, p)[..., None] * q
            grad_p += hamilton_product(grad_y1, conjugate(q))
            grad_q += hamilton_product(conjugate(p), grad_y1)
            grad_q += 2.0 * grad_y1[..., :1] * q
            grad_d = grad_q

        d = p if rotation_form == "pivot" else q
        grad_d[..., 0] += np.sum(grad_denom * 2.0 * tap.shift, axis=2)
        grad_d[..., 1:] += 2.0 * np.sum(grad_denom, axis=2)[..., None] * d[..., 1:]

        grad_xp[:, :, tap_slice] += grad_q.transpose(0, 2, 1, 3)
        grad_xp[:, :, pivot_slice] += grad_p.transpose(0, 2, 1, 3)

    n = x.shape[2]
    grad_x = grad_xp[:, :, padding : padding + n]
    return grad_x, grad_a, grad_b, grad_c


QCONV = Primitive("qconv", _qconv_forward, _qconv_backward)


def qconv(
    x: Variable,
    a: Variable,
    b: Variable,
    c: Variable,
    *,
    stride: int = 1,
    padding: int = 0,
    rotation_form: RotationForm = "pivot",
    counter: DegeneracyCounter | None = None,
) -> Variable:
    """Record a quaternion convolution on ``x`` of shape (B, C_in, n, 4)."""
    return x.tape.record(
        QCONV,
        x,
        a,
        b,
        c,
        stride=stride,
        padding=padding,
        rotation_form=rotation_form,
        counter=counter,
    )


def qconv_forward(x: NDArray[np.float64], params: QConvParams) -> NDArray[np.float64]:
    """Evaluate a quaternion convolution without recording gradients.

    Accepts (C_in, n, 4) or (B, C_in, n, 4) inputs.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 3
    batch = x[None] if single else x
    out, _ = _qconv_forward(
        batch,
        params.a,
        params.b,
        params.c,
        stride=params.stride,
        padding=params.padding,
        rotation_form=params.rotation_form,
    )
    return out[0] if single else out
