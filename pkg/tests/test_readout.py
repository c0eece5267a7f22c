from __future__ import annotations

import numpy as np
import pytest

from qcnn_gait.autodiff.tape import Tape
from qcnn_gait.layers.readout import readout_magnitude, readout_real, record_readout
from qcnn_gait.quaternion.algebra import conjugation_rotate, random_unit_quaternion


def test_magnitude_of_three_four_five() -> None:
    assert readout_magnitude([0.0, 3.0, 4.0, 0.0]) == pytest.approx(5.0, abs=1e-15)


def test_real_part_readout() -> None:
    assert readout_real([7.0, 1.0, 2.0, 3.0]) == 7.0


@pytest.mark.parametrize("readout", [readout_magnitude, readout_real])
def test_readouts_are_rotation_invariant(readout) -> None:
    rng = np.random.default_rng(0)
    x = rng.normal(size=(5, 3, 12, 4))

    for _ in range(20):
        r = random_unit_quaternion(rng)
        np.testing.assert_allclose(readout(conjugation_rotate(r, x)), readout(x), atol=1e-12)


def test_recorded_readouts_match_array_versions() -> None:
    x = np.random.default_rng(1).normal(size=(2, 3, 4))
    tape = Tape()

    magnitude_out = record_readout(tape.variable(x), "readout-magnitude")
    real_out = record_readout(tape.variable(x), "readout-real")

    np.testing.assert_allclose(magnitude_out.value, readout_magnitude(x), rtol=1e-14)
    np.testing.assert_array_equal(real_out.value, readout_real(x))


def test_unknown_readout_kind_is_rejected() -> None:
    tape = Tape()

    with pytest.raises(ValueError, match="unknown readout"):
        record_readout(tape.variable(np.ones(4)), "readout-phase")
