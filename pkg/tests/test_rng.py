import numpy as np
import pytest

from ocpkit.rng import as_generator, substream


def test_same_keys_same_stream():
    a = substream(7, "traj", 50, 3).random(5)
    b = substream(7, "traj", 50, 3).random(5)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("other", [(8, "traj", 50, 3), (7, "pairs", 50, 3), (7, "traj", 51, 3), (7, "traj", 50, 4)])
def test_any_key_change_gives_a_new_stream(other):
    a = substream(7, "traj", 50, 3).random(5)
    assert not np.array_equal(a, substream(*other).random(5))


def test_negative_keys_rejected():
    with pytest.raises(ValueError):
        substream(-1)


def test_as_generator():
    g = np.random.default_rng(0)
    assert as_generator(g) is g
    np.testing.assert_array_equal(as_generator(3).random(3), substream(3).random(3))
    with pytest.raises(ValueError):
        as_generator(None)
