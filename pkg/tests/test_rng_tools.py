import numpy as np
import pytest

from utils.rng_tools import chunk_ranges, trial_rng


def test_same_trial_index_reproduces_stream():
    first = trial_rng(42, 7).random(5)
    again = trial_rng(42, 7).random(5)
    np.testing.assert_array_equal(first, again)


def test_streams_differ_across_trials_and_seeds():
    base = trial_rng(42, 0).random(5)
    assert not np.array_equal(base, trial_rng(42, 1).random(5))
    assert not np.array_equal(base, trial_rng(43, 0).random(5))


def test_chunk_ranges_cover_total_in_order():
    assert chunk_ranges(10, 4) == [(0, 4), (4, 8), (8, 10)]
    assert chunk_ranges(3, 10) == [(0, 3)]
    assert chunk_ranges(0, 5) == []


def test_chunk_ranges_rejects_bad_size():
    with pytest.raises(ValueError):
        chunk_ranges(10, 0)
