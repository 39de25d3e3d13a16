import numpy as np
import pytest

from pathhodge import rng
from pathhodge.simulate import TimeGrid, sample_driving_path, sample_driving_paths


def test_same_key_same_stream():
    a = rng.generator(7, 3).standard_normal(10)
    b = rng.generator(7, 3).standard_normal(10)
    assert np.array_equal(a, b)


def test_tags_and_indices_give_distinct_streams():
    base = rng.generator(7, 3, rng.DRIVING).standard_normal(10)
    assert not np.array_equal(base, rng.generator(7, 4, rng.DRIVING).standard_normal(10))
    assert not np.array_equal(base, rng.generator(7, 3, rng.RESAMPLE).standard_normal(10))
    assert not np.array_equal(base, rng.generator(8, 3, rng.DRIVING).standard_normal(10))


def test_stream_index_range():
    with pytest.raises(ValueError):
        rng.stream_key(1, -1)
    with pytest.raises(ValueError):
        rng.stream_key(1, 1 << 48)


def test_batch_layout_does_not_change_draws():
    grid = TimeGrid(1.0, 50)
    batch = sample_driving_paths(3, grid, 11, 6, start=2)
    for j in range(6):
        single = sample_driving_path(3, grid, 11, 2 + j)
        assert np.array_equal(batch.increments[j], single.increments)
    assert np.array_equal(batch.indices, np.arange(2, 8))


def test_normals_scale():
    a = rng.normals(5, [0, 1], (4,), scale=3.0)
    b = rng.normals(5, [0, 1], (4,))
    assert np.array_equal(a, 3.0 * b)
