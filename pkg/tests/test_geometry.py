from __future__ import annotations

import math

import numpy as np
import pytest

from pcs.dataset import Dataset
from pcs.errors import CapExceededError
from pcs.geometry import (
    Direction,
    distance_sq,
    enumerate_directions,
    sample_directions,
    solve_direction,
)
from pcs.simulate import distant_cluster_sample, gaussian_cloud


def test_solve_unit_points():
    d = solve_direction([[1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(d.a, [1.0, 1.0])


def test_solve_scaled_points():
    d = solve_direction([[2.0, 0.0], [0.0, 2.0]])
    np.testing.assert_allclose(d.a, [0.5, 0.5])


def test_solve_rank_one_is_singular():
    assert solve_direction([[1.0, 0.0], [2.0, 0.0]]) is None


def test_solve_shape_check():
    with pytest.raises(ValueError):
        solve_direction([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


@pytest.mark.parametrize(
    "a, x, expected",
    [((1.0, 1.0), (1.0, 0.0), 0.0), ((1.0, 1.0), (0.0, 0.0), 0.5), ((0.5, 0.5), (0.0, 0.0), 2.0)],
)
def test_distance_sq(a, x, expected):
    assert distance_sq(np.array(a), x) == pytest.approx(expected, abs=1e-15)


def test_enumerate_counts():
    data = Dataset(gaussian_cloud(8, 2))
    dirs = enumerate_directions(data, [0, 1, 2, 3, 4])
    assert len(dirs) == 10
    assert dirs.exhaustive
    assert len(dirs) + dirs.skipped_singular == math.comb(5, 2)


def test_enumerate_fifty_two():
    x, labels = distant_cluster_sample()
    data = Dataset(x)
    subset = np.flatnonzero(~labels)[:52]
    dirs = enumerate_directions(data, subset)
    assert len(dirs) == 1326
    for k in (0, 500, 1325):
        d = dirs[k]
        for i in d.source_rows:
            assert distance_sq(d, data.values[i]) <= 1e-20


def test_enumerate_skips_origin_pair():
    x = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 1.0], [3.0, 4.0], [-1.0, 2.0]])
    dirs = enumerate_directions(Dataset(x))
    assert dirs.skipped_singular == 1
    assert (0, 1) not in {tuple(r) for r in dirs.source_rows.tolist()}


def test_enumerate_cap():
    data = Dataset(gaussian_cloud(30, 2))
    with pytest.raises(CapExceededError):
        enumerate_directions(data, cap=100)


def test_sample_deterministic():
    x, _ = distant_cluster_sample()
    data = Dataset(x)
    subset = list(range(52))
    a = sample_directions(data, subset, 100, seed=7)
    b = sample_directions(data, subset, 100, seed=7)
    assert len(a) == 100
    np.testing.assert_array_equal(a.normals, b.normals)
    np.testing.assert_array_equal(a.source_rows, b.source_rows)
    assert len({tuple(r) for r in a.source_rows.tolist()}) == 100


def test_sample_saturates_to_enumeration():
    data = Dataset(gaussian_cloud(10, 2))
    s = sample_directions(data, range(6), 50, seed=1)
    e = enumerate_directions(data, range(6))
    assert s.exhaustive
    np.testing.assert_array_equal(s.normals, e.normals)


def test_sample_single():
    data = Dataset(gaussian_cloud(10, 2))
    subset = (1, 4, 6, 8, 9)
    s = sample_directions(data, subset, 1, seed=3)
    assert len(s) == 1
    assert set(s[0].source_rows) <= set(subset)


def test_sample_large_subset_uses_rejection_path():
    data = Dataset(gaussian_cloud(1600, 2, seed=2))
    s = sample_directions(data, range(1600), 40, seed=0)
    assert len(s) == 40
    assert len({tuple(r) for r in s.source_rows.tolist()}) == 40
