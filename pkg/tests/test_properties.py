"""Invariants checked on randomly generated data."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from pcs.dataset import Dataset, breakdown_bound, default_h
from pcs.geometry import distances_sq, enumerate_directions, sample_directions
from pcs.incongruence import h_neighborhood, incongruence_along, incongruence_index
from pcs.solver import estimate

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def problems(draw, max_n=14):
    p = draw(st.integers(2, 3))
    n = draw(st.integers(p + 3, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p)) * rng.uniform(0.1, 10.0) + rng.uniform(-5.0, 5.0, p)
    h = draw(st.integers(p + 1, n))
    size = draw(st.integers(p + 1, n))
    subset = tuple(sorted(rng.choice(n, size, replace=False).tolist()))
    return Dataset(x), h, subset, rng


@given(st.integers(4, 10**6), st.integers(2, 50))
def test_breakdown_bound_formula(n, p):
    if n <= p + 1:
        return
    h = default_h(n, p).h
    assert h == math.ceil((n + p + 1) / 2)
    bound = breakdown_bound(n, h)
    assert bound.exact == Fraction(n - h + 1, n)
    assert 0 < bound.exact <= Fraction(1, 2)


@SETTINGS
@given(problems())
def test_incongruence_nonnegative(problem):
    data, h, subset, rng = problem
    dirs = enumerate_directions(data, subset)
    report = incongruence_index(data, subset, dirs, h)
    assert np.all(report.values >= 0.0)
    assert report.aggregate >= 0.0


@SETTINGS
@given(problems())
def test_neighborhood_at_least_h(problem):
    data, h, _, _ = problem
    dirs = enumerate_directions(data, None)
    for k in range(min(len(dirs), 5)):
        rows = h_neighborhood(data, dirs[k], h)
        assert len(rows) >= h
        if len(rows) == h:
            assert incongruence_along(data, rows, dirs[k], h) == 0.0


@SETTINGS
@given(problems())
def test_spanning_points_on_hyperplane(problem):
    data, _, subset, _ = problem
    dirs = enumerate_directions(data, subset)
    d2 = distances_sq(dirs.normals, data.values)
    for k in range(len(dirs)):
        assert np.all(d2[k, dirs.source_rows[k]] <= 1e-8 * (1 + np.sum(data.values[dirs.source_rows[k]] ** 2, axis=1)))


@SETTINGS
@given(problems())
def test_scatter_psd_and_eigenvalue_bound(problem):
    data, _, subset, _ = problem
    t, s = estimate(data, subset)
    w = np.linalg.eigvalsh(s)
    np.testing.assert_array_equal(s, s.T)
    assert w[0] >= -1e-12 * max(w[-1], 1.0)
    assert w[-1] <= np.max(np.sum(data.values[list(subset)] ** 2, axis=1)) * (1 + 1e-12)
    assert np.linalg.norm(t) <= np.max(np.linalg.norm(data.values[list(subset)], axis=1)) * (1 + 1e-12)


@SETTINGS
@given(problems(max_n=10), st.integers(0, 2**32 - 1))
def test_index_affine_invariant(problem, seed):
    data, h, subset, _ = problem
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((data.p, data.p))
    if np.linalg.cond(B) > 1e3:
        return
    b = rng.standard_normal(data.p) * 3
    moved = data.transformed(B, b)
    r1 = incongruence_index(data, subset, enumerate_directions(data, subset), h)
    r2 = incongruence_index(moved, subset, enumerate_directions(moved, subset), h)
    s1 = {tuple(r): v for r, v in zip(r1.directions.source_rows.tolist(), r1.values)}
    s2 = {tuple(r): v for r, v in zip(r2.directions.source_rows.tolist(), r2.values)}
    for key in s1.keys() & s2.keys():
        if math.isfinite(s1[key]):
            assert abs(s1[key] - s2[key]) <= 1e-6 * (1 + abs(s1[key]))


@SETTINGS
@given(problems(), st.integers(0, 2**32 - 1), st.integers(1, 30))
def test_sampling_reproducible_and_distinct(problem, seed, k):
    data, _, subset, _ = problem
    a = sample_directions(data, subset, k, seed=seed)
    b = sample_directions(data, subset, k, seed=seed)
    np.testing.assert_array_equal(a.source_rows, b.source_rows)
    rows = {tuple(r) for r in a.source_rows.tolist()}
    assert len(rows) == len(a)
    assert all(set(r) <= set(subset) for r in rows)
