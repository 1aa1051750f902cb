from __future__ import annotations

import numpy as np
import pytest

import oracle
from pcs.dataset import Dataset
from pcs.errors import CapExceededError, DegenerateError, ValidationError
from pcs.solver import (
    SolverConfig,
    estimate,
    fit,
    robust_distances,
    solve_exact,
    solve_randomized,
)
from pcs.simulate import exact_fit_sample, distant_cluster_sample, gaussian_cloud


def randomized(seed=0, **kw):
    return SolverConfig(mode="randomized", seed=seed, **kw)


def test_estimate_hand_arithmetic(square_plus_center):
    data = Dataset(np.vstack([square_plus_center, [[7.0, -3.0]]]))
    t, s = estimate(data, range(5))
    np.testing.assert_allclose(t, [1.0, 1.0])
    np.testing.assert_allclose(s, np.diag([0.8, 0.8]), atol=1e-15)


def test_estimate_needs_p_plus_one():
    data = Dataset(gaussian_cloud(6, 2))
    with pytest.raises(ValidationError):
        estimate(data, (0, 1))


def test_estimate_collinear_singular():
    x, on_line = exact_fit_sample()
    t, s = estimate(Dataset(x), np.flatnonzero(on_line))
    assert np.linalg.eigvalsh(s)[0] == pytest.approx(0.0, abs=1e-12)


def test_exact_counts():
    f = solve_exact(Dataset(gaussian_cloud(6, 2)), None)
    assert f.h == 5
    assert len(f.h_star) == 5
    assert f.diagnostics["candidates"] == 6
    assert f.diagnostics["directions_per_candidate"] == 10


def test_exact_cluster_plus_outlier(frozen):
    inst = frozen["cluster-plus-one"]
    f = solve_exact(Dataset(np.array(inst["x"])))
    assert f.h_star == (0, 1, 2, 3, 4)
    assert f.index_value == pytest.approx(inst["index_value"], abs=1e-12)


@pytest.mark.parametrize("name", [f"random-{i}" for i in range(0, 20, 3)])
def test_exact_matches_frozen_oracle(frozen, name):
    inst = frozen[name]
    f = solve_exact(Dataset(np.array(inst["x"])), inst["h"])
    assert f.h_star == tuple(inst["h_star"])
    assert f.index_value == pytest.approx(inst["index_value"], abs=1e-12)
    np.testing.assert_allclose(f.location, inst["location"], rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(f.scatter, inst["scatter"], rtol=1e-12, atol=1e-14)


def test_exact_matches_live_oracle():
    x = gaussian_cloud(8, 2, seed=99)
    value, subset = oracle.best_subset(x, 6)
    f = solve_exact(Dataset(x), 6)
    assert f.h_star == subset
    assert f.index_value == pytest.approx(value, abs=1e-12)


def test_exact_fit_twelve_on_line():
    x, on_line = exact_fit_sample()
    f = solve_exact(Dataset(x))
    assert f.exact_fit is not None
    assert f.h_star == tuple(np.flatnonzero(on_line))
    assert f.index_value == 0.0
    assert f.scatter_singular
    with pytest.raises(DegenerateError):
        robust_distances(Dataset(x), f)


def test_exact_cap():
    with pytest.raises(CapExceededError):
        solve_exact(Dataset(gaussian_cloud(30, 2)), None, SolverConfig(subset_cap=1000))


def test_randomized_requires_seed():
    with pytest.raises(ValidationError):
        SolverConfig(mode="randomized")
    with pytest.raises(ValidationError):
        solve_randomized(Dataset(gaussian_cloud(8, 2)), None, SolverConfig())


def test_randomized_deterministic():
    data = Dataset(gaussian_cloud(25, 2, seed=3))
    cfg = randomized(seed=4, n_starts=40, k_directions=60)
    a, b = solve_randomized(data, None, cfg), solve_randomized(data, None, cfg)
    assert a.h_star == b.h_star
    assert a.index_value == b.index_value
    np.testing.assert_array_equal(a.scatter, b.scatter)


def test_randomized_saturates_to_exact():
    data = Dataset(gaussian_cloud(8, 2, seed=5))
    r = solve_randomized(data, None, randomized(n_starts=100, k_directions=10**4))
    e = solve_exact(data)
    assert r.diagnostics["saturated"]
    assert r.h_star == e.h_star
    assert abs(r.index_value - e.index_value) <= 1e-12


def test_randomized_exact_fit():
    x, on_line = exact_fit_sample(seed=2)
    f = solve_randomized(Dataset(x), None, randomized(n_starts=30))
    assert f.exact_fit is not None
    assert f.h_star == tuple(np.flatnonzero(on_line))


def test_randomized_excludes_distant_cluster():
    x, labels = distant_cluster_sample(seed=1)
    f = fit(Dataset(x), None, randomized(seed=2))
    assert f.h == 52
    assert not labels[list(f.h_star)].any()


def test_robust_distances_examples():
    data = Dataset(gaussian_cloud(10, 2))
    f = solve_exact(data)
    from dataclasses import replace

    ident = replace(f, scatter=np.eye(2), location=data.values[0] - [3.0, 4.0])
    d = robust_distances(data, ident)
    assert d[0] == pytest.approx(5.0)
    at_center = replace(f, location=data.values[3].copy())
    assert robust_distances(data, at_center)[3] == 0.0


def test_robust_distances_flag_cluster():
    x, labels = distant_cluster_sample()
    data = Dataset(x)
    f = fit(data, None, randomized(seed=0))
    d = robust_distances(data, f)
    top = set(np.argsort(d)[-30:].tolist())
    assert top == set(np.flatnonzero(labels).tolist())


def test_fit_to_dict_one_based():
    data = Dataset(gaussian_cloud(6, 2))
    f = solve_exact(data)
    out = f.to_dict()
    assert out["index_base"] == 1
    assert out["h_star"] == [i + 1 for i in f.h_star]
