"""Synthetic fixtures: clean clouds, a distant compact cluster, and exact-fit data."""

from __future__ import annotations

import numpy as np


def gaussian_cloud(n: int, p: int, seed: int = 0, center=None) -> np.ndarray:
    """n standard-normal rows in R^p, shifted by ``center`` (default: a fixed non-zero offset).

    The default offset keeps the origin away from the cloud so few hyperplanes
    through p rows pass through it.
    """
    rng = np.random.default_rng(seed)
    if center is None:
        center = np.linspace(1.0, 2.0, p)
    return rng.standard_normal((n, p)) + np.asarray(center, float)


def distant_cluster_sample(
    seed: int = 0,
    n: int = 100,
    n_outliers: int = 30,
    offset: float = 15.0,
    outlier_spread: float = 0.1,
):
    """Bivariate sample whose last ``n_outliers`` rows form a tight cluster to the right.

    The genuine rows are correlated normal; the cluster sits ``offset`` units to
    the right at the genuine mean height, so horizontal hyperplanes do not
    separate it from the genuine rows.

    Returns:
        (values, is_outlier) with ``is_outlier`` a boolean mask.
    """
    rng = np.random.default_rng(seed)
    g = n - n_outliers
    cov = np.array([[1.0, 0.5], [0.5, 1.0]])
    genuine = rng.multivariate_normal([0.0, 0.0], cov, size=g)
    cluster = rng.standard_normal((n_outliers, 2)) * outlier_spread + [offset, 0.0]
    values = np.vstack([genuine, cluster]) + [1.0, 2.0]
    labels = np.zeros(n, dtype=bool)
    labels[g:] = True
    return values, labels


def exact_fit_sample(n: int = 20, n_line: int = 12, seed: int = 0):
    """``n_line`` rows exactly on the line ``y = 0.5 x + 2`` and the rest scattered off it.

    Coordinates on the line are dyadic so that the rows are exactly collinear
    in binary floating point.

    Returns:
        (values, on_line) with ``on_line`` a boolean mask.
    """
    rng = np.random.default_rng(seed)
    xs = (rng.permutation(64)[:n_line] - 32) / 8.0
    line = np.column_stack([xs, 0.5 * xs + 2.0])
    off = rng.standard_normal((n - n_line, 2)) * 2.0
    # push every off-line point at least 0.5 away from the line vertically
    resid = off[:, 1] - (0.5 * off[:, 0] + 2.0)
    off[:, 1] += np.where(resid >= 0, 0.5, -0.5)
    values = np.vstack([line, off])
    mask = np.zeros(n, dtype=bool)
    mask[:n_line] = True
    return values, mask
