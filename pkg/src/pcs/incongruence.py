"""Incongruence of an h-subset with respect to the full sample.

For a direction ``a`` the neighbourhood ``H^a`` collects every row whose
squared distance is at most the h-th smallest one. The incongruence of a
subset ``H`` along ``a`` is ``log(mean_{H} d^2 / mean_{h smallest} d^2)``
with ``log(0/0) := 0`` and ``+inf`` when only the denominator vanishes.
The subset-level index is the mean over the subset's own directions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pcs.dataset import Dataset
from pcs.geometry import Direction, DirectionSet, distances_sq

INF = float("inf")


def zero_threshold(d2: np.ndarray, rel: float) -> np.ndarray:
    """Per-direction threshold below which a squared distance counts as zero."""
    return rel * (1.0 + np.median(d2, axis=-1))


def snapped_distances(data: Dataset, normals: np.ndarray) -> np.ndarray:
    """(k, n) squared distances with values under the zero threshold set to 0."""
    d2 = distances_sq(normals, data.values)
    thr = zero_threshold(d2, data.tolerances.zero)
    d2[d2 <= thr[:, None]] = 0.0
    return d2


def kth_smallest(d2: np.ndarray, h: int) -> np.ndarray:
    return np.partition(d2, h - 1, axis=-1)[..., h - 1]


def neighborhood_masks(d2: np.ndarray, h: int) -> np.ndarray:
    """Boolean (k, n) membership of ``H^a``; ties at the h-th value are all included."""
    return d2 <= kth_smallest(d2, h)[..., None]


def denominators(d2: np.ndarray, h: int) -> np.ndarray:
    """Mean of the h smallest squared distances per direction."""
    return np.sort(d2, axis=-1)[..., :h].mean(axis=-1)


def subset_means(d2: np.ndarray, rows) -> np.ndarray:
    """Mean squared distance over ``rows``, summed in ascending order.

    Summing in the same order as :func:`denominators` makes a subset equal to
    ``H^a`` score exactly 0 rather than a round-off residue.
    """
    return np.sort(d2[..., rows], axis=-1).mean(axis=-1)


def log_ratio(num, den) -> np.ndarray:
    """``log(num / den)`` with the degenerate conventions, elementwise."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(num, den).shape)
    num, den = np.broadcast_arrays(num, den)
    pos = den > 0
    with np.errstate(divide="ignore"):
        out[pos] = np.log(num[pos] / den[pos])
    out[~pos & (num > 0)] = INF
    # num >= den holds exactly; anything below 0 is summation round-off.
    return np.maximum(out, 0.0)


def h_neighborhood(data: Dataset, a: Direction, h: int) -> tuple[int, ...]:
    """Rows of ``H^a``, possibly more than h of them when the h-th distance is tied."""
    d2 = snapped_distances(data, a.a[None])[0]
    return tuple(int(i) for i in np.flatnonzero(neighborhood_masks(d2, h)))


def incongruence_along(data: Dataset, subset, a: Direction, h: int) -> float:
    rows = np.asarray(sorted(subset), dtype=int)
    if len(rows) < data.p:
        raise ValueError(f"subset of size {len(rows)} is smaller than p={data.p}")
    d2 = snapped_distances(data, a.a[None])[0]
    return float(log_ratio(subset_means(d2, rows), denominators(d2, h)))


@dataclass(frozen=True)
class IncongruenceReport:
    subset: tuple[int, ...]
    directions: DirectionSet
    values: np.ndarray
    aggregate: float
    exact_fit: Direction | None
    degenerate_zero_over_zero: int

    @property
    def per_direction(self) -> list[tuple[Direction, float]]:
        return [(self.directions[k], float(v)) for k, v in enumerate(self.values)]

    def curve(self) -> list[tuple[int, float, tuple[int, ...]]]:
        """(direction_index, I value, source_rows) sorted ascending by I value."""
        order = np.argsort(self.values, kind="stable")
        return [
            (int(k), float(self.values[k]), tuple(int(i) for i in self.directions.source_rows[k]))
            for k in order
        ]


def incongruence_index(data: Dataset, subset, dirs: DirectionSet, h: int) -> IncongruenceReport:
    """Per-direction incongruence of ``subset`` and their mean.

    A single ``+inf`` direction makes the mean ``+inf`` and is reported as
    the exact-fit candidate.
    """
    if len(dirs) == 0:
        raise ValueError("empty direction set")
    rows = np.asarray(sorted(subset), dtype=int)
    if len(rows) < data.p:
        raise ValueError(f"subset of size {len(rows)} is smaller than p={data.p}")
    d2 = snapped_distances(data, dirs.normals)
    num = subset_means(d2, rows)
    den = denominators(d2, h)
    values = log_ratio(num, den)
    infinite = np.flatnonzero(np.isinf(values))
    exact = dirs[int(infinite[0])] if infinite.size else None
    aggregate = INF if infinite.size else float(values.mean())
    return IncongruenceReport(
        subset=tuple(int(i) for i in rows),
        directions=dirs,
        values=values,
        aggregate=aggregate,
        exact_fit=exact,
        degenerate_zero_over_zero=int(((num == 0) & (den == 0)).sum()),
    )


def exact_fit_rows(d2: np.ndarray, h: int):
    """Index of the best exact-fit direction and its zero rows, or None.

    ``d2`` is a snapped (k, n) distance matrix. Among directions with at least
    h zero distances the one with the most zeros wins, ties going to the
    lexicographically smallest row set.
    """
    zeros = d2 == 0.0
    counts = zeros.sum(axis=1)
    hits = np.flatnonzero(counts >= h)
    if hits.size == 0:
        return None
    best = max(hits, key=lambda k: (counts[k], [-i for i in np.flatnonzero(zeros[k])]))
    return int(best), tuple(int(i) for i in np.flatnonzero(zeros[best]))


def detect_exact_fit(data: Dataset, report: IncongruenceReport, h: int):
    """The enlarged subset of rows lying on an exact-fit direction, or None."""
    if len(report.directions) == 0:
        return None
    d2 = snapped_distances(data, report.directions.normals)
    found = exact_fit_rows(d2, h)
    return None if found is None else found[1]


def batch_index(
    d2: np.ndarray,
    den: np.ndarray,
    sources: np.ndarray,
    subsets: np.ndarray,
    chunk: int = 4096,
) -> np.ndarray:
    """Subset-level index for many equal-size subsets against a shared direction pool.

    Args:
        d2: (k, n) snapped squared distances for a pool of directions.
        den: (k,) denominators for the pool.
        sources: (k, p) spanning rows of each pooled direction.
        subsets: (m, s) row indices, one candidate per row.

    Each candidate averages over the pooled directions whose spanning rows it
    contains, which is its own direction set when the pool holds every
    non-singular p-subset. Candidates without any direction get ``+inf``.
    """
    m, s = subsets.shape
    n = d2.shape[1]
    out = np.empty(m)
    d2t = np.ascontiguousarray(d2.T)
    for lo in range(0, m, chunk):
        block = subsets[lo:lo + chunk]
        member = np.zeros((len(block), n), dtype=bool)
        np.put_along_axis(member, block, True, axis=1)
        num = (member.astype(float) @ d2t) / s
        valid = member[:, sources].all(axis=2)
        vals = log_ratio(num, den)
        count = valid.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            total = np.where(valid, vals, 0.0).sum(axis=1)
            out[lo:lo + chunk] = np.where(count > 0, total / np.maximum(count, 1), INF)
    return out
