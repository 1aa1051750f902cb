"""Hyperplane directions spanned by p observations, and squared orthogonal distances.

A direction ``a`` stands for the hyperplane ``{x : x'a = 1}``. It is obtained by
solving the p x p system ``x_i'a = 1`` over p observations. Hyperplanes through
the origin have no such representation; their p-subsets come out singular and
are skipped and counted.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

from pcs.dataset import DEFAULT_TOLERANCES, Dataset, Tolerances
from pcs.errors import CapExceededError, DegenerateError

DIRECTION_CAP = 10**6


@dataclass(frozen=True)
class Direction:
    a: np.ndarray
    source_rows: tuple[int, ...]

    @property
    def norm_sq(self) -> float:
        return float(self.a @ self.a)


@dataclass(frozen=True)
class DirectionSet:
    """Directions drawn from the p-subsets of ``subset``.

    Stored as arrays for vectorized use: ``normals`` is (k, p) and
    ``source_rows`` is (k, p) of 0-based dataset rows, in canonical order
    (lexicographic in source rows).
    """

    normals: np.ndarray
    source_rows: np.ndarray
    subset: tuple[int, ...]
    exhaustive: bool
    skipped_singular: int

    def __len__(self):
        return len(self.normals)

    def __getitem__(self, k) -> Direction:
        return Direction(self.normals[k], tuple(int(i) for i in self.source_rows[k]))

    @property
    def directions(self) -> list[Direction]:
        return [self[k] for k in range(len(self))]


def solve_normals(points: np.ndarray, tol: Tolerances = DEFAULT_TOLERANCES):
    """Solve ``x_i'a = 1`` for a stack of p x p systems.

    Args:
        points: (k, p, p) array; ``points[j]`` holds p observations as rows.

    Returns:
        (normals, ok): (k, p) normals, NaN where singular, and a boolean mask.
        A system is singular when its condition number exceeds ``cond_cap``
        or the solved normal misses a spanning point by more than ``fit``.
    """
    points = np.asarray(points, dtype=float)
    k, p, _ = points.shape
    normals = np.full((k, p), np.nan)
    if k == 0:
        return normals, np.zeros(0, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        cond = np.linalg.cond(points)
    ok = np.isfinite(cond) & (cond <= tol.cond_cap)
    if ok.any():
        normals[ok] = np.linalg.solve(points[ok], np.ones((int(ok.sum()), p, 1)))[..., 0]
        sub = points[ok]
        a = normals[ok]
        resid = (np.einsum("kij,kj->ki", sub, a) - 1.0) ** 2 / np.einsum("kj,kj->k", a, a)[:, None]
        limit = tol.fit * (1.0 + np.einsum("kij,kij->ki", sub, sub))
        good = np.all(resid <= limit, axis=1)
        idx = np.flatnonzero(ok)
        ok[idx[~good]] = False
        normals[idx[~good]] = np.nan
    return normals, ok


def solve_direction(points, tol: Tolerances = DEFAULT_TOLERANCES, source_rows=()) -> Direction | None:
    """Normal of the hyperplane ``x'a = 1`` through p points, or None if singular."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] != pts.shape[1]:
        raise ValueError(f"need exactly p points in R^p, got shape {pts.shape}")
    normals, ok = solve_normals(pts[None], tol)
    if not ok[0]:
        return None
    return Direction(normals[0], tuple(source_rows))


def distances_sq(normals: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Squared orthogonal distances ``(a'x - 1)^2 / |a|^2`` for every (direction, row).

    Returns a (k, n) array for (k, p) normals and (n, p) observations.
    """
    normals = np.atleast_2d(normals)
    proj = normals @ np.atleast_2d(x).T - 1.0
    return proj * proj / np.einsum("kj,kj->k", normals, normals)[:, None]


def distance_sq(a: Direction | np.ndarray, x) -> float:
    vec = a.a if isinstance(a, Direction) else np.asarray(a, float)
    return float(distances_sq(vec[None], np.asarray(x, float)[None])[0, 0])


def _build(data: Dataset, subset, combos: np.ndarray, exhaustive: bool) -> DirectionSet:
    p = data.p
    if len(combos) == 0:
        return DirectionSet(np.empty((0, p)), np.empty((0, p), int), subset, exhaustive, 0)
    normals, ok = solve_normals(data.values[combos], data.tolerances)
    return DirectionSet(
        normals[ok], combos[ok], subset, exhaustive, int((~ok).sum())
    )


def _as_subset(data: Dataset, subset) -> tuple[int, ...]:
    if subset is None:
        return tuple(range(data.n))
    return tuple(sorted(int(i) for i in subset))


def enumerate_directions(data: Dataset, subset=None, cap: int = DIRECTION_CAP) -> DirectionSet:
    """One direction per non-singular p-subset of ``subset`` (all rows if None)."""
    rows = _as_subset(data, subset)
    total = math.comb(len(rows), data.p)
    if total > cap:
        raise CapExceededError(
            f"C({len(rows)},{data.p})={total} directions exceed cap {cap}; use sample_directions"
        )
    combos = np.array(list(itertools.combinations(rows, data.p)), dtype=int).reshape(-1, data.p)
    return _build(data, rows, combos, True)


def _unrank_combination(rank: int, m: int, k: int) -> tuple[int, ...]:
    """The ``rank``-th k-combination of range(m) in lexicographic order."""
    out = []
    x = 0
    for remaining in range(k, 0, -1):
        while True:
            count = math.comb(m - x - 1, remaining - 1)
            if rank < count:
                break
            rank -= count
            x += 1
        out.append(x)
        x += 1
    return tuple(out)


_TABLE_LIMIT = 1 << 20


@functools.lru_cache(maxsize=64)
def _combination_table(m: int, k: int) -> np.ndarray:
    table = np.array(list(itertools.combinations(range(m), k)), dtype=int).reshape(-1, k)
    table.setflags(write=False)
    return table


def _combination_sampler(rng: np.random.Generator, total: int, m: int, p: int):
    """Return ``draw(size)`` yielding distinct p-combinations of range(m) in random order."""
    if total <= _TABLE_LIMIT:
        order = rng.permutation(total)
        table = _combination_table(m, p)
        pos = 0

        def draw(size):
            nonlocal pos
            out = table[order[pos:pos + size]]
            pos += len(out)
            return out

        return draw

    seen: set[int] = set()

    def draw(size):
        ranks = []
        while len(ranks) < size and len(seen) < total:
            for r in rng.integers(total, size=size).tolist():
                if r not in seen and len(ranks) < size:
                    seen.add(r)
                    ranks.append(r)
        return np.array([_unrank_combination(r, m, p) for r in ranks], dtype=int).reshape(-1, p)

    return draw


def sample_directions(
    data: Dataset,
    subset,
    k: int,
    seed=None,
    *,
    rng: np.random.Generator | None = None,
    cap: int = DIRECTION_CAP,
    max_retries: int | None = None,
) -> DirectionSet:
    """Draw ``k`` distinct non-singular p-subsets of ``subset`` uniformly without replacement.

    Draws are positions within the sorted subset, so two datasets related by
    an affine map see the same source-row stream for the same seed. Singular
    draws are redrawn and counted. When ``k`` reaches the number of p-subsets
    the exhaustive enumeration is returned instead.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rows = _as_subset(data, subset)
    m, p = len(rows), data.p
    total = math.comb(m, p)
    if k >= total:
        return enumerate_directions(data, rows, cap=max(cap, total))
    if rng is None:
        rng = np.random.default_rng(seed)
    if max_retries is None:
        max_retries = 10 * k + 100
    rows_arr = np.asarray(rows)
    draw = _combination_sampler(rng, total, m, p)

    combos, normals = [], []
    found = skipped = 0
    while found < k:
        positions = draw(k - found)
        if len(positions) == 0:
            break
        block = rows_arr[positions]
        a, ok = solve_normals(data.values[block], data.tolerances)
        combos.append(block[ok])
        normals.append(a[ok])
        found += int(ok.sum())
        skipped += int((~ok).sum())
        if skipped > max_retries:
            raise DegenerateError(
                f"{skipped} singular draws while sampling {k} directions; data is degenerate"
            )
    combos = np.concatenate(combos) if combos else np.empty((0, p), int)
    normals = np.concatenate(normals) if normals else np.empty((0, p))
    order = np.lexsort(combos.T[::-1]) if len(combos) else np.arange(0)
    return DirectionSet(normals[order], combos[order], rows, False, skipped)
