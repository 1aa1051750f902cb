"""Search for the most congruent h-subset and the location/scatter it induces.

Two searches are provided. ``solve_exact`` scores every h-subset against
every direction spanned by its p-subsets. ``solve_randomized`` is a seeded
surrogate for large samples: random (p+1)-subset starts grown to h rows and
refined by neighbourhood voting, then ranked by the index computed on
sampled directions. It is a heuristic with no optimality guarantee.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from pcs.dataset import Dataset, subset_size
from pcs.errors import CapExceededError, DegenerateError, ValidationError
from pcs.geometry import (
    DIRECTION_CAP,
    Direction,
    enumerate_directions,
    sample_directions,
)
from pcs.incongruence import (
    INF,
    batch_index,
    denominators,
    exact_fit_rows,
    incongruence_index,
    neighborhood_masks,
    snapped_distances,
)

logger = logging.getLogger(__name__)

SUBSET_CAP = 200_000
MODES = ("exact", "randomized")

_START_STREAM = 0
_SCORE_STREAM = 1


@dataclass(frozen=True)
class SolverConfig:
    mode: str = "exact"
    subset_cap: int = SUBSET_CAP
    direction_cap: int = DIRECTION_CAP
    n_starts: int = 500
    n_isteps: int = 3
    k_directions: int = 250
    seed: int | None = None
    threads: int = 1
    start_retries: int = 10

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_starts < 1 or self.n_isteps < 0 or self.k_directions < 1:
            raise ValidationError("need n_starts >= 1, n_isteps >= 0, k_directions >= 1")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")
        if self.mode == "randomized" and self.seed is None:
            raise ValidationError("randomized mode requires an explicit seed")
        if self.seed is not None and self.seed < 0:
            raise ValidationError("seed must be a non-negative integer")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ExactFit:
    direction: Direction
    rows: tuple[int, ...]


@dataclass(frozen=True)
class PcsFit:
    h: int
    h_star: tuple[int, ...]
    location: np.ndarray
    scatter: np.ndarray
    index_value: float
    mode: str
    exact_fit: ExactFit | None = None
    seed: int | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def scatter_singular(self) -> bool:
        w = np.linalg.eigvalsh(self.scatter)
        return bool(w[0] <= 1e-12 * max(w[-1], 1e-300))

    def to_dict(self) -> dict:
        """JSON-ready view with 1-based row indices."""
        ef = None
        if self.exact_fit is not None:
            ef = {
                "direction": self.exact_fit.direction.a.tolist(),
                "source_rows": [i + 1 for i in self.exact_fit.direction.source_rows],
                "rows": [i + 1 for i in self.exact_fit.rows],
            }
        return {
            "index_base": 1,
            "mode": self.mode,
            "h": self.h,
            "h_star": [i + 1 for i in self.h_star],
            "location": self.location.tolist(),
            "scatter": self.scatter.tolist(),
            "scatter_divisor": "n_subset",
            "scatter_singular": self.scatter_singular,
            "index_value": self.index_value,
            "exact_fit": ef,
            "seed": self.seed,
            "diagnostics": self.diagnostics,
        }


def estimate(data: Dataset, rows) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance (divisor ``len(rows)``) of the selected rows."""
    rows = np.asarray(sorted(rows), dtype=int)
    if len(rows) < data.p + 1:
        raise ValidationError(f"need at least p+1={data.p + 1} rows, got {len(rows)}")
    x = data.values[rows]
    location = x.mean(axis=0)
    centered = x - location
    scatter = centered.T @ centered / len(rows)
    return location, (scatter + scatter.T) / 2


def _make_fit(data, h, rows, index_value, mode, exact=None, seed=None, diagnostics=None) -> PcsFit:
    location, scatter = estimate(data, rows)
    return PcsFit(
        h=h,
        h_star=tuple(int(i) for i in sorted(rows)),
        location=location,
        scatter=scatter,
        index_value=float(index_value),
        mode=mode,
        exact_fit=exact,
        seed=seed,
        diagnostics=diagnostics or {},
    )


def _exact_fit_result(data, h, hit, mode, seed, diagnostics) -> PcsFit:
    direction, rows = hit
    diagnostics = dict(diagnostics, exact_fit_rows=len(rows))
    return _make_fit(data, h, rows, 0.0, mode, ExactFit(direction, rows), seed, diagnostics)


def _pick_exact_fit(hits):
    """Largest enlarged subset wins; ties go to the lexicographically smallest."""
    return min(hits, key=lambda hit: (-len(hit[1]), hit[1]))


def _pool_map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def solve_exact(data: Dataset, h: int | None = None, cfg: SolverConfig | None = None) -> PcsFit:
    """Minimize the index over all h-subsets, each scored on all its directions.

    Ties go to the lexicographically smallest row set. A direction with at
    least h rows on its hyperplane preempts the search and the enlarged set of
    those rows is returned with index 0.
    """
    cfg = cfg or SolverConfig()
    n, p = data.n, data.p
    h = subset_size(n, p, h).h
    n_subsets = math.comb(n, h)
    if n_subsets > cfg.subset_cap:
        raise CapExceededError(
            f"C({n},{h})={n_subsets} candidate subsets exceed cap {cfg.subset_cap}; "
            "use randomized mode"
        )
    n_dirs = math.comb(n, p)
    if n_dirs > cfg.direction_cap:
        raise CapExceededError(f"C({n},{p})={n_dirs} directions exceed cap {cfg.direction_cap}")

    pool = enumerate_directions(data, None, cap=cfg.direction_cap)
    diagnostics = {
        "candidates": n_subsets,
        "directions_per_candidate": math.comb(h, p),
        "singular_p_subsets": pool.skipped_singular,
    }
    if len(pool) == 0:
        raise DegenerateError("every p-subset is singular")
    d2 = snapped_distances(data, pool.normals)
    hit = exact_fit_rows(d2, h)
    if hit is not None:
        k, rows = hit
        return _exact_fit_result(data, h, (pool[k], rows), "exact", cfg.seed, diagnostics)

    den = denominators(d2, h)
    subsets = np.array(list(itertools.combinations(range(n), h)), dtype=int)
    chunk = 4096
    blocks = [subsets[lo:lo + chunk] for lo in range(0, len(subsets), chunk)]
    scores = np.concatenate(
        _pool_map(lambda b: batch_index(d2, den, pool.source_rows, b, chunk), blocks, cfg.threads)
    )
    best = int(np.argmin(scores))
    if not np.isfinite(scores[best]):
        raise DegenerateError("no candidate subset has a usable direction")
    return _make_fit(data, h, subsets[best], scores[best], "exact", None, cfg.seed, diagnostics)


# ---------------------------------------------------------------------------
# Randomized search


def _rng(*words) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(w) for w in words]))


def _scaled_mean(d2, den) -> np.ndarray:
    # Dividing by each direction's denominator keeps the ordering affine invariant.
    return (d2 / den[:, None]).mean(axis=0)


def _top_rows(h, votes, closeness) -> tuple[int, ...]:
    order = np.lexsort((np.arange(len(closeness)), closeness, -votes))
    return tuple(sorted(int(i) for i in order[:h]))


class _ExactFitHit(Exception):
    def __init__(self, direction, rows):
        self.hit = (direction, rows)


def _evaluate(data, dirs, h):
    d2 = snapped_distances(data, dirs.normals)
    found = exact_fit_rows(d2, h)
    if found is not None:
        k, rows = found
        raise _ExactFitHit(dirs[k], rows)
    return d2, denominators(d2, h)


def _run_start(data: Dataset, h: int, cfg: SolverConfig, start: int):
    """One start: returns (subset or None, exact-fit hit or None)."""
    rng = _rng(cfg.seed, _START_STREAM, start)
    n, p = data.n, data.p
    try:
        for _ in range(cfg.start_retries):
            seed_rows = rng.choice(n, p + 1, replace=False)
            try:
                dirs = sample_directions(data, seed_rows, cfg.k_directions, rng=rng)
            except DegenerateError:
                continue
            if len(dirs):
                break
        else:
            logger.info("start %d discarded: no non-singular direction", start)
            return None, None

        d2, den = _evaluate(data, dirs, h)
        current = _top_rows(h, np.zeros(n), _scaled_mean(d2, den))
        for _ in range(cfg.n_isteps):
            dirs = sample_directions(data, current, cfg.k_directions, rng=rng)
            if len(dirs) == 0:
                break
            d2, den = _evaluate(data, dirs, h)
            votes = neighborhood_masks(d2, h).sum(axis=0)
            new = _top_rows(h, votes, _scaled_mean(d2, den))
            if new == current:
                break
            current = new
        return current, None
    except _ExactFitHit as hit:
        return None, hit.hit
    except DegenerateError as exc:
        logger.info("start %d discarded: %s", start, exc)
        return None, None


def _score_candidate(data: Dataset, h: int, cfg: SolverConfig, rows: tuple[int, ...]):
    """(index value, exact-fit hit or None) from freshly sampled directions.

    The stream is keyed on the rows themselves, so a subset always receives
    the same directions no matter which start produced it.
    """
    rng = _rng(cfg.seed, _SCORE_STREAM, *rows)
    try:
        dirs = sample_directions(data, rows, cfg.k_directions, rng=rng, cap=cfg.direction_cap)
    except DegenerateError:
        return INF, None
    if len(dirs) == 0:
        return INF, None
    report = incongruence_index(data, rows, dirs, h)
    if report.exact_fit is not None:
        d2 = snapped_distances(data, dirs.normals)
        k, enlarged = exact_fit_rows(d2, h)
        return 0.0, (dirs[k], enlarged)
    return report.aggregate, None


def solve_randomized(data: Dataset, h: int | None = None, cfg: SolverConfig | None = None) -> PcsFit:
    """Seeded randomized search; deterministic given (data, h, cfg).

    When ``n_starts`` reaches the number of h-subsets (and that number is
    within ``subset_cap``) the starts are replaced by the full list of
    h-subsets, so the search degenerates to exhaustive candidate scoring.
    """
    if cfg is None or cfg.seed is None:
        raise ValidationError("randomized mode requires an explicit seed")
    n, p = data.n, data.p
    h = subset_size(n, p, h).h
    n_subsets = math.comb(n, h)
    saturated = cfg.n_starts >= n_subsets and n_subsets <= cfg.subset_cap

    hits = []
    degenerate = 0
    if saturated:
        candidates = list(itertools.combinations(range(n), h))
    else:
        results = _pool_map(lambda s: _run_start(data, h, cfg, s), range(cfg.n_starts), cfg.threads)
        found = set()
        for subset, hit in results:
            if hit is not None:
                hits.append(hit)
            elif subset is None:
                degenerate += 1
            else:
                found.add(subset)
        candidates = sorted(found)

    diagnostics = {
        "candidates": len(candidates),
        "directions_per_candidate": min(cfg.k_directions, math.comb(h, p)),
        "degenerate_starts": degenerate,
        "saturated": saturated,
        "n_starts": cfg.n_starts,
        "n_isteps": cfg.n_isteps,
    }
    if hits:
        return _exact_fit_result(data, h, _pick_exact_fit(hits), "randomized", cfg.seed, diagnostics)
    if not candidates:
        raise DegenerateError("all starts were degenerate")

    scored = _pool_map(lambda rows: _score_candidate(data, h, cfg, rows), candidates, cfg.threads)
    hits = [hit for _, hit in scored if hit is not None]
    if hits:
        return _exact_fit_result(data, h, _pick_exact_fit(hits), "randomized", cfg.seed, diagnostics)
    values = np.array([v for v, _ in scored])
    best = int(np.argmin(values))
    if not np.isfinite(values[best]):
        raise DegenerateError("no candidate subset has a usable direction")
    return _make_fit(data, h, candidates[best], values[best], "randomized", None, cfg.seed, diagnostics)


def fit(data: Dataset, h: int | None = None, cfg: SolverConfig | None = None) -> PcsFit:
    cfg = cfg or SolverConfig()
    if cfg.mode == "exact":
        return solve_exact(data, h, cfg)
    return solve_randomized(data, h, cfg)


def robust_distances(data: Dataset, fit: PcsFit) -> np.ndarray:
    """Mahalanobis distance of every row from the fitted location and scatter."""
    w, v = np.linalg.eigh(fit.scatter)
    if w[0] <= 1e-12 * max(w[-1], 1e-300):
        raise DegenerateError(
            "fitted scatter is singular; inspect the exact_fit block instead"
        )
    centered = data.values - fit.location
    z = centered @ v / np.sqrt(w)
    return np.sqrt(np.einsum("ij,ij->i", z, z))
