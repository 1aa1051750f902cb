"""Observation matrix, ingestion, validation and subset-size arithmetic."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from pcs.errors import CapExceededError, ParseError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Tolerances:
    """Relative numerical tolerances shared by every module.

    Attributes:
        dup: duplicate rows are closer than ``dup * diameter``.
        gp: general-position simplex volume floor, ``gp * diameter**p``.
        cond_cap: p x p systems with a larger condition number are singular.
        fit: spanning points must satisfy ``d^2 <= fit * (1 + |x|^2)``.
        zero: ``d^2 <= zero * (1 + median d^2)`` counts as lying on the hyperplane.
    """

    dup: float = 1e-12
    gp: float = 1e-10
    cond_cap: float = 1e12
    fit: float = 1e-8
    zero: float = 1e-10


DEFAULT_TOLERANCES = Tolerances()


def diameter(values: np.ndarray) -> float:
    """Bounding-box diagonal; within a factor sqrt(p) of the true diameter."""
    if len(values) == 0:
        return 0.0
    return float(np.linalg.norm(values.max(axis=0) - values.min(axis=0)))


@dataclass(frozen=True)
class Dataset:
    """An immutable n x p observation matrix.

    Construction validates ``n > p + 1 > 2``, finiteness and (unless
    ``allow_duplicates``) pairwise distinctness of rows.
    """

    values: np.ndarray
    allow_duplicates: bool = False
    tolerances: Tolerances = field(default=DEFAULT_TOLERANCES, repr=False)

    def __post_init__(self):
        x = np.array(self.values, dtype=float, copy=True)
        if x.ndim != 2:
            raise ValidationError(f"expected a 2-d observation matrix, got shape {x.shape}")
        x.setflags(write=False)
        object.__setattr__(self, "values", x)

        bad = np.flatnonzero(~np.isfinite(x).all(axis=1))
        if bad.size:
            raise ValidationError(
                f"non-finite values in rows {_fmt_rows(bad)}", rows=bad + 1
            )
        n, p = x.shape
        if not n > p + 1 > 2:
            raise ValidationError(f"n>p+1>2 violated: n={n}, p={p}")
        if not self.allow_duplicates:
            pair = first_duplicate_pair(x, self.tolerances.dup)
            if pair is not None:
                raise ValidationError(
                    f"duplicate rows {pair[0] + 1},{pair[1] + 1}",
                    rows=(pair[0] + 1, pair[1] + 1),
                )

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return self.n

    def rows(self, index) -> np.ndarray:
        return self.values[np.asarray(index, dtype=int)]

    def transformed(self, B: np.ndarray, b: np.ndarray) -> Dataset:
        """Return the dataset with rows mapped to ``B x + b``."""
        return Dataset(
            self.values @ np.asarray(B, float).T + np.asarray(b, float),
            allow_duplicates=self.allow_duplicates,
            tolerances=self.tolerances,
        )


def _fmt_rows(idx) -> str:
    return ",".join(str(int(i) + 1) for i in idx)


def first_duplicate_pair(values: np.ndarray, rel_tol: float):
    """Lexicographically first pair (i, j), i < j, with distance <= rel_tol * diameter."""
    tol = rel_tol * diameter(values)
    pairs = cKDTree(values).query_pairs(r=tol, output_type="ndarray")
    if len(pairs) == 0:
        return None
    pairs = np.sort(pairs, axis=1)
    i, j = min(map(tuple, pairs.tolist()))
    return int(i), int(j)


class SubsetSize(NamedTuple):
    h: int
    n: int
    p: int


def default_h(n: int, p: int) -> SubsetSize:
    """The default subset size ``ceil((n + p + 1) / 2)``."""
    if not n > p + 1 > 2:
        raise ValidationError(f"n>p+1>2 violated: n={n}, p={p}")
    return SubsetSize((n + p + 2) // 2, n, p)


def subset_size(n: int, p: int, h: int | None = None) -> SubsetSize:
    """Resolve ``h``: the default when None, otherwise validate ``p+1 <= h <= n``."""
    if h is None:
        return default_h(n, p)
    if not p + 1 <= h <= n:
        raise ValidationError(f"h={h} outside [p+1, n] = [{p + 1}, {n}]")
    return SubsetSize(int(h), n, p)


class BreakdownBound(NamedTuple):
    exact: Fraction
    value: float


def breakdown_bound(n: int, h: int) -> BreakdownBound:
    """``(n - h + 1) / n`` as a reduced fraction and a float."""
    if not 1 <= h <= n:
        raise ValidationError(f"h={h} outside [1, n={n}]")
    frac = Fraction(n - h + 1, n)
    return BreakdownBound(frac, float(frac))


# ---------------------------------------------------------------------------
# CSV ingestion


def _split(line: str) -> list[str]:
    if "," in line:
        return [f.strip() for f in line.split(",")]
    return line.split()


def _is_numeric(fields) -> bool:
    try:
        [float(f) for f in fields]
    except ValueError:
        return False
    return True


def load_csv(
    path,
    has_header: bool | None = None,
    *,
    allow_duplicates: bool = False,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Dataset:
    """Read a comma- or whitespace-delimited numeric file into a Dataset.

    ``has_header=None`` auto-detects a header: the first non-blank line is
    treated as one when any of its fields fails to parse as a number.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc

    lines = [(k + 1, ln) for k, ln in enumerate(text.splitlines()) if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: no data")
    if has_header is None:
        has_header = not _is_numeric(_split(lines[0][1]))
    if has_header:
        lines = lines[1:]

    rows = []
    width = None
    for lineno, line in lines:
        fields = _split(line)
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise ParseError(
                f"{path}:{lineno}: expected {width} fields, found {len(fields)}"
            )
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return Dataset(np.array(rows), allow_duplicates=allow_duplicates, tolerances=tolerances)


def save_csv(path, values: np.ndarray, header=None) -> None:
    values = np.asarray(values, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# General position


@dataclass(frozen=True)
class GeneralPositionReport:
    in_general_position: bool
    witness: tuple[int, ...] | None
    tol_gp: float
    exhaustive: bool
    checked: int


def simplex_volumes(values: np.ndarray, subsets: np.ndarray) -> np.ndarray:
    """Volumes of the p-simplices spanned by each row of ``subsets`` ((m, p+1) indices)."""
    pts = values[subsets]
    edges = pts[:, 1:, :] - pts[:, :1, :]
    p = values.shape[1]
    return np.abs(np.linalg.det(edges)) / math.factorial(p)


def check_general_position(
    data: Dataset,
    tol_gp: float | None = None,
    *,
    cap: int = 10**6,
    allow_sampling: bool = False,
    n_samples: int = 100_000,
    seed: int = 0,
    chunk: int = 65536,
) -> GeneralPositionReport:
    """Test whether any p+1 rows lie in a common (p-1)-dimensional affine subspace.

    Exhaustive over all (p+1)-subsets when their count is at most ``cap``.
    Beyond the cap a uniformly sampled verdict is returned (``exhaustive``
    false) if ``allow_sampling``; otherwise CapExceededError. The witness is
    the lexicographically first degenerate subset found, as 0-based rows.
    """
    rel = data.tolerances.gp if tol_gp is None else tol_gp
    x = data.values
    n, p = x.shape
    threshold = rel * diameter(x) ** p
    total = math.comb(n, p + 1)

    if total <= cap:
        combos = itertools.combinations(range(n), p + 1)
        checked = 0
        while True:
            block = np.array(list(itertools.islice(combos, chunk)), dtype=int)
            if block.size == 0:
                break
            checked += len(block)
            bad = np.flatnonzero(simplex_volumes(x, block) <= threshold)
            if bad.size:
                witness = tuple(int(i) for i in block[bad[0]])
                return GeneralPositionReport(False, witness, rel, True, checked)
        return GeneralPositionReport(True, None, rel, True, checked)

    if not allow_sampling:
        raise CapExceededError(
            f"C({n},{p + 1})={total} exceeds the enumeration cap {cap}; enable sampling"
        )
    rng = np.random.default_rng(seed)
    block = np.sort(
        np.array([rng.choice(n, p + 1, replace=False) for _ in range(n_samples)]), axis=1
    )
    vols = simplex_volumes(x, block)
    bad = np.flatnonzero(vols <= threshold)
    if bad.size:
        witness = min(tuple(int(i) for i in block[k]) for k in bad)
        return GeneralPositionReport(False, witness, rel, False, n_samples)
    return GeneralPositionReport(True, None, rel, False, n_samples)
