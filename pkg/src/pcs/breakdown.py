"""Contamination, bias measures and empirical breakdown / equivariance probes."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from pcs.dataset import Dataset, breakdown_bound, check_general_position, subset_size
from pcs.errors import DegenerateError, ValidationError
from pcs.solver import PcsFit, SolverConfig, fit

logger = logging.getLogger(__name__)

PLACEMENTS = ("point-mass", "point-mass-jitter", "cluster", "line", "custom")
DEFAULT_L_GRID = (1e3, 1e6, 1e9)


@dataclass(frozen=True)
class ContaminationSpec:
    """Replace the last ``c`` rows with outliers at distance ``L``.

    ``direction`` is the displacement from the clean mean (normalized here);
    None draws a random unit vector from the contamination seed. The
    ``jitter_scale`` is relative to the clean data's spread.
    """

    c: int
    L: float = 1e6
    placement: str = "point-mass"
    direction: tuple[float, ...] | None = None
    jitter_scale: float = 0.0
    rows: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.placement not in PLACEMENTS:
            raise ValidationError(f"placement must be one of {PLACEMENTS}")
        if self.c < 0:
            raise ValidationError("c must be >= 0")
        if not self.L > 0:
            raise ValidationError("L must be > 0")
        if self.jitter_scale < 0:
            raise ValidationError("jitter_scale must be >= 0")
        if self.placement == "custom":
            if self.rows is None or np.asarray(self.rows).shape[0] != self.c:
                raise ValidationError("custom placement needs exactly c rows")


def _spread(x: np.ndarray) -> float:
    s = float(np.std(x, axis=0).mean())
    return s if s > 0 else 1.0


def _unit(direction, p, rng) -> np.ndarray:
    if direction is None:
        u = rng.standard_normal(p)
    else:
        u = np.asarray(direction, dtype=float)
        if u.shape != (p,):
            raise ValidationError(f"direction must have {p} components")
    norm = np.linalg.norm(u)
    if norm == 0:
        raise ValidationError("direction must be non-zero")
    return u / norm


def contaminate(data: Dataset, spec: ContaminationSpec, seed: int = 0) -> Dataset:
    """Return a copy of ``data`` whose last ``spec.c`` rows are outliers.

    The first ``n - c`` rows are preserved bit for bit. Duplicate rows are
    permitted in the result.
    """
    n, p = data.n, data.p
    if spec.c >= n:
        raise ValidationError(f"c={spec.c} must be < n={n}")
    if spec.c == 0:
        return data
    rng = np.random.default_rng(seed)
    x = np.array(data.values)
    u = _unit(spec.direction, p, rng)
    scale = _spread(x)
    anchor = x.mean(axis=0) + spec.L * u

    if spec.placement == "custom":
        block = np.asarray(spec.rows, dtype=float)
    elif spec.placement == "line":
        # all outliers on one line through the anchor, orthogonal to u
        v = rng.standard_normal(p)
        v -= (v @ u) * u
        v /= np.linalg.norm(v)
        steps = np.linspace(-1.0, 1.0, spec.c) if spec.c > 1 else np.zeros(1)
        block = anchor + np.outer(steps * scale, v)
    else:
        block = np.tile(anchor, (spec.c, 1))
        jitter = spec.jitter_scale
        if spec.placement == "point-mass-jitter" and jitter == 0:
            jitter = 1e-3
        elif spec.placement == "cluster" and jitter == 0:
            jitter = 0.05
        if jitter > 0:
            block = block + jitter * scale * rng.standard_normal((spec.c, p))
    x[n - spec.c:] = block
    return Dataset(x, allow_duplicates=True, tolerances=data.tolerances)


def bias_location(fit_clean: PcsFit, fit_contam: PcsFit) -> float:
    return float(np.linalg.norm(fit_contam.location - fit_clean.location))


def inverse_sqrt(matrix: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(matrix)
    if w[0] <= 1e-12 * max(w[-1], 1e-300):
        raise DegenerateError("clean scatter is not positive definite")
    return (v / np.sqrt(w)) @ v.T


def bias_scatter(fit_clean: PcsFit | np.ndarray, fit_contam: PcsFit | np.ndarray) -> float:
    """Condition number of ``S^{-1/2} S_eps S^{-1/2}``; ``+inf`` when ``S_eps`` is singular."""
    s_clean = getattr(fit_clean, "scatter", fit_clean)
    s_contam = getattr(fit_contam, "scatter", fit_contam)
    root = inverse_sqrt(np.asarray(s_clean, float))
    q = root @ np.asarray(s_contam, float) @ root
    w = np.linalg.eigvalsh((q + q.T) / 2)
    if w[0] <= 1e-12 * max(w[-1], 1e-300):
        return float("inf")
    return max(float(w[-1] / w[0]), 1.0)


@dataclass(frozen=True)
class BiasRecord:
    c: int
    L: float
    epsilon: float
    location_bias: float
    scatter_bias: float
    h_star_outlier_count: int
    location_norm: float
    scatter_lambda1: float
    max_h_star_norm: float

    def csv_row(self) -> list:
        return [
            self.c, repr(self.epsilon), repr(self.L), repr(self.location_bias),
            repr(self.scatter_bias), self.h_star_outlier_count, repr(self.location_norm),
            repr(self.scatter_lambda1), repr(self.max_h_star_norm),
        ]


CSV_HEADER = [
    "c", "epsilon", "L", "location_bias", "scatter_bias", "h_star_outlier_count",
    "location_norm", "scatter_lambda1", "max_h_star_norm",
]


@dataclass(frozen=True)
class BreakdownEstimate:
    empirical_breakdown: Fraction | None
    theoretical: Fraction
    diverged_on: str | None
    max_tested: Fraction

    def describe(self) -> str:
        if self.empirical_breakdown is None:
            return f"no divergence detected (ε <= {float(self.max_tested):g} tested)"
        return f"diverged at ε = {float(self.empirical_breakdown):g} ({self.diverged_on})"


@dataclass
class SweepResult:
    records: list[BiasRecord]
    estimate: BreakdownEstimate
    clean_fit: PcsFit
    n: int
    h: int

    def summary(self) -> dict:
        est = self.estimate
        return {
            "n": self.n,
            "h": self.h,
            "theoretical_breakdown": str(est.theoretical),
            "theoretical_breakdown_value": float(est.theoretical),
            "empirical_breakdown": None if est.empirical_breakdown is None else str(est.empirical_breakdown),
            "empirical_breakdown_value": None if est.empirical_breakdown is None else float(est.empirical_breakdown),
            "diverged_on": est.diverged_on,
            "max_tested": str(est.max_tested),
            "verdict": est.describe(),
            "note": "the adversarial placements are a lower-bound probe; no divergence "
                    "under them does not contradict the breakdown bound",
        }


def _growth(values, threshold) -> bool:
    if len(values) < 2:
        return False
    for lo, hi in zip(values, values[1:]):
        if np.isinf(hi):
            continue
        ratio = hi / lo if lo > 0 else (np.inf if hi > 0 else 1.0)
        if ratio < threshold:
            return False
    return True


def _record(clean: PcsFit, contam_fit: PcsFit, data_eps: Dataset, c: int, L: float) -> BiasRecord:
    n = data_eps.n
    rows = np.asarray(contam_fit.h_star)
    return BiasRecord(
        c=c,
        L=float(L),
        epsilon=c / n,
        location_bias=bias_location(clean, contam_fit),
        scatter_bias=bias_scatter(clean, contam_fit),
        h_star_outlier_count=int((rows >= n - c).sum()),
        location_norm=float(np.linalg.norm(contam_fit.location)),
        scatter_lambda1=float(np.linalg.eigvalsh(contam_fit.scatter)[-1]),
        max_h_star_norm=float(np.linalg.norm(data_eps.values[rows], axis=1).max()),
    )


def breakdown_sweep(
    data: Dataset,
    h: int | None = None,
    L_grid=DEFAULT_L_GRID,
    c_range=None,
    cfg: SolverConfig | None = None,
    seed: int = 0,
    *,
    placement: str = "point-mass",
    direction=None,
    jitter_scale: float = 0.0,
    growth_threshold: float = 10.0,
    require_general_position: bool = True,
    threads: int = 1,
) -> SweepResult:
    """Fit every (c, L) contamination cell and locate the first diverging c.

    Location diverges at c when its bias grows by at least
    ``growth_threshold`` between every pair of consecutive L values. Scatter
    diverges when its bias hits ``+inf`` or grows the same way.
    """
    cfg = cfg or SolverConfig()
    n, p = data.n, data.p
    h = subset_size(n, p, h).h
    if c_range is None:
        c_range = range(0, n - h + 2)
    c_values = sorted({int(c) for c in c_range})
    L_values = sorted(float(L) for L in L_grid)
    if require_general_position:
        report = check_general_position(data, allow_sampling=True)
        if not report.in_general_position:
            witness = ",".join(str(i + 1) for i in report.witness)
            raise ValidationError(f"genuine data not in general position (rows {witness})")

    cell_cfg = replace(cfg, threads=1) if threads > 1 else cfg
    clean = fit(data, h, cfg)

    def run(cell):
        c, L = cell
        spec = ContaminationSpec(c=c, L=L, placement=placement, direction=direction,
                                 jitter_scale=jitter_scale)
        data_eps = contaminate(data, spec, seed)
        return _record(clean, fit(data_eps, h, cell_cfg), data_eps, c, L)

    cells = [(c, L) for c in c_values for L in L_values]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            records = list(ex.map(run, cells))
    else:
        records = [run(cell) for cell in cells]

    empirical = None
    diverged_on = None
    for c in c_values:
        rec = [r for r in records if r.c == c]
        loc = _growth([r.location_bias for r in rec], growth_threshold)
        scat_vals = [r.scatter_bias for r in rec]
        scat = any(np.isinf(scat_vals)) or _growth(scat_vals, growth_threshold)
        if c > 0 and (loc or scat):
            empirical = Fraction(c, n)
            diverged_on = "both" if loc and scat else ("location" if loc else "scatter")
            break
    estimate = BreakdownEstimate(
        empirical_breakdown=empirical,
        theoretical=breakdown_bound(n, h).exact,
        diverged_on=diverged_on,
        max_tested=Fraction(max(c_values), n),
    )
    return SweepResult(records, estimate, clean, n, h)


# ---------------------------------------------------------------------------
# Affine equivariance


@dataclass(frozen=True)
class EquivarianceReport:
    passed: bool
    same_subset: bool
    location_error: float
    location_tol: float
    scatter_error: float
    scatter_tol: float
    condition: float
    B: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "same_subset": self.same_subset,
            "location_error": self.location_error,
            "location_tol": self.location_tol,
            "scatter_error": self.scatter_error,
            "scatter_tol": self.scatter_tol,
            "condition": self.condition,
        }


def random_affine(p: int, rng: np.random.Generator, max_condition: float = 1e4):
    """A random non-singular B (condition number <= max_condition) and shift b."""
    while True:
        B = rng.standard_normal((p, p))
        if np.linalg.cond(B) <= max_condition:
            break
    b = rng.standard_normal(p) * 5.0
    return B, b


def equivariance_trial(
    data: Dataset,
    h: int | None = None,
    cfg: SolverConfig | None = None,
    seed: int = 0,
    *,
    B=None,
    b=None,
    rtol: float = 1e-8,
) -> EquivarianceReport:
    """Fit ``X`` and ``B X + b`` with the same configuration and compare."""
    cfg = cfg or SolverConfig()
    rng = np.random.default_rng(seed)
    if B is None or b is None:
        B_rand, b_rand = random_affine(data.p, rng)
        B = B_rand if B is None else B
        b = b_rand if b is None else b
    B = np.asarray(B, dtype=float)
    b = np.asarray(b, dtype=float)
    fit_x = fit(data, h, cfg)
    fit_y = fit(data.transformed(B, b), h, cfg)

    loc_err = float(np.linalg.norm(fit_y.location - (B @ fit_x.location + b)))
    loc_tol = rtol * (1 + float(np.linalg.norm(fit_y.location)))
    scat_err = float(np.linalg.norm(fit_y.scatter - B @ fit_x.scatter @ B.T))
    scat_tol = rtol * (1 + float(np.linalg.norm(fit_y.scatter)))
    same = fit_x.h_star == fit_y.h_star
    return EquivarianceReport(
        passed=bool(same and loc_err <= loc_tol and scat_err <= scat_tol),
        same_subset=same,
        location_error=loc_err,
        location_tol=loc_tol,
        scatter_error=scat_err,
        scatter_tol=scat_tol,
        condition=float(np.linalg.cond(B)),
        B=B,
        b=b,
    )
