"""Command-line interface.

Subcommands: fit, curve, breakdown, equivariance, gp-check, simulate.
Row indices are 1-based in all input and output.

Exit codes:
    0  success
    1  a requested check failed (equivariance trials)
    2  parse error (bad file, bad flag syntax)
    3  validation error (data contract, missing seed, bad subset)
    4  enumeration cap exceeded
    5  numerically degenerate input
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from pcs import __version__
from pcs.breakdown import (
    CSV_HEADER,
    PLACEMENTS,
    breakdown_sweep,
    equivariance_trial,
)
from pcs.dataset import (
    Dataset,
    Tolerances,
    breakdown_bound,
    check_general_position,
    load_csv,
    save_csv,
    subset_size,
)
from pcs.errors import ParseError, PcsError, ValidationError
from pcs.geometry import Direction, enumerate_directions, sample_directions
from pcs.incongruence import incongruence_index
from pcs.simulate import exact_fit_sample, distant_cluster_sample, gaussian_cloud
from pcs.solver import ExactFit, SolverConfig, fit, robust_distances

logger = logging.getLogger("pcs")


# ---------------------------------------------------------------------------
# helpers


def jsonable(obj):
    """Convert numpy values and non-finite floats into JSON-safe Python objects."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dump_json(obj) -> str:
    # Python's float repr is the shortest string that round-trips the double.
    return json.dumps(jsonable(obj), indent=2, allow_nan=False)


def config_hash(config: dict) -> str:
    # the worker count never changes results, so it stays out of the hash
    relevant = {k: v for k, v in config.items() if k != "threads"}
    blob = json.dumps(jsonable(relevant), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def reproducibility(config: dict) -> dict:
    return {"version": __version__, "seed": config.get("seed"), "config_hash": config_hash(config)}


def parse_rows(text: str, n: int) -> tuple[int, ...]:
    """Parse '1,2,5-9' (1-based) into sorted 0-based rows; rejects repeats and range errors."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(v) for v in part.split("-", 1))
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError as exc:
            raise ParseError(f"bad row list {text!r}") from exc
    if len(set(out)) != len(out):
        dup = sorted({i for i in out if out.count(i) > 1})
        raise ValidationError(f"repeated row indices {dup}", rows=dup)
    bad = [i for i in out if not 1 <= i <= n]
    if bad:
        raise ValidationError(f"row indices out of range 1..{n}: {bad}", rows=bad)
    return tuple(sorted(i - 1 for i in out))


def parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ParseError(f"bad number list {text!r}") from exc


def parse_counts(text: str) -> list[int]:
    """'0..8' (inclusive), '9', or '1,3,5'."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ParseError(f"bad count range {text!r}") from exc


def read_config_file(path) -> dict:
    """key = value lines; '#' comments; quotes around values are stripped."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value.strip("\"'")
    return out


def tolerances_from(args) -> Tolerances:
    base = Tolerances()
    return Tolerances(
        dup=base.dup if args.tol_dup is None else args.tol_dup,
        gp=base.gp if args.tol_gp is None else args.tol_gp,
        cond_cap=base.cond_cap if args.cond_cap is None else args.cond_cap,
        fit=base.fit if args.tol_fit is None else args.tol_fit,
        zero=base.zero if args.tol_zero is None else args.tol_zero,
    )


def resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("PCS_SEED")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ValidationError(f"PCS_SEED must be an integer, got {env!r}") from exc
    return None


def solver_config(args) -> SolverConfig:
    return SolverConfig(
        mode=args.mode,
        subset_cap=args.subset_cap,
        direction_cap=args.direction_cap,
        n_starts=args.n_starts,
        n_isteps=args.n_isteps,
        k_directions=args.k_directions,
        seed=resolve_seed(args),
        threads=args.threads,
    )


def load_input(args) -> Dataset:
    header = {"auto": None, "yes": True, "no": False}[args.header]
    return load_csv(
        args.input,
        header,
        allow_duplicates=args.allow_duplicates,
        tolerances=tolerances_from(args),
    )


def emit(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


def info(args, line: str) -> None:
    """Human-readable status; goes to stderr when stdout carries the artifact."""
    stream = sys.stderr if args.output in (None, "-") else sys.stdout
    print(line, file=stream)


def csv_text(header, rows, meta: dict) -> str:
    lines = ["# " + ", ".join(f"{k}={v}" for k, v in meta.items())]
    lines.append(",".join(header))
    lines.extend(",".join(str(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def shift_vector(data: Dataset, seed) -> np.ndarray:
    rng = np.random.default_rng(0 if seed is None else seed)
    spread = float(np.std(data.values, axis=0).mean()) or 1.0
    return -data.values.mean(axis=0) + spread * (1.0 + rng.random(data.p))


def unshift(result, shift: np.ndarray):
    """Map a fit made on ``x + shift`` back to the original coordinates."""
    exact = result.exact_fit
    if exact is not None:
        # y'a = 1 with y = x + s  <=>  x'(a / (1 - s'a)) = 1
        denom = 1.0 - float(shift @ exact.direction.a)
        a = exact.direction.a / denom if abs(denom) > 1e-12 else exact.direction.a
        exact = ExactFit(Direction(a, exact.direction.source_rows), exact.rows)
    diagnostics = dict(result.diagnostics, origin_shift=shift.tolist())
    return replace(result, location=result.location - shift, exact_fit=exact, diagnostics=diagnostics)


def cmd_fit(args) -> int:
    data = load_input(args)
    cfg = solver_config(args)
    hh = subset_size(data.n, data.p, args.h).h
    if args.shift_origin:
        shift = shift_vector(data, cfg.seed)
        shifted = Dataset(data.values + shift, allow_duplicates=True, tolerances=data.tolerances)
        result = unshift(fit(shifted, hh, cfg), shift)
    else:
        result = fit(data, hh, cfg)

    bound = breakdown_bound(data.n, hh)
    config = {"input": str(args.input), **cfg.to_dict(), "shift_origin": args.shift_origin}
    if args.format == "csv":
        dist = None
        if not result.scatter_singular:
            dist = robust_distances(data, result)
        members = set(result.h_star)
        rows = [
            [i + 1, int(i in members), "" if dist is None else repr(float(dist[i]))]
            for i in range(data.n)
        ]
        meta = {"index_base": 1, **reproducibility(config)}
        emit(csv_text(["row", "in_h_star", "robust_distance"], rows, meta), args.output)
    else:
        payload = result.to_dict()
        payload["config"] = config
        payload["breakdown_bound"] = {"exact": str(bound.exact), "value": bound.value}
        payload["reproducibility"] = reproducibility(config)
        emit(dump_json(payload), args.output)

    info(args, f"h = {hh}")
    info(args, f"breakdown bound (n-h+1)/n = {bound.exact} = {bound.value:.6g}")
    info(args, f"index value = {result.index_value!r}")
    if result.exact_fit is not None:
        info(args, f"exact fit: {len(result.exact_fit.rows)} rows on one hyperplane; scatter singular")
    else:
        info(args, "exact fit: none")
    return 0


def _curve_for(data: Dataset, rows, h, cfg: SolverConfig):
    total = math.comb(len(rows), data.p)
    if total <= cfg.direction_cap:
        dirs = enumerate_directions(data, rows, cap=cfg.direction_cap)
    else:
        if cfg.seed is None:
            raise ValidationError("subset too large to enumerate directions; pass --seed to sample")
        dirs = sample_directions(data, rows, cfg.k_directions, seed=cfg.seed, cap=cfg.direction_cap)
    return incongruence_index(data, rows, dirs, h)


def cmd_curve(args) -> int:
    data = load_input(args)
    cfg = solver_config(args)
    hh = subset_size(data.n, data.p, args.h).h
    if not args.subset or len(args.subset) > 2:
        raise ValidationError("give one or two --subset lists")
    subsets = [parse_rows(s, data.n) for s in args.subset]
    for s in subsets:
        if len(s) != hh:
            raise ValidationError(f"subset has {len(s)} rows, expected h={hh}")
    reports = [_curve_for(data, s, hh, cfg) for s in subsets]
    curves = [r.curve() for r in reports]
    config = {"input": str(args.input), "h": hh, "subsets": args.subset, **cfg.to_dict()}
    meta = {"index_base": 1, **reproducibility(config)}

    def fmt(entry):
        k, value, src = entry
        return [k + 1, repr(value), " ".join(str(i + 1) for i in src)]

    if args.format == "json":
        payload = {
            "index_base": 1,
            "h": hh,
            "curves": [
                {"subset": [i + 1 for i in r.subset], "aggregate": r.aggregate,
                 "exhaustive": r.directions.exhaustive,
                 "values": [v for _, v, _ in c]}
                for r, c in zip(reports, curves)
            ],
            "reproducibility": reproducibility(config),
        }
        emit(dump_json(payload), args.output)
    elif len(curves) == 1:
        emit(csv_text(["direction_index", "I_value", "source_rows"],
                      [fmt(e) for e in curves[0]], meta), args.output)
    else:
        length = max(len(c) for c in curves)
        rows = []
        for rank in range(length):
            row = [rank + 1]
            for c in curves:
                row.extend(fmt(c[rank]) if rank < len(c) else ["", "", ""])
            rows.append(row)
        header = ["rank", "direction_index_1", "I_value_1", "source_rows_1",
                  "direction_index_2", "I_value_2", "source_rows_2"]
        emit(csv_text(header, rows, meta), args.output)
    for k, r in enumerate(reports, 1):
        info(args, f"I(H{k}) = {r.aggregate!r}  ({len(r.values)} directions)")
    return 0


def cmd_breakdown(args) -> int:
    cfg = solver_config(args)
    if args.input:
        data = load_input(args)
    else:
        data = Dataset(gaussian_cloud(args.n, args.p, seed=args.data_seed), tolerances=tolerances_from(args))
    hh = subset_size(data.n, data.p, args.h).h
    c_range = parse_counts(args.c) if args.c else None
    direction = parse_floats(args.direction) if args.direction else [1.0] + [0.0] * (data.p - 1)
    result = breakdown_sweep(
        data,
        hh,
        L_grid=parse_floats(args.L_grid),
        c_range=c_range,
        cfg=cfg,
        seed=args.contam_seed,
        placement=args.contam_geometry,
        direction=direction,
        jitter_scale=args.jitter,
        growth_threshold=args.growth_threshold,
        threads=args.threads,
    )
    config = {
        "input": args.input, "n": data.n, "p": data.p, "h": hh, "c": args.c,
        "L_grid": args.L_grid, "contam_geometry": args.contam_geometry,
        "direction": direction, "jitter": args.jitter, "contam_seed": args.contam_seed,
        "data_seed": args.data_seed, **cfg.to_dict(),
    }
    meta = {"index_base": 1, **reproducibility(config)}
    emit(csv_text(CSV_HEADER, [r.csv_row() for r in result.records], meta), args.output)
    summary = {**result.summary(), "config": config, "reproducibility": reproducibility(config)}
    if args.summary:
        emit(dump_json(summary), args.summary)
    info(args, f"theoretical breakdown (n-h+1)/n = {result.estimate.theoretical}")
    info(args, result.estimate.describe())
    return 0


def cmd_equivariance(args) -> int:
    cfg = solver_config(args)
    if args.input:
        data = load_input(args)
    else:
        data = Dataset(gaussian_cloud(args.n, args.p, seed=args.data_seed), tolerances=tolerances_from(args))
    base = 0 if cfg.seed is None else cfg.seed
    reports = [equivariance_trial(data, args.h, cfg, seed=base + t) for t in range(args.trials)]
    lines = []
    for t, r in enumerate(reports):
        lines.append({"trial": t, **r.to_dict()})
    payload = {
        "trials": lines,
        "passed": all(r.passed for r in reports),
        "reproducibility": reproducibility({**cfg.to_dict(), "trials": args.trials,
                                            "input": args.input, "n": data.n, "p": data.p}),
    }
    emit(dump_json(payload), args.output)
    failed = sum(not r.passed for r in reports)
    info(args, f"{len(reports) - failed}/{len(reports)} trials passed")
    return 0 if failed == 0 else 1


def cmd_gp_check(args) -> int:
    data = load_input(args)
    report = check_general_position(
        data, cap=args.cap, allow_sampling=args.sample, seed=resolve_seed(args) or 0
    )
    payload = {
        "index_base": 1,
        "in_general_position": report.in_general_position,
        "witness": None if report.witness is None else [i + 1 for i in report.witness],
        "tol_gp": report.tol_gp,
        "exhaustive": report.exhaustive,
        "checked": report.checked,
    }
    emit(dump_json(payload), args.output)
    verdict = "in general position" if report.in_general_position else "NOT in general position"
    info(args, f"{verdict}{'' if report.exhaustive else ' (sampled, partial)'}")
    return 0


def cmd_simulate(args) -> int:
    seed = args.data_seed
    if args.kind == "gaussian":
        values = gaussian_cloud(args.n, args.p, seed=seed)
        labels = np.zeros(args.n, dtype=bool)
    elif args.kind == "distant-cluster":
        values, labels = distant_cluster_sample(seed)
    else:
        values, labels = exact_fit_sample(seed=seed)
    if args.output in (None, "-"):
        for row in values:
            print(",".join(repr(float(v)) for v in row))
    else:
        save_csv(args.output, values)
    flagged = ",".join(str(i + 1) for i in np.flatnonzero(labels))
    print(f"labelled rows (1-based): {flagged or 'none'}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# parser


def _common(parser: argparse.ArgumentParser, with_output=True) -> None:
    g = parser.add_argument_group("solver")
    g.add_argument("--h", type=int, default=None, help="subset size (default ceil((n+p+1)/2))")
    g.add_argument("--mode", choices=("exact", "randomized"), default="exact")
    g.add_argument("--seed", type=int, default=None, help="RNG seed (PCS_SEED if absent)")
    g.add_argument("--n-starts", type=int, default=500)
    g.add_argument("--n-isteps", type=int, default=3)
    g.add_argument("--k-directions", type=int, default=250)
    g.add_argument("--subset-cap", type=int, default=200_000)
    g.add_argument("--direction-cap", type=int, default=10**6)
    g.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")
    t = parser.add_argument_group("tolerances")
    t.add_argument("--tol-dup", type=float, default=None)
    t.add_argument("--tol-gp", type=float, default=None)
    t.add_argument("--tol-fit", type=float, default=None)
    t.add_argument("--tol-zero", type=float, default=None)
    t.add_argument("--cond-cap", type=float, default=None)
    io = parser.add_argument_group("input/output")
    io.add_argument("--header", choices=("auto", "yes", "no"), default="auto")
    io.add_argument("--allow-duplicates", action="store_true")
    if with_output:
        io.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    io.add_argument("--config", default=None, help="key = value file mirroring the flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcs", description=__doc__.split("\n\n")[0], allow_abbrev=False
    )
    parser.add_argument("--version", action="version", version=f"pcs {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub_kw = {"allow_abbrev": False}

    p = sub.add_parser("fit", **sub_kw, help="fit PCS location and scatter")
    p.add_argument("input")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--shift-origin", action="store_true",
                   help="fit on a seeded shift of the data, then shift estimates back")
    _common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("curve", **sub_kw, help="sorted per-direction incongruence of one or two subsets")
    p.add_argument("input")
    p.add_argument("--subset", action="append", help="1-based rows, e.g. 1-40,45,47")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _common(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("breakdown", **sub_kw, help="contamination sweep")
    p.add_argument("input", nargs="?", default=None)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--c", default=None, help="counts: '0..8', '9' or '1,3,5' (default 0..n-h+1)")
    p.add_argument("--L-grid", dest="L_grid", default="1e3,1e6,1e9")
    p.add_argument("--contam-geometry", choices=PLACEMENTS, default="point-mass")
    p.add_argument("--direction", default=None, help="outlier displacement, e.g. '1,0'")
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--contam-seed", type=int, default=0)
    p.add_argument("--growth-threshold", type=float, default=10.0)
    p.add_argument("--summary", default=None, help="write the JSON summary here")
    _common(p)
    p.set_defaults(func=cmd_breakdown)

    p = sub.add_parser("equivariance", **sub_kw, help="affine equivariance trials")
    p.add_argument("input", nargs="?", default=None)
    p.add_argument("--n", type=int, default=15)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=5)
    _common(p)
    p.set_defaults(func=cmd_equivariance)

    p = sub.add_parser("gp-check", **sub_kw, help="general position check")
    p.add_argument("input")
    p.add_argument("--cap", type=int, default=10**6)
    p.add_argument("--sample", action="store_true", help="sample beyond the cap")
    _common(p)
    p.set_defaults(func=cmd_gp_check)

    p = sub.add_parser("simulate", **sub_kw, help="write a synthetic fixture as CSV")
    p.add_argument("kind", choices=("gaussian", "distant-cluster", "exact-fit"))
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_simulate)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = read_config_file(known.config)
    for action in parser._subparsers._group_actions:
        for subparser in action.choices.values():
            dests = {a.dest for a in subparser._actions}
            unknown = set(values) - dests
            if unknown and subparser.prog.endswith(("fit", "curve", "breakdown")):
                logger.debug("config keys ignored by %s: %s", subparser.prog, sorted(unknown))
            subparser.set_defaults(**{k: v for k, v in values.items() if k in dests})
            for a in subparser._actions:
                if a.dest in values and isinstance(a, argparse._StoreTrueAction):
                    a.default = values[a.dest].lower() in ("1", "true", "yes")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except PcsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PcsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
