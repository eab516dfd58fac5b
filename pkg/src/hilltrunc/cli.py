"""Command-line front end.

Usage: ``hilltrunc SUBCOMMAND MODEL_FILE [options]``.

Model files are line-oriented ``key = value`` text; ``#`` starts a comment.
Recognized keys:

    model          FreeParticle | ConstantShift | KronigPenney | Mathieu | PiecewiseConstant
    period         cell length a > 0
    v0             ConstantShift level
    barrier_height KronigPenney barrier value of q
    barrier_width  KronigPenney barrier width, barrier on [0, barrier_width)
    amplitude      Mathieu amplitude A in q = A cos(2 pi x / a)
    segment        width,p,q,s   (PiecewiseConstant; repeat once per piece, in order)
    s_min          optional declared lower bound for s

Each subcommand writes one artifact (CSV or JSON) and prints a short summary.
Exit codes: 0 success, 1 invalid input, 2 computation failure, 3 oracle FAIL.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, oracle, propagate, spectrum, truncated
from .coeffs import (ConstantShift, FreeParticle, InvalidCoefficients, KronigPenney, Mathieu,
                     PeriodicCoefficients, PiecewiseConstant, Segment, validate)

EXIT_OK, EXIT_INVALID, EXIT_COMPUTE, EXIT_ORACLE_FAIL = 0, 1, 2, 3

MODEL_KEYS = {
    "FreeParticle": (),
    "ConstantShift": ("v0",),
    "KronigPenney": ("barrier_height", "barrier_width"),
    "Mathieu": ("amplitude",),
    "PiecewiseConstant": (),
}
COMMON_KEYS = ("model", "period", "s_min")


class UsageError(Exception):
    """Bad flags, malformed config or out-of-range parameters (exit 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- config -----------------------------------------------------------------

def parse_config(text: str, source: str = "<config>") -> tuple[PeriodicCoefficients, dict]:
    """Parse model-file text into coefficients plus the canonical key/value
    record used for provenance hashing."""
    values: dict[str, str] = {}
    segments: list[Segment] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise UsageError(f"{source}:{lineno}: empty key")
        if key == "segment":
            parts = [v.strip() for v in value.split(",")]
            if len(parts) != 4:
                raise UsageError(f"{source}:{lineno}: field 'segment' needs 4 values width,p,q,s")
            segments.append(Segment(*(_number(f"segment[{len(segments)}]", v) for v in parts)))
            continue
        if key in values:
            raise UsageError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value

    if "model" not in values:
        raise UsageError(f"{source}: missing field 'model'")
    name = values["model"]
    if name not in MODEL_KEYS:
        raise UsageError(f"{source}: field 'model' must be one of {', '.join(MODEL_KEYS)}, got {name!r}")
    allowed = set(COMMON_KEYS) | set(MODEL_KEYS[name])
    for key in values:
        if key not in allowed:
            raise UsageError(f"{source}: field {key!r} is not valid for model {name}")
    if segments and name != "PiecewiseConstant":
        raise UsageError(f"{source}: field 'segment' is only valid for PiecewiseConstant")
    if "period" not in values:
        raise UsageError(f"{source}: missing field 'period'")
    for key in MODEL_KEYS[name]:
        if key not in values:
            raise UsageError(f"{source}: missing field {key!r} for model {name}")
    nums = {k: _number(k, v) for k, v in values.items() if k != "model"}

    if name == "FreeParticle":
        model = FreeParticle()
    elif name == "ConstantShift":
        model = ConstantShift(nums["v0"])
    elif name == "KronigPenney":
        model = KronigPenney(nums["barrier_height"], nums["barrier_width"])
    elif name == "Mathieu":
        model = Mathieu(nums["amplitude"])
    else:
        if not segments:
            raise UsageError(f"{source}: field 'segment' required for PiecewiseConstant")
        model = PiecewiseConstant(tuple(segments))
    coeffs = PeriodicCoefficients(nums["period"], model, nums.get("s_min"))

    record = {"model": name, **{k: nums[k] for k in sorted(nums)}}
    if segments:
        record["segments"] = [list(seg) for seg in segments]
    return coeffs, record


def _number(field, text):
    try:
        value = float(text)
    except ValueError:
        raise UsageError(f"field {field!r}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise UsageError(f"field {field!r}: must be finite, got {text!r}")
    return value


def load_config(path: str) -> tuple[PeriodicCoefficients, dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"field 'model_file': cannot read {path!r}: {exc.strerror}") from None
    return parse_config(text, path)


# --- output -----------------------------------------------------------------

def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if hasattr(value, "value"):  # enums
        return value.value
    return value


def meta_block(record: dict, params: dict) -> dict:
    canonical = json.dumps(record, sort_keys=True, separators=(",", ":"))
    return {
        "version": __version__,
        "model": record,
        "model_hash": hashlib.sha256(canonical.encode()).hexdigest(),
        "parameters": params,
        "tolerances": {
            "propagate_rtol": propagate.RTOL,
            "propagate_atol": propagate.ATOL,
            "degeneracy_rtol": spectrum.DEGENERACY_RTOL,
            "edge_rho_tol": truncated.EDGE_RHO_TOL,
            "oracle_bisect_rtol": oracle.BISECT_RTOL,
        },
    }


def write_artifact(path: Path, fmt_name: str, columns, rows, meta: dict, extra: dict | None = None):
    if fmt_name == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
        path.write_text(buf.getvalue(), encoding="utf-8")
    else:
        doc = {"meta": meta}
        if extra:
            doc.update(extra)
        doc["records"] = [dict(zip(columns, row)) for row in rows]
        path.write_text(json.dumps(_jsonable(doc), indent=2) + "\n", encoding="utf-8")


# --- subcommands ------------------------------------------------------------

def _require(cond, field, message):
    if not cond:
        raise UsageError(f"field {field!r}: {message}")


def cmd_validate(coeffs, args):
    report = validate(coeffs)
    rows = [(report.accepted, report.s_min, "; ".join(report.reasons))]
    summary = "accepted" if report.accepted else "rejected: " + "; ".join(report.reasons)
    extra = {"accepted": report.accepted, "reasons": list(report.reasons)}
    code = EXIT_OK if report.accepted else EXIT_INVALID
    return ("accepted", "s_min", "reasons"), rows, extra, summary, code


def cmd_discriminant_scan(coeffs, args):
    _require(args.lmax > args.lmin, "lmax", "must exceed lmin")
    _require(args.points >= 2, "points", "must be >= 2")
    lams = np.linspace(args.lmin, args.lmax, args.points)
    d = propagate.discriminant_many(coeffs, lams)
    rows = list(zip(lams.tolist(), d.tolist()))
    stable = int(np.count_nonzero(np.abs(d) < 2))
    return ("lambda", "D"), rows, None, f"{len(rows)} points, {stable} inside bands", EXIT_OK


def cmd_band_edges(coeffs, args):
    _require(args.gaps >= 1, "gaps", "must be >= 1")
    edges = spectrum.find_band_edges(coeffs, args.gaps)
    rows = [(e.index, e.kind, e.lam, e.degenerate) for e in edges.edges()]
    lines = [f"gap {k}: [{g.lower:.10g}, {g.upper:.10g}]" + (" degenerate" if g.degenerate else "")
             for k in range(args.gaps) for g in [edges.gap(k)]]
    return ("index", "kind", "lambda", "degenerate"), rows, None, "\n".join(lines), EXIT_OK


def cmd_band_states(coeffs, args):
    _require(args.band >= 0, "band", "must be >= 0")
    _require(args.cells >= 1, "cells", "must be >= 1")
    states = truncated.band_states(coeffs, args.band, args.cells)
    rows = [(s.j, s.lam) for s in states]
    return ("j", "lambda"), rows, None, f"band {args.band}: {len(rows)} states for N={args.cells}", EXIT_OK


def cmd_gap_states(coeffs, args):
    _require(args.gap >= 0, "gap", "must be >= 0")
    edges = spectrum.find_band_edges(coeffs, args.gap + 1)
    st = truncated.gap_state(coeffs, edges.gap(args.gap), args.tau)
    rows = [(st.gap_index, st.kind, st.lam, st.multiplier_rho, st.subtype.value, st.tau)]
    summary = f"gap {st.gap_index} at tau={st.tau:g}: lambda={st.lam:.12g}, rho={st.multiplier_rho:.6g}, {st.subtype.value}"
    return ("gap", "kind", "lambda", "rho", "subtype", "tau"), rows, None, summary, EXIT_OK


def _spectrum_rows(sp):
    rows = []
    for s in sp.merged:
        if isinstance(s, truncated.BandState):
            rows.append((s.lam, "band", s.band_index, s.j, None))
        else:
            rows.append((s.lam, "gap", s.gap_index, s.subtype.value, s.multiplier_rho))
    return rows


def cmd_spectrum(coeffs, args):
    _require(args.cells >= 1, "cells", "must be >= 1")
    _require(args.bands >= 1, "bands", "must be >= 1")
    cfg = truncated.TruncationConfig(args.tau, args.cells, coeffs.period_a)
    sp = truncated.classify_spectrum(coeffs, cfg, args.bands)
    rows = _spectrum_rows(sp)
    summary = (f"{len(sp.band_states)} band states, {len(sp.gap_states)} gap states "
               f"below lambda_cap={sp.lambda_cap:.10g}")
    extra = {"lambda_cap": sp.lambda_cap}
    return ("lambda", "type", "band_or_gap_index", "j_or_subtype", "rho_or_blank"), rows, extra, summary, EXIT_OK


def cmd_tau_sweep(coeffs, args):
    _require(args.gap >= 0, "gap", "must be >= 0")
    _require(args.points >= 64, "points", "must be >= 64")
    edges = spectrum.find_band_edges(coeffs, args.gap + 1)
    sw = truncated.tau_sweep(coeffs, edges.gap(args.gap), args.tau0, args.points)
    rows = [(t, lam, st.value) for t, lam, st in zip(sw.tau_grid.tolist(), sw.lambdas.tolist(), sw.subtypes)]
    extra = {
        "gap": {"index": sw.gap.index, "kind": sw.gap.kind, "lower": sw.gap.lower, "upper": sw.gap.upper},
        "ups_and_downs": sw.extrema_count,
        "touches": [{"tau": t.tau, "lambda": t.lam, "edge": t.edge} for t in sw.touches],
    }
    summary = (f"gap {sw.gap_index}: {sw.extrema_count} up-down(s), {len(sw.touches)} edge touch(es), "
               f"lambda in [{sw.lambda_min:.10g}, {sw.lambda_max:.10g}]")
    return ("tau", "lambda", "subtype"), rows, extra, summary, EXIT_OK


def cmd_eigenfunction(coeffs, args):
    _require(args.cells >= 1, "cells", "must be >= 1")
    _require(args.grid_per_cell >= 8, "grid-per-cell", "must be >= 8")
    cfg = truncated.TruncationConfig(args.tau, args.cells, coeffs.period_a)
    ef = truncated.eigenfunction(coeffs, args.lam, cfg, args.grid_per_cell)
    s = ef.samples
    rows = list(zip(s.grid.tolist(), s.values_y.tolist(), s.values_py.tolist()))
    extra = {"lambda": args.lam, "endpoint_residual": ef.endpoint_residual,
             "mass_first_cell": ef.mass_first_cell, "mass_last_cell": ef.mass_last_cell}
    summary = (f"lambda={args.lam:.12g}: endpoint residual {ef.endpoint_residual:.2e}, "
               f"first-cell mass {ef.mass_first_cell:.4g}, last-cell mass {ef.mass_last_cell:.4g}")
    return ("x", "y", "py"), rows, extra, summary, EXIT_OK


def cmd_oracle_check(coeffs, args):
    _require(args.cells >= 1, "cells", "must be >= 1")
    _require(args.bands >= 1, "bands", "must be >= 1")
    gridsize = args.gridsize if args.gridsize is not None else oracle.DEFAULT_GRIDSIZE_PER_CELL * args.cells
    _require(gridsize >= oracle.MIN_POINTS_PER_CELL * args.cells, "gridsize",
             f"must be >= {oracle.MIN_POINTS_PER_CELL} per cell")
    _require(gridsize % args.cells == 0, "gridsize", "must be a multiple of cells")
    _require(args.rel_tol > 0, "rel-tol", "must be positive")
    cfg = truncated.TruncationConfig(args.tau, args.cells, coeffs.period_a)
    sp = truncated.classify_spectrum(coeffs, cfg, args.bands)
    orc = oracle.oracle_spectrum(coeffs, args.tau, args.cells, gridsize, sp.lambda_cap,
                                 extrapolate=not args.no_richardson)
    rep = oracle.compare(orc.values, sp, args.rel_tol)
    rows = [(m.label, m.predicted, m.oracle, m.rel_err) for m in rep.matches]
    extra = {
        "status": rep.status,
        "worst_rel_err": rep.worst_rel_err,
        "rel_tol": rep.rel_tol,
        "n_predicted": rep.n_predicted,
        "n_oracle": rep.n_oracle,
        "lambda_cap": sp.lambda_cap,
        "gridsize": gridsize,
        "richardson": not args.no_richardson,
        "unmatched_predicted": list(rep.unmatched_predicted),
        "unmatched_oracle": list(rep.unmatched_oracle),
        "message": rep.message,
    }
    summary = f"{rep.status}: {rep.n_predicted} predicted, {rep.n_oracle} oracle, worst rel err {rep.worst_rel_err:.3e}"
    if rep.message:
        summary += f"\n{rep.message}"
    code = EXIT_OK if rep.passed else EXIT_ORACLE_FAIL
    return ("state", "predicted", "oracle", "rel_err"), rows, extra, summary, code


COMMANDS = {
    "validate": cmd_validate,
    "discriminant-scan": cmd_discriminant_scan,
    "band-edges": cmd_band_edges,
    "band-states": cmd_band_states,
    "gap-states": cmd_gap_states,
    "spectrum": cmd_spectrum,
    "tau-sweep": cmd_tau_sweep,
    "eigenfunction": cmd_eigenfunction,
    "oracle-check": cmd_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hilltrunc", description="Truncated spectrum of Hill's equation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("model_file", help="model definition file (key = value lines)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--output", help="artifact path (default: <subcommand>.<format>)")
        return p

    add("validate", "check the coefficient hypotheses")
    p = add("discriminant-scan", "tabulate D(lambda) on a uniform grid")
    p.add_argument("--lmin", type=float, required=True)
    p.add_argument("--lmax", type=float, required=True)
    p.add_argument("--points", type=int, default=201)
    p = add("band-edges", "periodic and semi-periodic eigenvalues")
    p.add_argument("--gaps", type=int, default=3)
    p = add("band-states", "the N - 1 truncated eigenvalues of one band")
    p.add_argument("--band", type=int, required=True)
    p.add_argument("--cells", type=int, required=True)
    p = add("gap-states", "the truncated eigenvalue of one gap")
    p.add_argument("--gap", type=int, required=True)
    p.add_argument("--tau", type=float, default=0.0)
    p = add("spectrum", "classified truncated spectrum")
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--cells", type=int, required=True)
    p.add_argument("--bands", type=int, default=3)
    p = add("tau-sweep", "gap-state eigenvalue over one period of tau")
    p.add_argument("--gap", type=int, required=True)
    p.add_argument("--points", type=int, default=512)
    p.add_argument("--tau0", type=float, default=0.0)
    p = add("eigenfunction", "normalized eigenfunction samples")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--cells", type=int, required=True)
    p.add_argument("--grid-per-cell", type=int, default=truncated.DEFAULT_GRID_PER_CELL)
    p = add("oracle-check", "compare the classified spectrum with the finite-difference oracle")
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--cells", type=int, required=True)
    p.add_argument("--bands", type=int, default=3)
    p.add_argument("--gridsize", type=int, default=None,
                   help=f"interior grid points (default {oracle.DEFAULT_GRIDSIZE_PER_CELL} per cell)")
    p.add_argument("--rel-tol", type=float, default=1e-4)
    p.add_argument("--no-richardson", action="store_true")
    return parser


COMPUTE_ERRORS = (ArithmeticError, RuntimeError, truncated.StaleEigenvalue,
                  spectrum.OutsideBand, spectrum.InsideBand, spectrum.StaleEdge)


def run(argv=None, stdout=None) -> int:
    out = stdout or sys.stdout
    err = sys.stderr
    try:
        args = build_parser().parse_args(argv)
        coeffs, record = load_config(args.model_file)
        if args.command != "validate":
            report = validate(coeffs)
            if not report.accepted:
                raise InvalidCoefficients("; ".join(report.reasons))
        params = {k: v for k, v in sorted(vars(args).items())
                  if k not in ("command", "model_file", "format", "output")}
        columns, rows, extra, summary, code = COMMANDS[args.command](coeffs, args)
    except (UsageError, InvalidCoefficients) as exc:
        print(f"hilltrunc: error: {exc}", file=err)
        return EXIT_INVALID
    except COMPUTE_ERRORS as exc:
        print(f"hilltrunc: computation failed: {exc}", file=err)
        return EXIT_COMPUTE

    path = Path(args.output or f"{args.command}.{args.format}")
    write_artifact(path, args.format, columns, rows, meta_block(record, params), extra)
    print(summary, file=out)
    print(f"wrote {path}", file=out)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
