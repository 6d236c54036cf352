"""Command-line surface: encode, ladder, gen, depth-stats, pareto, meta.

Exit codes are a stable contract: 0 success, 1 usage error, 2 input
validation, 3 I/O failure, 4 infeasible constraint.  All reports carry a
``schema_version`` and the run manifest; every output except wall-clock
``tau``/``t_*``/``delta_t*`` fields is deterministic.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass

from . import metadata as md
from .errors import FormatError, InfeasibleConstraintError, MrencError, ValidationError
from .frame_io import Sequence, load_sequence, write_y4m
from .metrics import RdPoint, bd_quality, bd_rate, convex_front, depth_agreement, pareto_front
from .multirate import LadderReport, Strategy, Unconstrained, delta_times, encode_sequence, run_ladder
from .partition import CTU_SIZES, DEFAULT_CTU, DEFAULT_MAX_DEPTH, EFFORTS
from .synth import KINDS, generate

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_IO = 3
EXIT_INFEASIBLE = 4


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunManifest:
    input: str | None
    qps: tuple[int, ...]
    strategies: tuple[str, ...]
    ctu: int
    effort: str
    max_total_depth: int
    output: str | None

    def __post_init__(self):
        if list(self.qps) != sorted(set(self.qps)):
            raise ValidationError(f"qps must be sorted ascending and distinct: {self.qps}")
        if not self.strategies:
            raise ValidationError("at least one strategy is required")

    def to_dict(self):
        return {
            "input": self.input,
            "qps": list(self.qps),
            "strategies": list(self.strategies),
            "ctu": self.ctu,
            "effort": self.effort,
            "max_total_depth": self.max_total_depth,
            "output": self.output,
        }


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, _, h = text.lower().partition("x")
        return int(w), int(h)
    except ValueError as exc:
        raise ValidationError(f"size must look like 192x128, got {text!r}") from exc


def _parse_qps(text: str) -> tuple[int, ...]:
    try:
        qps = tuple(int(tok) for tok in text.split(",") if tok)
    except ValueError as exc:
        raise ValidationError(f"qps must be comma-separated integers, got {text!r}") from exc
    if not qps:
        raise ValidationError("empty qp list")
    return qps


def _load_input(args) -> Sequence:
    fmt = args.format
    if fmt is None:
        lower = args.input.lower()
        if lower.endswith(".y4m"):
            fmt = "y4m"
        elif lower.endswith((".yuv", ".raw")):
            fmt = "raw-yuv"
        else:
            fmt = "pgm-glob"
    dims = _parse_size(args.size) if getattr(args, "size", None) else None
    return load_sequence(
        args.input, fmt, dims=dims, raw_layout=args.raw_layout, frame_rate=args.fps
    )


def _metric_value(value: float):
    return None if math.isinf(value) else value


def _rung_dict(rung, meta_name: str | None):
    return {
        "qp": rung.qp,
        "bits": rung.bits,
        "bitrate_bps": rung.bitrate,
        "psnr": _metric_value(rung.psnr),
        "xpsnr_s": _metric_value(rung.xpsnr),
        "lossless": rung.lossless,
        "work_units": rung.work_units,
        "split_bits": rung.split_bits,
        "tau_seconds": rung.tau,
        "meta_file": meta_name,
    }


def _write_json(path: str, payload: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _rd_points(report: LadderReport, metric: str) -> list[RdPoint]:
    return [
        RdPoint(
            bitrate=r.bitrate / 1000.0,
            quality=r.psnr if metric == "psnr" else r.xpsnr,
            label=r.qp,
        )
        for r in report.rungs
    ]


def _bd_cell(fn, anchor, test):
    try:
        return fn(anchor, test)
    except ValidationError:
        return None


def _compare_to_default(report: LadderReport, default: LadderReport) -> dict:
    dt = delta_times(report, default)
    return {
        "bdr_p_pct": _bd_cell(bd_rate, _rd_points(default, "psnr"), _rd_points(report, "psnr")),
        "bdr_x_pct": _bd_cell(bd_rate, _rd_points(default, "xpsnr"), _rd_points(report, "xpsnr")),
        "bd_psnr_db": _bd_cell(
            bd_quality, _rd_points(default, "psnr"), _rd_points(report, "psnr")
        ),
        "bd_xpsnr_s_db": _bd_cell(
            bd_quality, _rd_points(default, "xpsnr"), _rd_points(report, "xpsnr")
        ),
        "delta_work_pct": dt.work,
        "delta_t_serial_pct": dt.serial,
        "delta_t_parallel_pct": dt.parallel,
    }


# ---------------------------------------------------------------- commands


def cmd_gen(args) -> int:
    w, h = _parse_size(args.size)
    seq = generate(args.kind, w, h, args.frames, args.seed)
    write_y4m(seq, args.out)
    print(f"wrote {args.frames} {w}x{h} {args.kind} frame(s) to {args.out}")
    return EXIT_OK


def cmd_encode(args) -> int:
    seq = _load_input(args)
    manifest = RunManifest(
        input=args.input,
        qps=(args.qp,),
        strategies=("default",),
        ctu=args.ctu,
        effort=args.effort,
        max_total_depth=args.max_depth,
        output=args.report,
    )
    rung = encode_sequence(
        seq, args.qp, Unconstrained(), effort=args.effort, ctu=args.ctu,
        max_total_depth=args.max_depth,
    )
    if args.meta:
        with open(args.meta, "wb") as fh:
            fh.write(md.serialize(rung.metadata))
    if args.recon:
        with open(args.recon, "wb") as fh:
            for frame in rung.recon.frames:
                fh.write(frame.samples.tobytes())
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "encode",
        "manifest": manifest.to_dict(),
        **_rung_dict(rung, args.meta),
    }
    if args.report:
        _write_json(args.report, payload)
    else:
        json.dump(payload, sys.stdout, indent=2)
        print()
    return EXIT_OK


def cmd_ladder(args) -> int:
    seq = _load_input(args)
    qps = _parse_qps(args.qps)
    strategies = tuple(s.strip().lower() for s in args.strategy.split(",") if s.strip())
    manifest = RunManifest(
        input=args.input,
        qps=tuple(sorted(qps)),
        strategies=strategies,
        ctu=args.ctu,
        effort=args.effort,
        max_total_depth=args.max_depth,
        output=args.out,
    )
    os.makedirs(args.out, exist_ok=True)

    default_report = None
    if args.compare_default or "default" in strategies:
        default_report = run_ladder(
            seq, qps, Strategy.DEFAULT, effort=args.effort, ctu=args.ctu,
            max_total_depth=args.max_depth, jobs=args.jobs,
        )

    rows = []
    for name in strategies:
        strategy = Strategy(name)
        if strategy == Strategy.DEFAULT and default_report is not None:
            report = default_report
        else:
            report = run_ladder(
                seq, qps, strategy, effort=args.effort, ctu=args.ctu,
                max_total_depth=args.max_depth, jobs=args.jobs,
            )
        rung_entries = []
        for rung in report.rungs:
            meta_name = f"{name}_qp{rung.qp}.cud"
            with open(os.path.join(args.out, meta_name), "wb") as fh:
                fh.write(md.serialize(rung.metadata))
            rung_json = {
                "schema_version": SCHEMA_VERSION,
                "command": "ladder-rung",
                "strategy": name,
                **_rung_dict(rung, meta_name),
            }
            _write_json(os.path.join(args.out, f"{name}_qp{rung.qp}.json"), rung_json)
            rung_entries.append(_rung_dict(rung, meta_name))
        summary = {
            "schema_version": SCHEMA_VERSION,
            "command": "ladder",
            "manifest": manifest.to_dict(),
            "strategy": name,
            "n": report.n,
            "total_work_units": report.total_work_units,
            "rungs": rung_entries,
            "t_serial": report.t_serial,
            "t_parallel": report.t_parallel,
            "t_critical_path": report.t_critical_path,
        }
        if args.compare_default:
            summary["vs_default"] = _compare_to_default(report, default_report)
        _write_json(os.path.join(args.out, f"summary_{name}.json"), summary)
        if args.compare_default:
            comp = summary["vs_default"]
            rows.append(
                {
                    "strategy": name,
                    "bdr_p_pct": comp["bdr_p_pct"],
                    "bdr_x_pct": comp["bdr_x_pct"],
                    "bd_psnr_db": comp["bd_psnr_db"],
                    "bd_xpsnr_s_db": comp["bd_xpsnr_s_db"],
                    "delta_t_serial_pct": comp["delta_t_serial_pct"],
                    "delta_t_parallel_pct": comp["delta_t_parallel_pct"],
                    "delta_work_pct": comp["delta_work_pct"],
                }
            )
        print(
            f"{name}: {report.n} rungs, {report.total_work_units} work units, "
            f"T_S {report.t_serial:.3f}s, T_P {report.t_parallel:.3f}s"
        )
    if args.compare_default and rows:
        table = os.path.join(args.out, "comparison.csv")
        with open(table, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
        print(f"comparison table: {table}")
    return EXIT_OK


def cmd_depth_stats(args) -> int:
    ref_meta = md.deserialize(open(args.ref, "rb").read())
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["file", "equal", "deeper", "shallower", "mean_depth"])
    for path in args.test:
        test_meta = md.deserialize(open(path, "rb").read())
        if (
            test_meta.frame_w != ref_meta.frame_w
            or test_meta.frame_h != ref_meta.frame_h
            or test_meta.ctu != ref_meta.ctu
            or test_meta.frame_count != ref_meta.frame_count
        ):
            raise ValidationError(f"{path}: geometry does not match the reference file")
        equal = deeper = shallower = 0.0
        depth_sum = 0.0
        for k in range(ref_meta.frame_count):
            agreement = depth_agreement(ref_meta.depth_map(k), test_meta.depth_map(k))
            equal += agreement.equal
            deeper += agreement.deeper
            shallower += agreement.shallower
            depth_sum += test_meta.depth_map(k).mean_depth()
        n = ref_meta.frame_count
        writer.writerow(
            [path, f"{equal/n:.6f}", f"{deeper/n:.6f}", f"{shallower/n:.6f}", f"{depth_sum/n:.6f}"]
        )
    text = out.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


_X_COLUMNS = {"deltaTS": "delta_t_serial_pct", "deltaTP": "delta_t_parallel_pct"}
_Y_COLUMNS = {"bdrx": "bdr_x_pct", "bdrp": "bdr_p_pct"}


def cmd_pareto(args) -> int:
    with open(args.points, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise FormatError(f"{args.points}: no data rows")
    xcol = _X_COLUMNS[args.x]
    ycol = _Y_COLUMNS[args.y]
    label_col = next(
        (c for c in ("strategy", "label", "method") if c in rows[0]), None
    )
    if label_col is None or xcol not in rows[0] or ycol not in rows[0]:
        raise FormatError(
            f"{args.points}: need columns {xcol!r}, {ycol!r} and a strategy/label column"
        )
    try:
        points = [(float(r[ycol]), float(r[xcol]), r[label_col]) for r in rows]
    except (ValueError, TypeError) as exc:
        raise FormatError(f"{args.points}: malformed numeric cell ({exc})") from exc
    front, dominated = pareto_front(points)
    hull = convex_front(points)
    front_labels = {p[2] for p in front}
    hull_labels = {p[2] for p in hull}
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "pareto",
        "x": xcol,
        "y": ycol,
        "front": [p[2] for p in front],
        "convex_front": [p[2] for p in hull],
        "dominated": [p[2] for p in dominated],
        "points": [
            {
                "label": lbl,
                "x": x,
                "y": y,
                "on_front": lbl in front_labels,
                "on_convex_front": lbl in hull_labels,
            }
            for (y, x, lbl) in points
        ],
    }
    json.dump(payload, sys.stdout, indent=2)
    print()
    if args.table:
        with open(args.table, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "label", "on_front", "on_convex_front"])
            for (y, x, lbl) in points:
                writer.writerow([x, y, lbl, int(lbl in front_labels), int(lbl in hull_labels)])
    return EXIT_OK


def cmd_meta_dump(args) -> int:
    data = open(args.file, "rb").read()
    meta = md.deserialize(data)
    print(
        f"{args.file}: {meta.frame_w}x{meta.frame_h} ctu {meta.ctu} qp {meta.qp} "
        f"effort {meta.effort} frames {meta.frame_count} ctus {len(meta.trees)}"
    )
    if args.ctu_index is not None:
        tree = md.tree_at(data, args.ctu_index)
        print(f"CTU {args.ctu_index}: " + " ".join(m.name for m in tree.preorder()))
    else:
        for i, tree in enumerate(meta.trees):
            print(f"CTU {i}: " + " ".join(m.name for m in tree.preorder()))
    return EXIT_OK


def cmd_meta_diff(args) -> int:
    a = md.deserialize(open(args.a, "rb").read())
    b = md.deserialize(open(args.b, "rb").read())
    if len(a.trees) != len(b.trees):
        print(f"files differ: {len(a.trees)} vs {len(b.trees)} CTUs")
        return EXIT_OK
    differing = [i for i, (ta, tb) in enumerate(zip(a.trees, b.trees)) if ta != tb]
    for i in differing:
        print(f"CTU {i}: differs")
    if differing:
        print(f"{len(differing)} of {len(a.trees)} CTUs differ")
    else:
        print(f"all {len(a.trees)} CTUs equal")
    return EXIT_OK


# ---------------------------------------------------------------- wiring


def _add_input_flags(p: argparse.ArgumentParser):
    p.add_argument("--input", required=True, help="y4m / raw yuv / pgm glob")
    p.add_argument("--format", choices=["y4m", "raw-yuv", "pgm-glob"], default=None,
                   help="override input format detection")
    p.add_argument("--size", default=None, help="WxH, required for raw input")
    p.add_argument("--raw-layout", choices=["yuv420", "luma"], default="yuv420")
    p.add_argument("--fps", type=float, default=30.0, help="frame rate for raw/pgm input")


def _add_codec_flags(p: argparse.ArgumentParser):
    p.add_argument("--ctu", type=int, choices=list(CTU_SIZES), default=DEFAULT_CTU)
    p.add_argument("--effort", choices=list(EFFORTS), default="thorough")
    p.add_argument("--max-depth", type=int, default=DEFAULT_MAX_DEPTH,
                   help="total split budget per CTU (thorough searches grow fast with depth)")


def build_parser() -> _Parser:
    parser = _Parser(prog="mrenc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[], help="generate synthetic test content")
    p.add_argument("--kind", choices=list(KINDS), required=True)
    p.add_argument("--size", required=True, help="WxH")
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True, help="output .y4m path")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("encode", help="single constant-QP encode")
    _add_input_flags(p)
    _add_codec_flags(p)
    p.add_argument("--qp", type=int, required=True)
    p.add_argument("--meta", default=None, help="write partition metadata (.cud)")
    p.add_argument("--report", default=None, help="write the report JSON here (default stdout)")
    p.add_argument("--recon", default=None, help="write raw luma reconstruction")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("ladder", help="multi-rate ladder under one or more strategies")
    _add_input_flags(p)
    _add_codec_flags(p)
    p.add_argument("--qps", required=True, help="comma-separated, e.g. 22,27,32,37,42")
    p.add_argument("--strategy", required=True,
                   help="comma-separated subset of default,tdp,bup,bcp,ahp,ftdr,fbur")
    p.add_argument("--compare-default", action="store_true",
                   help="also run Default and emit BD/delta-time comparisons")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int,
                   default=int(os.environ.get("MRENC_JOBS", "0")) or None,
                   help="max concurrent rungs (default: rung count; env MRENC_JOBS)")
    p.set_defaults(func=cmd_ladder)

    p = sub.add_parser("depth-stats", help="depth agreement of .cud files against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", nargs="+", required=True)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_depth_stats)

    p = sub.add_parser("pareto", help="Pareto-front analysis of a comparison CSV")
    p.add_argument("--points", required=True, help="CSV with strategy + metric columns")
    p.add_argument("--x", choices=list(_X_COLUMNS), default="deltaTS")
    p.add_argument("--y", choices=list(_Y_COLUMNS), default="bdrx")
    p.add_argument("--table", default=None, help="also write a plot-ready CSV table")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("meta", help="inspect .cud metadata files")
    meta_sub = p.add_subparsers(dest="meta_command", required=True)
    d = meta_sub.add_parser("dump", help="print header and per-CTU split modes")
    d.add_argument("file")
    d.add_argument("--ctu-index", type=int, default=None)
    d.set_defaults(func=cmd_meta_dump)
    d = meta_sub.add_parser("diff", help="compare two metadata files CTU by CTU")
    d.add_argument("a")
    d.add_argument("b")
    d.set_defaults(func=cmd_meta_diff)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleConstraintError as exc:
        print(f"mrenc: infeasible constraint: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (FormatError, ValidationError) as exc:
        print(f"mrenc: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"mrenc: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MrencError as exc:
        print(f"mrenc: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
