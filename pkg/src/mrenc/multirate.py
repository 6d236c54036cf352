"""Encoding-ladder orchestration for the seven depth-reuse strategies.

A ladder encodes one sequence at several QPs.  Reference rungs run
unconstrained; dependent rungs receive depth bounds or replay trees from
their reference per the strategy.  Rungs execute as a dependency DAG on a
bounded worker pool; everything except wall-clock times is deterministic.

Naming: the HQ rung is the lowest QP (highest bitrate), the LQ rung the
highest QP.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from enum import Enum
from graphlib import TopologicalSorter

import numpy as np

from .codec_core import QpParams
from .errors import ValidationError
from .frame_io import Plane, Sequence
from .metadata import MetadataFile
from .metrics import psnr, xpsnr_simplified
from .partition import (
    ConstraintSpec,
    DepthMap,
    DoubleBound,
    ForceReplay,
    LowerBound,
    Unconstrained,
    UpperBound,
    check_constraint,
    ctu_grid,
    depth_map_of,
)
from .rdo import replay_ctu, search_ctu


class Strategy(str, Enum):
    DEFAULT = "default"
    TDP = "tdp"      # upper bound from the HQ encode
    BUP = "bup"      # lower bound from the LQ encode
    BCP = "bcp"      # HQ first, then LQ under its bound, intermediates double-bounded
    AHP = "ahp"      # LQ first, then HQ above its floor, intermediates double-bounded
    FTDR = "ftdr"    # replay the HQ trees verbatim
    FBUR = "fbur"    # replay the LQ trees verbatim


@dataclass(frozen=True)
class RungPlan:
    """How one rung is constrained and which rungs must complete first."""

    qp: int
    depends_on: tuple[int, ...]
    kind: str  # none | upper | lower | double | force
    upper_ref: int | None = None
    lower_ref: int | None = None
    force_ref: int | None = None


@dataclass(frozen=True)
class RungResult:
    qp: int
    bits: int
    bitrate: float  # bits/second at the declared frame rate
    psnr: float
    xpsnr: float
    tau: float  # wall-clock seconds
    work_units: int
    split_bits: int
    metadata: MetadataFile
    depth_maps: tuple[DepthMap, ...]  # one per frame
    recon: Sequence

    @property
    def lossless(self) -> bool:
        return self.psnr == float("inf")


@dataclass(frozen=True)
class LadderReport:
    strategy: Strategy
    rungs: tuple[RungResult, ...]  # ordered by qp ascending
    t_serial: float
    t_parallel: float
    t_critical_path: float

    @property
    def n(self) -> int:
        return len(self.rungs)

    @property
    def total_work_units(self) -> int:
        return sum(r.work_units for r in self.rungs)

    def rung(self, qp: int) -> RungResult:
        for r in self.rungs:
            if r.qp == qp:
                return r
        raise ValidationError(f"no rung at qp {qp}")


def plan(strategy: Strategy | str, qps: list[int] | tuple[int, ...]) -> tuple[RungPlan, ...]:
    """Dependency plan for a ladder, rungs ordered by qp ascending."""
    qps = sorted(qps)
    if len(qps) < 2:
        raise ValidationError(f"a ladder needs at least 2 QPs, got {len(qps)}")
    if len(set(qps)) != len(qps):
        raise ValidationError(f"duplicate QPs in ladder: {qps}")
    hq, lq = qps[0], qps[-1]  # hq = highest bitrate = lowest qp
    strategy = Strategy(strategy)
    plans = []
    for qp in qps:
        if strategy == Strategy.DEFAULT:
            p = RungPlan(qp, (), "none")
        elif strategy == Strategy.TDP:
            p = (
                RungPlan(qp, (), "none")
                if qp == hq
                else RungPlan(qp, (hq,), "upper", upper_ref=hq)
            )
        elif strategy == Strategy.BUP:
            p = (
                RungPlan(qp, (), "none")
                if qp == lq
                else RungPlan(qp, (lq,), "lower", lower_ref=lq)
            )
        elif strategy == Strategy.BCP:
            if qp == hq:
                p = RungPlan(qp, (), "none")
            elif qp == lq:
                p = RungPlan(qp, (hq,), "upper", upper_ref=hq)
            else:
                p = RungPlan(qp, (hq, lq), "double", upper_ref=hq, lower_ref=lq)
        elif strategy == Strategy.AHP:
            if qp == lq:
                p = RungPlan(qp, (), "none")
            elif qp == hq:
                p = RungPlan(qp, (lq,), "lower", lower_ref=lq)
            else:
                p = RungPlan(qp, (lq, hq), "double", upper_ref=hq, lower_ref=lq)
        elif strategy == Strategy.FTDR:
            p = (
                RungPlan(qp, (), "none")
                if qp == hq
                else RungPlan(qp, (hq,), "force", force_ref=hq)
            )
        else:  # FBUR
            p = (
                RungPlan(qp, (), "none")
                if qp == lq
                else RungPlan(qp, (lq,), "force", force_ref=lq)
            )
        plans.append(p)
    return tuple(plans)


def _frame_spec(
    rung_plan: RungPlan, refs: dict[int, RungResult], frame: int, ctu: int
) -> ConstraintSpec:
    if rung_plan.kind == "none":
        return Unconstrained()
    if rung_plan.kind == "upper":
        return UpperBound(refs[rung_plan.upper_ref].depth_maps[frame])
    if rung_plan.kind == "lower":
        return LowerBound(refs[rung_plan.lower_ref].depth_maps[frame])
    if rung_plan.kind == "double":
        return DoubleBound(
            lower=refs[rung_plan.lower_ref].depth_maps[frame],
            upper=refs[rung_plan.upper_ref].depth_maps[frame],
        )
    if rung_plan.kind == "force":
        ref = refs[rung_plan.force_ref]
        return ForceReplay(ref.metadata.trees_for_frame(frame), ctu=ctu)
    raise ValidationError(f"unknown plan kind {rung_plan.kind!r}")


def encode_sequence(
    seq: Sequence,
    qp: int,
    specs: list[ConstraintSpec] | ConstraintSpec,
    effort: str = "thorough",
    ctu: int = 64,
    max_total_depth: int = 6,
) -> RungResult:
    """Encode every frame of a sequence at one QP under per-frame constraints.

    ``specs`` may be a single spec applied to all frames or one per frame.
    Every frame's resulting depth map is checked against its spec; a
    violation is a hard error, not a warning.
    """
    if not isinstance(specs, (list, tuple)):
        specs = [specs] * len(seq.frames)
    if len(specs) != len(seq.frames):
        raise ValidationError(f"{len(specs)} specs for {len(seq.frames)} frames")
    regions = ctu_grid(seq.width, seq.height, ctu)
    params = QpParams.from_qp(qp)

    start = time.perf_counter()
    bits = work = split_bits = 0
    all_trees = []
    depth_maps = []
    recon_frames = []
    for frame, spec in zip(seq.frames, specs):
        recon = Plane(frame.width, frame.height, np.zeros_like(frame.samples))
        frame_trees = []
        for idx, region in enumerate(regions):
            if isinstance(spec, ForceReplay):
                result = replay_ctu(frame, region, params, spec.trees[idx], recon)
            else:
                result = search_ctu(frame, region, params, spec, effort, max_total_depth, recon)
            frame_trees.append(result.tree)
            bits += result.cost.r
            split_bits += result.split_bits
            work += result.work_units
        dm = depth_map_of(frame_trees, seq.width, seq.height, ctu)
        violations = check_constraint(dm, spec)
        if violations:
            raise ValidationError(
                f"encode at qp {qp} violated its constraint at {len(violations)} positions "
                f"(first: {violations[0]})"
            )
        all_trees.extend(frame_trees)
        depth_maps.append(dm)
        recon_frames.append(recon)
    tau = time.perf_counter() - start

    recon_seq = Sequence(tuple(recon_frames), frame_rate=seq.frame_rate)
    meta = MetadataFile(
        frame_w=seq.width,
        frame_h=seq.height,
        ctu=ctu,
        qp=qp,
        effort=effort,
        trees=tuple(all_trees),
    )
    return RungResult(
        qp=qp,
        bits=bits,
        bitrate=bits * seq.frame_rate / len(seq.frames),
        psnr=psnr(seq, recon_seq),
        xpsnr=xpsnr_simplified(seq, recon_seq),
        tau=tau,
        work_units=work,
        split_bits=split_bits,
        metadata=meta,
        depth_maps=tuple(depth_maps),
        recon=recon_seq,
    )


def run_ladder(
    seq: Sequence,
    qps: list[int] | tuple[int, ...],
    strategy: Strategy | str,
    effort: str = "thorough",
    ctu: int = 64,
    max_total_depth: int = 6,
    jobs: int | None = None,
) -> LadderReport:
    """Execute a full ladder under one strategy, respecting its dependency DAG."""
    strategy = Strategy(strategy)
    rung_plans = {p.qp: p for p in plan(strategy, qps)}
    if jobs is None:
        jobs = len(rung_plans)
    jobs = max(1, jobs)

    results: dict[int, RungResult] = {}
    sorter = TopologicalSorter({qp: set(p.depends_on) for qp, p in rung_plans.items()})
    sorter.prepare()
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        while sorter.is_active():
            futures = {}
            for qp in sorter.get_ready():
                p = rung_plans[qp]
                specs = [_frame_spec(p, results, k, ctu) for k in range(len(seq.frames))]
                fut = pool.submit(encode_sequence, seq, qp, specs, effort, ctu, max_total_depth)
                futures[fut] = qp
            for fut in as_completed(futures):
                qp = futures[fut]
                results[qp] = fut.result()
                sorter.done(qp)

    taus = {qp: r.tau for qp, r in results.items()}
    critical = _critical_paths(rung_plans, taus)
    return LadderReport(
        strategy=strategy,
        rungs=tuple(results[qp] for qp in sorted(results)),
        t_serial=sum(taus.values()),
        t_parallel=max(taus.values()),
        t_critical_path=max(critical.values()),
    )


def _critical_paths(rung_plans: dict[int, RungPlan], taus: dict[int, float]) -> dict[int, float]:
    """Longest-path finishing time of each rung through the dependency DAG."""
    memo: dict[int, float] = {}

    def finish(qp: int) -> float:
        if qp not in memo:
            deps = rung_plans[qp].depends_on
            memo[qp] = taus[qp] + (max(finish(d) for d in deps) if deps else 0.0)
        return memo[qp]

    return {qp: finish(qp) for qp in rung_plans}


@dataclass(frozen=True)
class DeltaTimes:
    """Relative differences vs the Default ladder, in percent."""

    serial: float
    parallel: float
    work: float


def delta_times(method: LadderReport, default: LadderReport) -> DeltaTimes:
    """Percent change of serial time, parallel time, and total work vs Default."""
    if [r.qp for r in method.rungs] != [r.qp for r in default.rungs]:
        raise ValidationError("ladders cover different QP sets")
    return DeltaTimes(
        serial=100.0 * (method.t_serial - default.t_serial) / default.t_serial,
        parallel=100.0 * (method.t_parallel - default.t_parallel) / default.t_parallel,
        work=100.0
        * (method.total_work_units - default.total_work_units)
        / default.total_work_units,
    )
