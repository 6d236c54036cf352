"""RD-optimized partition search over one CTU under a depth constraint.

The search is an exhaustive recursion over admissible candidates.  A lower
bound prunes NS at regions the reference split deeper; an upper bound
prunes splits the reference never made.  Candidates are evaluated on
scratch state and the winner committed, so results never depend on
evaluation order.  ``work_units`` counts (region, intra-mode) evaluations
and is the machine-independent complexity proxy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codec_core import QpParams, RdCost, code_leaf
from .errors import InfeasibleConstraintError, ValidationError
from .frame_io import Plane
from .partition import (
    GRID,
    ConstraintSpec,
    CuRegion,
    DoubleBound,
    ForceReplay,
    LowerBound,
    NS_LEAF,
    PartitionTree,
    SplitMode,
    Unconstrained,
    UpperBound,
    child_regions,
    leaf_regions,
    legal_splits,
)


@dataclass(frozen=True)
class SearchResult:
    tree: PartitionTree
    cost: RdCost
    work_units: int
    split_bits: int


def _bound_arrays(spec: ConstraintSpec) -> tuple[np.ndarray | None, np.ndarray | None]:
    if isinstance(spec, Unconstrained):
        return None, None
    if isinstance(spec, UpperBound):
        return None, spec.bound.depths
    if isinstance(spec, LowerBound):
        return spec.bound.depths, None
    if isinstance(spec, DoubleBound):
        return spec.lower.depths, spec.upper.depths
    raise ValidationError(f"search_ctu cannot run under {type(spec).__name__}")


def _search_rec(source, region, qp, lower, upper, effort, max_total_depth, recon, dead):
    """Best admissible subtree for ``region`` as (tree, d, r, split_bits, work),
    or None when the constraint admits no completion here (recorded in dead)."""
    x, y, w, h, depth = region.x, region.y, region.w, region.h, region.depth
    gslice = (slice(y // GRID, (y + h) // GRID), slice(x // GRID, (x + w) // GRID))

    candidates = legal_splits(region, effort, max_total_depth)
    # lower bound: NS not allowed where the reference went deeper
    if lower is not None and int(lower[gslice].max()) > depth:
        candidates = [m for m in candidates if m != SplitMode.NS]
    # upper bound: splits not allowed where the reference stayed shallower
    if upper is not None and candidates and int(upper[gslice].min()) < depth + 1:
        candidates = [m for m in candidates if m == SplitMode.NS]
    if not candidates:
        if dead[0] is None:
            dead[0] = region
        return None

    signal_bits = math.ceil(math.log2(len(candidates))) if len(candidates) > 1 else 0
    rect = (slice(y, y + h), slice(x, x + w))
    pristine = recon.samples[rect].copy()

    best = None
    best_j = math.inf
    best_rect = None
    total_work = 0
    for mode in candidates:
        recon.samples[rect] = pristine
        if mode == SplitMode.NS:
            leaf = code_leaf(source, region, qp, recon)
            cand = (NS_LEAF, leaf.distortion, leaf.mode_bits + leaf.coeff_bits, 0)
            total_work += 3
        else:
            subtrees = []
            d = r = sbits = 0
            feasible = True
            for child in child_regions(region, mode):
                sub = _search_rec(
                    source, child, qp, lower, upper, effort, max_total_depth, recon, dead
                )
                if sub is None:
                    feasible = False
                    break
                subtrees.append(sub[0])
                d += sub[1]
                r += sub[2]
                sbits += sub[3]
                total_work += sub[4]
            if not feasible:
                continue
            cand = (PartitionTree(mode, tuple(subtrees)), d, r, sbits)
        j = cand[1] + qp.lam * cand[2]
        # strict < keeps the earliest candidate on ties (NS < QT < ... < VTT)
        if j < best_j:
            best_j = j
            best = cand
            best_rect = recon.samples[rect].copy()
    if best is None:
        if dead[0] is None:
            dead[0] = region
        return None
    recon.samples[rect] = best_rect
    tree, d, r, sbits = best
    return tree, d, r + signal_bits, sbits + signal_bits, total_work


def search_ctu(
    source: Plane,
    ctu_region: CuRegion,
    qp: QpParams,
    spec: ConstraintSpec,
    effort: str,
    max_total_depth: int,
    recon: Plane,
) -> SearchResult:
    """Best partition tree for one CTU under ``spec``; commits its reconstruction.

    Raises InfeasibleConstraintError when no tree can satisfy the spec (for
    example a lower bound above max_total_depth).
    """
    if isinstance(spec, ForceReplay):
        raise ValidationError("force specs are replayed, not searched; use replay_ctu")
    lower, upper = _bound_arrays(spec)
    dead: list[CuRegion | None] = [None]
    result = _search_rec(
        source, ctu_region, qp, lower, upper, effort, max_total_depth, recon, dead
    )
    if result is None:
        where = dead[0] if dead[0] is not None else ctu_region
        raise InfeasibleConstraintError(
            f"constraint admits no partitioning at region {where}", region=where
        )
    tree, d, r, split_bits, work = result
    return SearchResult(tree, RdCost(j=d + qp.lam * r, d=d, r=r), work, split_bits)


def replay_ctu(
    source: Plane,
    ctu_region: CuRegion,
    qp: QpParams,
    tree: PartitionTree,
    recon: Plane,
) -> SearchResult:
    """Code a CTU with a fixed tree: no search and no split signaling bits,
    three work units (one per intra mode) per leaf."""
    d = r = work = 0
    for leaf_region, _ in leaf_regions(tree, ctu_region):
        if (
            leaf_region.x + leaf_region.w > ctu_region.x + ctu_region.w
            or leaf_region.y + leaf_region.h > ctu_region.y + ctu_region.h
        ):
            raise ValidationError(f"replay leaf {leaf_region} escapes its CTU {ctu_region}")
        leaf = code_leaf(source, leaf_region, qp, recon)
        d += leaf.distortion
        r += leaf.mode_bits + leaf.coeff_bits
        work += 3
    return SearchResult(tree, RdCost(j=d + qp.lam * r, d=d, r=r), work, 0)
