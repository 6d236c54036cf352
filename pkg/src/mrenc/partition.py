"""Recursive CU partitioning geometry: split modes, trees, depth maps, constraints.

Depth is a single counter incremented by one for every split of any kind
(quad, binary or ternary).  Depth maps live on a 4x4 grid, the minimum CU
size, so every leaf is exactly representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Union

import numpy as np

from .errors import ValidationError

MIN_CU = 4
GRID = 4  # depth-map granularity in pixels
CTU_SIZES = (32, 64, 128)
DEFAULT_CTU = 64
DEFAULT_MAX_DEPTH = 6
EFFORTS = ("thorough", "fast")


class SplitMode(IntEnum):
    """The six partitioning modes. Codes are serialized and must not change."""

    NS = 0   # no split (leaf)
    QT = 1   # quadtree: four quadrants
    HBT = 2  # horizontal binary: two stacked halves
    VBT = 3  # vertical binary: two side-by-side halves
    HTT = 4  # horizontal ternary: 1:2:1 stacked
    VTT = 5  # vertical ternary: 1:2:1 side-by-side


CHILD_COUNT = {
    SplitMode.NS: 0,
    SplitMode.QT: 4,
    SplitMode.HBT: 2,
    SplitMode.VBT: 2,
    SplitMode.HTT: 3,
    SplitMode.VTT: 3,
}


@dataclass(frozen=True)
class CuRegion:
    """A rectangular CU, positioned in frame pixels, with its split depth."""

    x: int
    y: int
    w: int
    h: int
    depth: int = 0

    def __post_init__(self):
        if self.x < 0 or self.y < 0 or self.depth < 0:
            raise ValidationError(f"negative region coordinates or depth: {self}")
        if self.w < MIN_CU or self.h < MIN_CU:
            raise ValidationError(f"region smaller than {MIN_CU}x{MIN_CU}: {self}")
        if self.w % MIN_CU or self.h % MIN_CU:
            raise ValidationError(f"region dimensions must be multiples of {MIN_CU}: {self}")

    def __str__(self):
        return f"{self.w}x{self.h}@({self.x},{self.y}) depth {self.depth}"


def child_regions(region: CuRegion, mode: SplitMode) -> list[CuRegion]:
    """Children of ``region`` under ``mode``, in coding order (raster / top-down / left-right)."""
    x, y, w, h, d = region.x, region.y, region.w, region.h, region.depth + 1
    if mode == SplitMode.NS:
        return []
    if mode == SplitMode.QT:
        if w != h or w < 2 * MIN_CU:
            raise ValidationError(f"QT illegal for {region}")
        hw, hh = w // 2, h // 2
        return [
            CuRegion(x, y, hw, hh, d),
            CuRegion(x + hw, y, hw, hh, d),
            CuRegion(x, y + hh, hw, hh, d),
            CuRegion(x + hw, y + hh, hw, hh, d),
        ]
    if mode == SplitMode.HBT:
        if h < 2 * MIN_CU:
            raise ValidationError(f"HBT illegal for {region}")
        hh = h // 2
        return [CuRegion(x, y, w, hh, d), CuRegion(x, y + hh, w, hh, d)]
    if mode == SplitMode.VBT:
        if w < 2 * MIN_CU:
            raise ValidationError(f"VBT illegal for {region}")
        hw = w // 2
        return [CuRegion(x, y, hw, h, d), CuRegion(x + hw, y, hw, h, d)]
    if mode == SplitMode.HTT:
        if h < 4 * MIN_CU:
            raise ValidationError(f"HTT illegal for {region}")
        q = h // 4
        return [
            CuRegion(x, y, w, q, d),
            CuRegion(x, y + q, w, 2 * q, d),
            CuRegion(x, y + 3 * q, w, q, d),
        ]
    if mode == SplitMode.VTT:
        if w < 4 * MIN_CU:
            raise ValidationError(f"VTT illegal for {region}")
        q = w // 4
        return [
            CuRegion(x, y, q, h, d),
            CuRegion(x + q, y, 2 * q, h, d),
            CuRegion(x + 3 * q, y, q, h, d),
        ]
    raise ValidationError(f"unknown split mode {mode!r}")


def legal_splits(region: CuRegion, effort: str, max_total_depth: int) -> list[SplitMode]:
    """Admissible modes for a region, in candidate order NS < QT < HBT < VBT < HTT < VTT.

    NS is always legal.  QT needs a square of at least 8; binary splits need
    the split dimension to be at least 8, ternary at least 16 (all children
    stay >= 4).  ``fast`` effort drops the ternary modes.
    """
    modes = [SplitMode.NS]
    if region.depth + 1 > max_total_depth:
        return modes
    if region.w == region.h and region.w >= 2 * MIN_CU:
        modes.append(SplitMode.QT)
    if region.h >= 2 * MIN_CU:
        modes.append(SplitMode.HBT)
    if region.w >= 2 * MIN_CU:
        modes.append(SplitMode.VBT)
    if effort == "thorough":
        if region.h >= 4 * MIN_CU:
            modes.append(SplitMode.HTT)
        if region.w >= 4 * MIN_CU:
            modes.append(SplitMode.VTT)
    elif effort != "fast":
        raise ValidationError(f"unknown effort level {effort!r}")
    return modes


@dataclass(frozen=True)
class PartitionTree:
    """Split decision tree of one CTU; children are empty iff the node is NS."""

    node: SplitMode
    children: tuple["PartitionTree", ...] = ()

    def __post_init__(self):
        expected = CHILD_COUNT[self.node]
        if len(self.children) != expected:
            raise ValidationError(
                f"{self.node.name} node needs {expected} children, got {len(self.children)}"
            )

    def node_count(self) -> int:
        return 1 + sum(c.node_count() for c in self.children)

    def leaf_count(self) -> int:
        if not self.children:
            return 1
        return sum(c.leaf_count() for c in self.children)

    def preorder(self) -> list[SplitMode]:
        out = [self.node]
        for c in self.children:
            out.extend(c.preorder())
        return out


NS_LEAF = PartitionTree(SplitMode.NS)


def leaf_regions(tree: PartitionTree, region: CuRegion):
    """Yield (leaf_region, subtree) pairs in coding order; validates geometry."""
    if tree.node == SplitMode.NS:
        yield region, tree
        return
    for child_tree, child_region in zip(tree.children, child_regions(region, tree.node)):
        yield from leaf_regions(child_tree, child_region)


def validate_tree_geometry(tree: PartitionTree, ctu: int) -> None:
    """Raise ValidationError if the tree cannot be laid out over a ctu x ctu block."""
    for _ in leaf_regions(tree, CuRegion(0, 0, ctu, ctu, 0)):
        pass


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Leaf depth per 4x4 position, row-major. ``depths`` is (grid_h, grid_w) int16."""

    grid_w: int
    grid_h: int
    depths: np.ndarray

    def __post_init__(self):
        if self.depths.shape != (self.grid_h, self.grid_w):
            raise ValidationError(
                f"depth array shape {self.depths.shape} does not match "
                f"{self.grid_h}x{self.grid_w}"
            )
        if self.depths.min(initial=0) < 0:
            raise ValidationError("negative depth in depth map")

    def __eq__(self, other):
        if not isinstance(other, DepthMap):
            return NotImplemented
        return (
            self.grid_w == other.grid_w
            and self.grid_h == other.grid_h
            and np.array_equal(self.depths, other.depths)
        )

    def mean_depth(self) -> float:
        return float(self.depths.mean())


def ctu_grid(frame_w: int, frame_h: int, ctu: int) -> list[CuRegion]:
    """CTU regions of a frame in raster order. Frames must be CTU-aligned."""
    if ctu not in CTU_SIZES:
        raise ValidationError(f"ctu size must be one of {CTU_SIZES}, got {ctu}")
    if frame_w % ctu or frame_h % ctu:
        raise ValidationError(
            f"frame {frame_w}x{frame_h} is not a multiple of the ctu size {ctu}"
        )
    return [
        CuRegion(x, y, ctu, ctu, 0)
        for y in range(0, frame_h, ctu)
        for x in range(0, frame_w, ctu)
    ]


def depth_map_of(
    trees: list[PartitionTree] | tuple[PartitionTree, ...],
    frame_w: int,
    frame_h: int,
    ctu: int,
) -> DepthMap:
    """Depth of the unique leaf covering each 4x4 position, over all CTUs."""
    regions = ctu_grid(frame_w, frame_h, ctu)
    if len(trees) != len(regions):
        raise ValidationError(
            f"{len(trees)} trees for {len(regions)} CTUs ({frame_w}x{frame_h}, ctu {ctu})"
        )
    grid_w = -(-frame_w // GRID)
    grid_h = -(-frame_h // GRID)
    depths = np.full((grid_h, grid_w), -1, dtype=np.int16)
    for tree, ctu_region in zip(trees, regions):
        for leaf, _ in leaf_regions(tree, ctu_region):
            if leaf.x + leaf.w > frame_w or leaf.y + leaf.h > frame_h:
                raise ValidationError(f"leaf {leaf} extends outside the frame")
            gx, gy = leaf.x // GRID, leaf.y // GRID
            depths[gy : gy + leaf.h // GRID, gx : gx + leaf.w // GRID] = leaf.depth
    assert depths.min() >= 0, "positions left uncovered"
    return DepthMap(grid_w, grid_h, depths)


@dataclass(frozen=True)
class Unconstrained:
    pass


@dataclass(frozen=True, eq=False)
class UpperBound:
    """Leaf depth may not exceed the bound anywhere (no finer splits)."""

    bound: DepthMap


@dataclass(frozen=True, eq=False)
class LowerBound:
    """Leaf depth may not fall below the bound anywhere (no coarser splits)."""

    bound: DepthMap


@dataclass(frozen=True, eq=False)
class DoubleBound:
    """Leaf depth constrained to lie within [lower, upper] at every position."""

    lower: DepthMap
    upper: DepthMap

    def __post_init__(self):
        if (self.lower.grid_w, self.lower.grid_h) != (self.upper.grid_w, self.upper.grid_h):
            raise ValidationError("double bound maps have mismatched grids")
        if np.any(self.lower.depths > self.upper.depths):
            raise ValidationError("double bound requires lower <= upper at every position")


@dataclass(frozen=True)
class ForceReplay:
    """Reuse the reference trees verbatim, one per CTU in raster order."""

    trees: tuple[PartitionTree, ...]
    ctu: int = DEFAULT_CTU


ConstraintSpec = Union[Unconstrained, UpperBound, LowerBound, DoubleBound, ForceReplay]


@dataclass(frozen=True)
class Violation:
    """One 4x4 position where a depth map breaks its constraint."""

    x: int  # grid column
    y: int  # grid row
    expected: int
    actual: int


def _check_grid(dm: DepthMap, bound: DepthMap):
    if (dm.grid_w, dm.grid_h) != (bound.grid_w, bound.grid_h):
        raise ValidationError(
            f"depth map grid {dm.grid_w}x{dm.grid_h} does not match "
            f"constraint grid {bound.grid_w}x{bound.grid_h}"
        )


def _collect(dm: DepthMap, ref: np.ndarray, mask: np.ndarray) -> list[Violation]:
    ys, xs = np.nonzero(mask)
    return [
        Violation(int(x), int(y), int(ref[y, x]), int(dm.depths[y, x]))
        for y, x in zip(ys, xs)
    ]


def check_constraint(tree_depths: DepthMap, spec: ConstraintSpec) -> list[Violation]:
    """Positions where the map violates the spec; empty list means satisfied."""
    if isinstance(spec, Unconstrained):
        return []
    if isinstance(spec, UpperBound):
        _check_grid(tree_depths, spec.bound)
        return _collect(tree_depths, spec.bound.depths, tree_depths.depths > spec.bound.depths)
    if isinstance(spec, LowerBound):
        _check_grid(tree_depths, spec.bound)
        return _collect(tree_depths, spec.bound.depths, tree_depths.depths < spec.bound.depths)
    if isinstance(spec, DoubleBound):
        _check_grid(tree_depths, spec.lower)
        low = _collect(tree_depths, spec.lower.depths, tree_depths.depths < spec.lower.depths)
        high = _collect(tree_depths, spec.upper.depths, tree_depths.depths > spec.upper.depths)
        return low + high
    if isinstance(spec, ForceReplay):
        replay = depth_map_of(
            spec.trees, tree_depths.grid_w * GRID, tree_depths.grid_h * GRID, spec.ctu
        )
        _check_grid(tree_depths, replay)
        return _collect(tree_depths, replay.depths, tree_depths.depths != replay.depths)
    raise ValidationError(f"unknown constraint spec {spec!r}")
