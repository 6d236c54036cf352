"""mrenc: a self-contained multi-rate encoding laboratory.

A deterministic toy intra-only block codec with recursive multi-type-tree
partitioning, depth-reuse strategies for encoding ladders, a bit-exact
partition-metadata format, and the evaluation pipeline (PSNR, a simplified
XPSNR surrogate, BD metrics, time/work deltas, Pareto fronts).
"""

__version__ = "0.1.0"

from .frame_io import Plane, Sequence, load_sequence, write_plane
from .multirate import LadderReport, RungResult, Strategy, encode_sequence, run_ladder
from .partition import (
    ConstraintSpec,
    CuRegion,
    DepthMap,
    DoubleBound,
    ForceReplay,
    LowerBound,
    PartitionTree,
    SplitMode,
    Unconstrained,
    UpperBound,
)

__all__ = [
    "Plane",
    "Sequence",
    "load_sequence",
    "write_plane",
    "LadderReport",
    "RungResult",
    "Strategy",
    "encode_sequence",
    "run_ladder",
    "ConstraintSpec",
    "CuRegion",
    "DepthMap",
    "DoubleBound",
    "ForceReplay",
    "LowerBound",
    "PartitionTree",
    "SplitMode",
    "Unconstrained",
    "UpperBound",
    "__version__",
]
