"""Quality metrics, Bjontegaard deltas, depth agreement, Pareto fronts.

``xpsnr_s`` is this package's simplified activity-weighted PSNR surrogate;
it is deliberately labeled with the ``_s`` suffix everywhere to avoid
confusion with the standardized XPSNR metric.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ValidationError
from .frame_io import Plane, Sequence
from .partition import DepthMap

PEAK = 255.0
XPSNR_BLOCK = 16
XPSNR_EXPONENT = 0.5
XPSNR_CLAMP = (0.25, 4.0)


@dataclass(frozen=True)
class RdPoint:
    """One rung of an RD curve: bitrate in kilobits/second, quality in dB."""

    bitrate: float
    quality: float
    label: int | str | None = None

    def __post_init__(self):
        if not self.bitrate > 0:
            raise ValidationError(f"rd point needs positive bitrate, got {self.bitrate}")


@dataclass(frozen=True)
class DepthAgreement:
    """Fraction of 4x4 positions with equal / deeper / shallower depth than a reference."""

    equal: float
    deeper: float
    shallower: float


def _frames(obj) -> list[np.ndarray]:
    if isinstance(obj, Sequence):
        return [f.samples for f in obj.frames]
    if isinstance(obj, Plane):
        return [obj.samples]
    raise ValidationError(f"expected Plane or Sequence, got {type(obj).__name__}")


def _paired_frames(ref, test):
    ref_frames, test_frames = _frames(ref), _frames(test)
    if len(ref_frames) != len(test_frames):
        raise ValidationError(
            f"frame count mismatch: {len(ref_frames)} vs {len(test_frames)}"
        )
    for a, b in zip(ref_frames, test_frames):
        if a.shape != b.shape:
            raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return ref_frames, test_frames


def psnr(ref, test) -> float:
    """PSNR (peak 255) with MSE pooled over all samples of all frames.

    Identical inputs return math.inf; report writers serialize that as a
    null value plus a lossless flag.
    """
    ref_frames, test_frames = _paired_frames(ref, test)
    sse = 0
    count = 0
    for a, b in zip(ref_frames, test_frames):
        diff = a.astype(np.int64) - b
        sse += int(np.sum(diff * diff))
        count += a.size
    if sse == 0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK * count / sse)


def _block_activity(frame: np.ndarray, by: int, bx: int) -> float:
    """Mean |4-neighbor Laplacian| over the interior of one 16x16 block."""
    block = frame[by : by + XPSNR_BLOCK, bx : bx + XPSNR_BLOCK].astype(np.float64)
    if block.shape[0] < 3 or block.shape[1] < 3:
        return 0.0
    core = block[1:-1, 1:-1]
    lap = 4 * core - block[:-2, 1:-1] - block[2:, 1:-1] - block[1:-1, :-2] - block[1:-1, 2:]
    return float(np.mean(np.abs(lap)))


def xpsnr_simplified(ref, test) -> float:
    """Activity-weighted PSNR: low-activity blocks weigh errors more heavily.

    Per 16x16 block k of the reference, w_k = clamp((abar/max(a_k,1))^0.5,
    0.25, 4.0) with abar the frame mean activity; the pooled MSE is
    sum(w_k * SSE_k) / sum(w_k * pixels_k).
    """
    ref_frames, test_frames = _paired_frames(ref, test)
    num = 0.0
    den = 0.0
    for a, b in zip(ref_frames, test_frames):
        h, w = a.shape
        blocks = []
        for by in range(0, h, XPSNR_BLOCK):
            for bx in range(0, w, XPSNR_BLOCK):
                act = _block_activity(a, by, bx)
                sse = float(
                    np.sum(
                        (
                            a[by : by + XPSNR_BLOCK, bx : bx + XPSNR_BLOCK].astype(np.int64)
                            - b[by : by + XPSNR_BLOCK, bx : bx + XPSNR_BLOCK]
                        )
                        ** 2
                    )
                )
                npix = a[by : by + XPSNR_BLOCK, bx : bx + XPSNR_BLOCK].size
                blocks.append((act, sse, npix))
        abar = sum(act for act, _, _ in blocks) / len(blocks)
        for act, sse, npix in blocks:
            wk = min(max((abar / max(act, 1.0)) ** XPSNR_EXPONENT, XPSNR_CLAMP[0]), XPSNR_CLAMP[1])
            num += wk * sse
            den += wk * npix
    if num == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / (num / den))


def _curve(points: list[RdPoint], name: str) -> tuple[np.ndarray, np.ndarray]:
    """Sorted (quality, log10 rate) arrays after dropping lossless points."""
    finite = [p for p in points if math.isfinite(p.quality)]
    if len(finite) < len(points):
        warnings.warn(
            f"{name}: {len(points) - len(finite)} lossless point(s) excluded from the BD integral",
            stacklevel=3,
        )
    if len(finite) < 4:
        raise ValidationError(f"{name}: BD metrics need at least 4 finite points, got {len(finite)}")
    pts = sorted(finite, key=lambda p: p.bitrate)
    rates = np.array([p.bitrate for p in pts], dtype=np.float64)
    quals = np.array([p.quality for p in pts], dtype=np.float64)
    if np.any(np.diff(rates) <= 0):
        raise ValidationError(f"{name}: bitrates are not strictly monotone")
    if np.any(np.diff(quals) <= 0):
        raise ValidationError(f"{name}: curve is not monotone (quality must rise with rate)")
    return quals, np.log10(rates)


def bd_rate(anchor: list[RdPoint], test: list[RdPoint]) -> float:
    """Average bitrate overhead of test vs anchor at equal quality, in percent.

    Monotone PCHIP interpolation of log10(rate) over quality, integrated
    exactly over the overlapping quality interval.  Positive means the test
    curve spends more bitrate.
    """
    aq, ar = _curve(anchor, "anchor")
    tq, tr = _curve(test, "test")
    lo = max(aq[0], tq[0])
    hi = min(aq[-1], tq[-1])
    if hi <= lo:
        raise ValidationError("quality ranges of the two curves do not overlap")
    ai = PchipInterpolator(aq, ar).antiderivative()
    ti = PchipInterpolator(tq, tr).antiderivative()
    avg_diff = ((ti(hi) - ti(lo)) - (ai(hi) - ai(lo))) / (hi - lo)
    return float((10.0 ** avg_diff - 1.0) * 100.0)


def bd_quality(anchor: list[RdPoint], test: list[RdPoint]) -> float:
    """Average quality difference of test vs anchor at equal rate, in dB (negative = loss)."""
    aq, ar = _curve(anchor, "anchor")
    tq, tr = _curve(test, "test")
    lo = max(ar[0], tr[0])
    hi = min(ar[-1], tr[-1])
    if hi <= lo:
        raise ValidationError("rate ranges of the two curves do not overlap")
    ai = PchipInterpolator(ar, aq).antiderivative()
    ti = PchipInterpolator(tr, tq).antiderivative()
    return float(((ti(hi) - ti(lo)) - (ai(hi) - ai(lo))) / (hi - lo))


def depth_agreement(ref: DepthMap, test: DepthMap) -> DepthAgreement:
    """Position-wise depth comparison of a test map against a reference map."""
    if (ref.grid_w, ref.grid_h) != (test.grid_w, test.grid_h):
        raise ValidationError(
            f"grid mismatch: {ref.grid_w}x{ref.grid_h} vs {test.grid_w}x{test.grid_h}"
        )
    n = ref.depths.size
    deeper = int(np.count_nonzero(test.depths > ref.depths))
    shallower = int(np.count_nonzero(test.depths < ref.depths))
    return DepthAgreement(
        equal=(n - deeper - shallower) / n,
        deeper=deeper / n,
        shallower=shallower / n,
    )


def _dominates(p, q) -> bool:
    return p[0] <= q[0] and p[1] <= q[1] and (p[0] < q[0] or p[1] < q[1])


def pareto_front(points: list[tuple]) -> tuple[list[tuple], list[tuple]]:
    """Split (bd_rate, delta_t, label) points into the non-dominated front
    and the dominated rest; both coordinates are minimized, ties stay on the
    front, and the front is sorted by delta_t ascending."""
    if not points:
        raise ValidationError("pareto front of an empty point set")
    front, dominated = [], []
    for p in points:
        if any(_dominates(q, p) for q in points if q is not p):
            dominated.append(p)
        else:
            front.append(p)
    front.sort(key=lambda p: (p[1], p[0]))
    return front, dominated


def convex_front(points: list[tuple]) -> list[tuple]:
    """The convex Pareto front: the lower-left convex hull of the
    non-dominated set.  This is the PF line methods are compared against;
    a point can be non-dominated yet lie above the hull."""
    front, _ = pareto_front(points)
    pts = sorted(front, key=lambda p: (p[0], p[1]))
    hull: list[tuple] = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2][:2], hull[-1][:2]
            # drop the middle point when it is on or above the chord
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull
