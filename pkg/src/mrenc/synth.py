"""Deterministic synthetic test content.

JVET-style test sequences are not redistributable, so the evaluation
pipeline runs on generated content.  All randomness comes from a
xoshiro256** generator seeded through splitmix64 (the published reference
constants), so output is bit-identical across platforms and sessions.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .frame_io import Plane, Sequence

KINDS = ("flat", "gradient", "checker", "noise", "mixed")

_MASK = (1 << 64) - 1


def _splitmix64(state: int):
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def _rotl(v: int, k: int) -> int:
    return ((v << k) | (v >> (64 - k))) & _MASK


class Xoshiro256StarStar:
    """xoshiro256** with splitmix64 seed expansion."""

    def __init__(self, seed: int):
        state = seed & _MASK
        self.s = []
        for _ in range(4):
            state, word = _splitmix64(state)
            self.s.append(word)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def bytes_array(self, n: int) -> np.ndarray:
        """n pseudo-random uint8 values."""
        words = [self.next_u64() for _ in range((n + 7) // 8)]
        buf = b"".join(w.to_bytes(8, "little") for w in words)
        return np.frombuffer(buf[:n], dtype=np.uint8).copy()


def _box_blur(arr: np.ndarray) -> np.ndarray:
    """3x3 box blur with edge clamping, float64."""
    padded = np.pad(arr, 1, mode="edge").astype(np.float64)
    out = np.zeros_like(arr, dtype=np.float64)
    for dy in (0, 1, 2):
        for dx in (0, 1, 2):
            out += padded[dy : dy + arr.shape[0], dx : dx + arr.shape[1]]
    return out / 9.0


def _dither(rng: Xoshiro256StarStar, base: np.ndarray, amplitude: int) -> np.ndarray:
    """Add +/- amplitude uniform noise; keeps reconstructions from going lossless."""
    if amplitude == 0:
        return np.clip(np.rint(base), 0, 255).astype(np.uint8)
    noise = rng.bytes_array(base.size).reshape(base.shape).astype(np.float64)
    noise = (noise / 255.0) * (2 * amplitude) - amplitude
    return np.clip(np.rint(base + noise), 0, 255).astype(np.uint8)


def _flat_frame(rng, w, h, f):
    return np.full((h, w), 128, dtype=np.uint8)


def _gradient_frame(rng, w, h, f):
    xs = np.arange(w).reshape(1, -1)
    ys = np.arange(h).reshape(-1, 1)
    base = 255.0 * (xs + ys + 3.0 * f) / (w + h + 3.0 * f + 1)
    return _dither(rng, base, 2)


def _checker_frame(rng, w, h, f):
    # period 12 slides 3 px/frame so edges cross the block grid over time
    xs = (np.arange(w).reshape(1, -1) + 3 * f) // 12
    ys = np.arange(h).reshape(-1, 1) // 12
    base = np.where((xs + ys) % 2 == 0, 60.0, 200.0)
    return _dither(rng, np.broadcast_to(base, (h, w)), 3)


def _noise_frame(rng, w, h, f):
    raw = rng.bytes_array(w * h).reshape(h, w).astype(np.float64)
    smooth = _box_blur(_box_blur(raw))
    return np.clip(np.rint((2.0 * smooth + raw) / 3.0), 0, 255).astype(np.uint8)


def _mixed_frame(rng, w, h, f):
    hw, hh = w // 2, h // 2
    frame = np.empty((h, w), dtype=np.uint8)
    frame[:hh, :hw] = _flat_frame(rng, hw, hh, f)
    frame[:hh, hw:] = _gradient_frame(rng, w - hw, hh, f)
    frame[hh:, :hw] = _checker_frame(rng, hw, h - hh, f)
    frame[hh:, hw:] = _noise_frame(rng, w - hw, h - hh, f)
    # moving bright square crossing the quadrant boundaries
    side = max(min(w, h) // 6, 8)
    px = (5 * f) % max(w - side, 1)
    py = (3 * f) % max(h - side, 1)
    frame[py : py + side, px : px + side] = 230
    return frame


_GENERATORS = {
    "flat": _flat_frame,
    "gradient": _gradient_frame,
    "checker": _checker_frame,
    "noise": _noise_frame,
    "mixed": _mixed_frame,
}


def generate(kind: str, width: int, height: int, frames: int, seed: int) -> Sequence:
    """Generate a deterministic test sequence of the given kind."""
    if kind not in _GENERATORS:
        raise ValidationError(f"unknown corpus kind {kind!r}, choose from {KINDS}")
    if frames < 1:
        raise ValidationError("need at least one frame")
    rng = Xoshiro256StarStar(seed)
    gen = _GENERATORS[kind]
    planes = tuple(Plane.from_array(gen(rng, width, height, f)) for f in range(frames))
    return Sequence(planes, frame_rate=30.0)
