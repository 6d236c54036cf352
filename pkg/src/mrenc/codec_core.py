"""Deterministic leaf-CU coding model: intra prediction, DCT, quantization, RD cost.

Everything here is a fixed-point of the design, not of any standard: three
intra modes (DC / horizontal / vertical), a separable orthonormal DCT-II,
a deadzone quantizer, and a closed-form bit model in place of an entropy
coder.  All arithmetic is double precision with deterministic rounding, so
identical inputs give bit-identical outputs on any schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ValidationError
from .frame_io import Plane
from .partition import CuRegion

DEADZONE = 1.0 / 6.0
MODE_BITS = 2  # flat cost of signaling one of the three intra modes


@dataclass(frozen=True)
class QpParams:
    """Quantizer index with its derived step size and Lagrange multiplier."""

    qp: int
    qstep: float
    lam: float

    def __post_init__(self):
        if not 0 <= self.qp <= 51:
            raise ValidationError(f"qp must be in [0, 51], got {self.qp}")

    @classmethod
    def from_qp(cls, qp: int) -> "QpParams":
        return cls(qp=qp, qstep=2.0 ** ((qp - 4) / 6.0), lam=0.57 * 2.0 ** ((qp - 12) / 3.0))


class IntraMode(IntEnum):
    DC = 0
    HORIZONTAL = 1
    VERTICAL = 2


_DCT_CACHE: dict[int, np.ndarray] = {}


def _dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix: row k, column i = s_k * cos(pi*(2i+1)*k / 2n)."""
    m = _DCT_CACHE.get(n)
    if m is None:
        k = np.arange(n).reshape(-1, 1)
        i = np.arange(n).reshape(1, -1)
        m = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
        m[0, :] = math.sqrt(1.0 / n)
        _DCT_CACHE[n] = m
    return m


def forward_dct(block: np.ndarray) -> np.ndarray:
    """Separable 2-D orthonormal DCT-II of an h x w block (rectangles allowed)."""
    h, w = block.shape
    return _dct_matrix(h) @ block @ _dct_matrix(w).T


def inverse_dct(coeffs: np.ndarray) -> np.ndarray:
    h, w = coeffs.shape
    return _dct_matrix(h).T @ coeffs @ _dct_matrix(w)


def quantize(coeffs: np.ndarray, qstep: float) -> np.ndarray:
    """Deadzone quantizer: q = sign(c) * floor(|c|/qstep + 0.5 - deadzone)."""
    return (np.sign(coeffs) * np.floor(np.abs(coeffs) / qstep + (0.5 - DEADZONE))).astype(np.int64)


def dequantize(quantized: np.ndarray, qstep: float) -> np.ndarray:
    return quantized.astype(np.float64) * qstep


def transform_quantize(residual: np.ndarray, qp: QpParams) -> tuple[np.ndarray, np.ndarray]:
    """Quantized coefficients plus the dequantized (reconstructed) residual."""
    q = quantize(forward_dct(residual), qp.qstep)
    return q, inverse_dct(dequantize(q, qp.qstep))


def coeff_bits(quantized: np.ndarray) -> int:
    """Bit model: one significance flag per coefficient; each nonzero adds a
    sign bit plus an order-0 exp-Golomb magnitude (2*floor(log2 m) + 1 bits)."""
    mags = np.abs(quantized[quantized != 0])
    bits = quantized.size
    if mags.size:
        # floor(log2 m) == frexp exponent - 1, exact for integer magnitudes
        _, exponents = np.frexp(mags.astype(np.float64))
        bits += int(np.sum(2 * (exponents - 1) + 2))
    return bits


def predict(region: CuRegion, mode: IntraMode, recon: Plane) -> np.ndarray:
    """Intra prediction from already-reconstructed neighbors.

    Neighbors outside the frame are unavailable; H/V substitute 128 for a
    missing column/row, DC averages only the available lines (128 if none).
    """
    x, y, w, h = region.x, region.y, region.w, region.h
    top = recon.samples[y - 1, x : x + w] if y > 0 else None
    left = recon.samples[y : y + h, x - 1] if x > 0 else None
    if mode == IntraMode.DC:
        if top is None and left is None:
            dc = 128.0
        else:
            parts = [p for p in (top, left) if p is not None]
            total = sum(int(p.sum()) for p in parts)
            count = sum(p.size for p in parts)
            dc = math.floor(total / count + 0.5)
        return np.full((h, w), float(dc))
    if mode == IntraMode.HORIZONTAL:
        if left is None:
            return np.full((h, w), 128.0)
        return np.repeat(left.astype(np.float64).reshape(-1, 1), w, axis=1)
    if mode == IntraMode.VERTICAL:
        if top is None:
            return np.full((h, w), 128.0)
        return np.repeat(top.astype(np.float64).reshape(1, -1), h, axis=0)
    raise ValidationError(f"unknown intra mode {mode!r}")


@dataclass(frozen=True, eq=False)
class LeafCode:
    """Winning intra mode of one leaf with its rate, distortion and reconstruction."""

    intra_mode: IntraMode
    coeff_bits: int
    mode_bits: int
    distortion: int
    reconstruction: np.ndarray


@dataclass(frozen=True)
class RdCost:
    """Lagrangian rate-distortion cost j = d + lambda * r."""

    j: float
    d: int
    r: int


def code_leaf(source: Plane, region: CuRegion, qp: QpParams, recon: Plane) -> LeafCode:
    """Code one leaf: try all three intra modes, keep the minimum-J one.

    Ties break by mode code order (DC < Horizontal < Vertical).  The winning
    reconstruction is committed into ``recon`` so later leaves predict from it.
    """
    x, y, w, h = region.x, region.y, region.w, region.h
    src_u8 = source.samples[y : y + h, x : x + w]
    src = src_u8.astype(np.float64)
    best = None
    best_j = math.inf
    for mode in (IntraMode.DC, IntraMode.HORIZONTAL, IntraMode.VERTICAL):
        pred = predict(region, mode, recon)
        quantized, deq_residual = transform_quantize(src - pred, qp)
        bits = coeff_bits(quantized)
        rec = np.clip(np.floor(pred + deq_residual + 0.5), 0, 255).astype(np.uint8)
        diff = src_u8.astype(np.int32) - rec
        d = int(np.sum(diff * diff))
        j = d + qp.lam * (MODE_BITS + bits)
        if j < best_j:
            best_j = j
            best = LeafCode(mode, bits, MODE_BITS, d, rec)
    recon.samples[y : y + h, x : x + w] = best.reconstruction
    return best
