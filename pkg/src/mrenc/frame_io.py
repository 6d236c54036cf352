"""Raw video / image ingestion into planar 8-bit luma frames.

Supported inputs: Y4M (``YUV4MPEG2`` header, ``FRAME`` separators), raw
planar YUV 4:2:0 or luma-only, and globs of binary PGM (P5) files.  Only
the luma plane is kept; chroma bytes are parsed and skipped.  Anything
that is not 8 bits per sample is rejected.
"""

from __future__ import annotations

import glob as _glob
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import FormatError, ValidationError

MIN_DIM = 16


@dataclass(frozen=True, eq=False)
class Plane:
    """One 8-bit luma raster. ``samples`` is a (height, width) uint8 array."""

    width: int
    height: int
    samples: np.ndarray

    def __post_init__(self):
        if self.width < MIN_DIM or self.height < MIN_DIM:
            raise ValidationError(
                f"plane must be at least {MIN_DIM}x{MIN_DIM}, got {self.width}x{self.height}"
            )
        if self.samples.dtype != np.uint8:
            raise ValidationError(f"plane samples must be uint8, got {self.samples.dtype}")
        if self.samples.shape != (self.height, self.width):
            raise ValidationError(
                f"sample array shape {self.samples.shape} does not match "
                f"{self.height}x{self.width}"
            )

    def __eq__(self, other):
        if not isinstance(other, Plane):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.samples, other.samples)
        )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Plane":
        arr = np.asarray(arr, dtype=np.uint8)
        h, w = arr.shape
        return cls(width=w, height=h, samples=arr)


@dataclass(frozen=True, eq=False)
class Sequence:
    """An ordered list of equally sized Planes plus a nominal frame rate."""

    frames: tuple[Plane, ...]
    frame_rate: float = 30.0

    def __post_init__(self):
        if not self.frames:
            raise ValidationError("sequence must contain at least one frame")
        w, h = self.frames[0].width, self.frames[0].height
        for i, f in enumerate(self.frames):
            if f.width != w or f.height != h:
                raise ValidationError(
                    f"frame {i} is {f.width}x{f.height}, expected {w}x{h}"
                )

    def __eq__(self, other):
        if not isinstance(other, Sequence):
            return NotImplemented
        return (
            self.frame_rate == other.frame_rate
            and len(self.frames) == len(other.frames)
            and all(a == b for a, b in zip(self.frames, other.frames))
        )

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height


def _parse_y4m_header(line: bytes) -> tuple[int, int, float, str]:
    fields = line.decode("ascii", errors="replace").strip().split(" ")
    if not fields or fields[0] != "YUV4MPEG2":
        raise FormatError(f"not a y4m stream: header starts with {fields[0]!r}")
    width = height = None
    rate = 30.0
    colorspace = "420"
    for tok in fields[1:]:
        if not tok:
            continue
        key, val = tok[0], tok[1:]
        if key == "W":
            width = int(val)
        elif key == "H":
            height = int(val)
        elif key == "F":
            num, _, den = val.partition(":")
            rate = float(Fraction(int(num), int(den or "1")))
        elif key == "C":
            colorspace = val
    if width is None or height is None:
        raise FormatError("y4m header missing W or H field")
    return width, height, rate, colorspace


# luma-relative chroma payload size per supported y4m colorspace
_Y4M_CHROMA_FRACTION = {
    "mono": Fraction(0),
    "400": Fraction(0),
    "420": Fraction(1, 2),
    "420jpeg": Fraction(1, 2),
    "420mpeg2": Fraction(1, 2),
    "420paldv": Fraction(1, 2),
    "422": Fraction(1),
    "444": Fraction(2),
}


def _load_y4m(path: str) -> Sequence:
    with open(path, "rb") as fh:
        header = fh.readline()
        if not header:
            raise FormatError(f"{path}: empty file")
        width, height, rate, colorspace = _parse_y4m_header(header)
        if colorspace not in _Y4M_CHROMA_FRACTION:
            raise FormatError(
                f"{path}: colorspace C{colorspace} not supported (8-bit "
                "mono/420/422/444 only; 10-bit input is rejected)"
            )
        luma_size = width * height
        chroma_size = int(luma_size * _Y4M_CHROMA_FRACTION[colorspace])
        frames = []
        while True:
            pos = fh.tell()
            frame_line = fh.readline()
            if not frame_line:
                break
            if not frame_line.startswith(b"FRAME"):
                raise FormatError(f"{path}: expected FRAME marker at byte offset {pos}")
            payload = fh.read(luma_size + chroma_size)
            if len(payload) < luma_size + chroma_size:
                raise FormatError(
                    f"{path}: truncated payload, frame {len(frames)} starting at "
                    f"byte offset {pos} needs {luma_size + chroma_size} bytes, "
                    f"got {len(payload)}"
                )
            luma = np.frombuffer(payload, dtype=np.uint8, count=luma_size)
            frames.append(Plane(width, height, luma.reshape(height, width).copy()))
        if not frames:
            raise FormatError(f"{path}: y4m stream contains no frames")
        return Sequence(tuple(frames), frame_rate=rate)


def _load_raw(path: str, dims: tuple[int, int], layout: str, frame_rate: float) -> Sequence:
    width, height = dims
    luma_size = width * height
    if layout == "yuv420":
        if width % 2 or height % 2:
            raise FormatError(f"{path}: 4:2:0 input needs even dimensions, got {width}x{height}")
        frame_size = luma_size * 3 // 2
    elif layout == "luma":
        frame_size = luma_size
    else:
        raise ValidationError(f"unknown raw layout {layout!r}")
    data = open(path, "rb").read()
    n_frames, leftover = divmod(len(data), frame_size)
    if leftover:
        raise FormatError(
            f"{path}: truncated payload, partial frame starts at byte offset "
            f"{n_frames * frame_size} ({leftover} of {frame_size} bytes present)"
        )
    if n_frames == 0:
        raise FormatError(f"{path}: file smaller than one {width}x{height} frame")
    frames = []
    for i in range(n_frames):
        off = i * frame_size
        luma = np.frombuffer(data, dtype=np.uint8, count=luma_size, offset=off)
        frames.append(Plane(width, height, luma.reshape(height, width).copy()))
    return Sequence(tuple(frames), frame_rate=frame_rate)


def _read_pgm(path: str) -> Plane:
    data = open(path, "rb").read()
    # P5 header: magic, width, height, maxval, separated by whitespace/comments
    tokens = []
    i = 0
    while len(tokens) < 4:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise FormatError(f"{path}: malformed pgm header")
        tokens.append(data[start:i])
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary pgm (magic {tokens[0]!r})")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed pgm header") from exc
    if maxval > 255:
        raise FormatError(f"{path}: maxval {maxval} means >8-bit samples, not supported")
    i += 1  # single whitespace after maxval
    payload = data[i : i + width * height]
    if len(payload) < width * height:
        raise FormatError(
            f"{path}: truncated payload, pixel data starts at byte offset {i}, "
            f"needs {width * height} bytes, got {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return Plane(width, height, arr.copy())


def _load_pgm_glob(pattern: str, frame_rate: float) -> Sequence:
    paths = sorted(_glob.glob(pattern))
    if not paths:
        if os.path.exists(pattern):
            paths = [pattern]
        else:
            raise FormatError(f"no pgm files match {pattern!r}")
    return Sequence(tuple(_read_pgm(p) for p in paths), frame_rate=frame_rate)


def load_sequence(
    path: str,
    fmt: str,
    dims: tuple[int, int] | None = None,
    raw_layout: str = "yuv420",
    frame_rate: float = 30.0,
) -> Sequence:
    """Load a file into a luma Sequence.

    ``fmt`` is one of ``y4m``, ``raw-yuv``, ``pgm-glob``.  Raw input needs
    explicit ``dims``; ``raw_layout`` selects ``yuv420`` (chroma skipped)
    or ``luma`` (no chroma bytes).
    """
    if fmt == "y4m":
        return _load_y4m(path)
    if fmt == "raw-yuv":
        if dims is None:
            raise ValidationError("raw input requires explicit dimensions")
        return _load_raw(path, dims, raw_layout, frame_rate)
    if fmt == "pgm-glob":
        return _load_pgm_glob(path, frame_rate)
    raise ValidationError(f"unknown format hint {fmt!r}")


def write_plane(plane: Plane, path: str, fmt: str) -> None:
    """Write one plane as binary pgm (P5) or headerless raw luma bytes."""
    if fmt == "pgm":
        header = f"P5\n{plane.width} {plane.height}\n255\n".encode("ascii")
        payload = header + plane.samples.tobytes()
    elif fmt == "raw":
        payload = plane.samples.tobytes()
    else:
        raise ValidationError(f"unknown plane format {fmt!r}")
    with open(path, "wb") as fh:
        fh.write(payload)


def write_y4m(seq: Sequence, path: str) -> None:
    """Write a sequence as 8-bit 4:2:0 y4m with neutral (128) chroma."""
    rate = Fraction(seq.frame_rate).limit_denominator(1001 * 120)
    header = (
        f"YUV4MPEG2 W{seq.width} H{seq.height} "
        f"F{rate.numerator}:{rate.denominator} Ip A0:0 C420\n"
    ).encode("ascii")
    chroma = np.full((seq.height // 2, seq.width // 2), 128, dtype=np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        for frame in seq.frames:
            fh.write(b"FRAME\n")
            fh.write(frame.samples.tobytes())
            fh.write(chroma)
            fh.write(chroma)
