"""Bit-exact binary serialization of per-CTU partition trees (the .cud format).

Layout (all integers little-endian):

    magic   'CUMD'          4 bytes
    version u8 (= 1)
    ctu_log2 u8
    effort  u8 (0 thorough, 1 fast)
    qp      u8
    frame_w u32
    frame_h u32
    ctu_count u32
    offset table: ctu_count x u32, byte offsets relative to payload start
    payload: per CTU, preorder split codes at 3 bits per node (MSB first),
             each CTU padded to a byte boundary

A file may carry several frames of one encode: ``ctu_count`` is then the
frame count times the per-frame CTU count, trees stored frame-major in
raster order.  The offset table gives O(1) random access to any CTU.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import FormatError, ValidationError
from .partition import (
    CHILD_COUNT,
    PartitionTree,
    SplitMode,
    ctu_grid,
    depth_map_of,
    validate_tree_geometry,
)

MAGIC = b"CUMD"
VERSION = 1
EFFORT_CODES = {"thorough": 0, "fast": 1}
EFFORT_NAMES = {v: k for k, v in EFFORT_CODES.items()}
_HEADER = struct.Struct("<4sBBBBIII")


@dataclass(frozen=True)
class MetadataFile:
    """Partition trees of one encode, indexed by CTU raster position."""

    frame_w: int
    frame_h: int
    ctu: int
    qp: int
    effort: str
    trees: tuple[PartitionTree, ...]
    version: int = VERSION

    def __post_init__(self):
        if not self.trees:
            raise ValidationError("metadata requires at least one tree")
        if self.effort not in EFFORT_CODES:
            raise ValidationError(f"unknown effort {self.effort!r}")
        if not 0 <= self.qp <= 51:
            raise ValidationError(f"qp {self.qp} out of range")
        per_frame = self.ctus_per_frame
        if len(self.trees) % per_frame:
            raise ValidationError(
                f"{len(self.trees)} trees is not a whole number of "
                f"{per_frame}-CTU frames"
            )

    @property
    def ctus_per_frame(self) -> int:
        return len(ctu_grid(self.frame_w, self.frame_h, self.ctu))

    @property
    def frame_count(self) -> int:
        return len(self.trees) // self.ctus_per_frame

    @property
    def ctu_offsets(self) -> tuple[int, ...]:
        """Payload byte offset of each CTU; strictly increasing."""
        offsets = []
        pos = 0
        for tree in self.trees:
            offsets.append(pos)
            pos += (3 * tree.node_count() + 7) // 8
        return tuple(offsets)

    def trees_for_frame(self, k: int) -> tuple[PartitionTree, ...]:
        per = self.ctus_per_frame
        if not 0 <= k < self.frame_count:
            raise ValidationError(f"frame index {k} out of range [0, {self.frame_count})")
        return self.trees[k * per : (k + 1) * per]

    def depth_map(self, k: int = 0):
        return depth_map_of(self.trees_for_frame(k), self.frame_w, self.frame_h, self.ctu)


def _encode_tree(tree: PartitionTree) -> bytes:
    codes = tree.preorder()
    acc = 0
    for code in codes:
        acc = (acc << 3) | int(code)
    nbits = 3 * len(codes)
    pad = (-nbits) % 8
    acc <<= pad
    return acc.to_bytes((nbits + pad) // 8, "big")


class _BitReader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0  # bit position

    def read3(self) -> int:
        byte_i, bit_i = divmod(self.pos, 8)
        if byte_i >= len(self.data) or (self.pos + 3 + 7) // 8 > len(self.data):
            raise FormatError("truncated tree payload")
        window = int.from_bytes(self.data[byte_i : byte_i + 2].ljust(2, b"\0"), "big")
        self.pos += 3
        return (window >> (13 - bit_i)) & 0b111


def _decode_tree(reader: _BitReader) -> PartitionTree:
    code = reader.read3()
    if code > 5:
        raise FormatError(f"invalid split code {code}")
    mode = SplitMode(code)
    children = tuple(_decode_tree(reader) for _ in range(CHILD_COUNT[mode]))
    return PartitionTree(mode, children)


def serialize(meta: MetadataFile) -> bytes:
    """Encode a MetadataFile to its byte stream form."""
    if meta.version != VERSION:
        raise ValidationError(f"can only write version {VERSION}, got {meta.version}")
    for tree in meta.trees:
        validate_tree_geometry(tree, meta.ctu)
    ctu_log2 = meta.ctu.bit_length() - 1
    header = _HEADER.pack(
        MAGIC,
        meta.version,
        ctu_log2,
        EFFORT_CODES[meta.effort],
        meta.qp,
        meta.frame_w,
        meta.frame_h,
        len(meta.trees),
    )
    blobs = [_encode_tree(t) for t in meta.trees]
    table = b"".join(struct.pack("<I", off) for off in meta.ctu_offsets)
    return header + table + b"".join(blobs)


def _parse_header(data: bytes):
    if len(data) < _HEADER.size:
        raise FormatError("metadata stream shorter than its header")
    magic, version, ctu_log2, effort_code, qp, frame_w, frame_h, ctu_count = _HEADER.unpack_from(
        data
    )
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported metadata version {version}")
    if effort_code not in EFFORT_NAMES:
        raise FormatError(f"unknown effort code {effort_code}")
    if ctu_count == 0:
        raise FormatError("metadata declares zero CTUs")
    table_end = _HEADER.size + 4 * ctu_count
    if len(data) < table_end:
        raise FormatError("truncated CTU offset table")
    offsets = struct.unpack_from(f"<{ctu_count}I", data, _HEADER.size)
    payload = data[table_end:]
    for i, off in enumerate(offsets):
        if off >= len(payload) or (i > 0 and off <= offsets[i - 1]):
            raise FormatError(f"offset table entry {i} ({off}) is out of bounds or not increasing")
    return (1 << ctu_log2), EFFORT_NAMES[effort_code], qp, frame_w, frame_h, offsets, payload


def deserialize(data: bytes) -> MetadataFile:
    """Decode a full metadata stream; inverse of serialize."""
    ctu, effort, qp, frame_w, frame_h, offsets, payload = _parse_header(data)
    trees = []
    for i, off in enumerate(offsets):
        end = offsets[i + 1] if i + 1 < len(offsets) else len(payload)
        trees.append(_decode_tree(_BitReader(payload[off:end])))
    meta = MetadataFile(
        frame_w=frame_w, frame_h=frame_h, ctu=ctu, qp=qp, effort=effort, trees=tuple(trees)
    )
    for tree in meta.trees:
        validate_tree_geometry(tree, ctu)
    return meta


def tree_at(data: bytes, ctu_index: int) -> PartitionTree:
    """Decode just one CTU's tree using the offset table (O(1) access)."""
    ctu, _, _, _, _, offsets, payload = _parse_header(data)
    if not 0 <= ctu_index < len(offsets):
        raise ValidationError(f"ctu index {ctu_index} out of range [0, {len(offsets)})")
    off = offsets[ctu_index]
    end = offsets[ctu_index + 1] if ctu_index + 1 < len(offsets) else len(payload)
    tree = _decode_tree(_BitReader(payload[off:end]))
    validate_tree_geometry(tree, ctu)
    return tree
