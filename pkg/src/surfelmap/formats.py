"""On-disk formats: frame feature packs, maps, label files, vector tables.

All three binary formats are little-endian with float32 payloads:

``CFF1`` frame feature pack::

    "CFF1" | u32 version | u32 height | u32 width | u32 dim | u32 regions
    dim * f32                      global feature
    per region:
        u32 pair_count
        pair_count * (u32 start, u32 run)   row-major RLE over flat pixels
        4 * u32                    bbox (u_min, v_min, u_max, v_max) inclusive
        dim * f32                  local feature

``CFM1`` surfel map::

    "CFM1" | u32 version | u32 dim | u64 count
    f32 sigma | f32 tau | f32 dist_thresh | f32 angle_thresh_deg
    f32 depth_min | f32 depth_max | u32 stride | u32 frame_count
    per point:
        3*f32 position | 3*f32 normal | f32 confidence
        3*u8 color | u8 has_color | dim*f32 concept

``CFL1`` ground-truth labels::

    "CFL1" | u32 version | u64 count | count * u32 labels

Readers validate structure as they go and raise FormatError with the byte
offset of the first problem; nothing else escapes on malformed input. In
memory, loaded arrays are widened to float64 (concepts stay float32, their
disk precision), so a save/load/save cycle is byte-identical.

Vector tables are JSON: either ``{"name": [floats], ...}`` or the same
mapping nested under a ``"vectors"`` key.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError
from .features import FrameFeaturePack, RegionProposal
from .fusion import FusionConfig, SurfelMap
from .geometry import ConceptVector

PACK_MAGIC = b"CFF1"
MAP_MAGIC = b"CFM1"
LABEL_MAGIC = b"CFL1"
FORMAT_VERSION = 1

# Sanity caps so fuzzed headers fail fast instead of attempting huge
# allocations. All sit far above any realistic payload.
_MAX_DIM = 65536
_MAX_SIDE = 32768
_MAX_REGIONS = 1_000_000
_MAX_POINTS = 1 << 40


class _Cursor:
    """Byte reader that knows its offset and raises FormatError on underrun."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, count: int, what: str) -> bytes:
        if self.offset + count > len(self.data):
            raise FormatError(
                f"truncated while reading {what}", offset=self.offset
            )
        chunk = self.data[self.offset : self.offset + count]
        self.offset += count
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack("<Q", self.take(8, what))[0]

    def f32(self, what: str) -> float:
        return struct.unpack("<f", self.take(4, what))[0]

    def f32_array(self, count: int, what: str) -> np.ndarray:
        raw = self.take(4 * count, what)
        return np.frombuffer(raw, dtype="<f4").copy()

    def expect_end(self):
        if self.offset != len(self.data):
            raise FormatError(
                f"{len(self.data) - self.offset} trailing bytes", offset=self.offset
            )


def _check_magic(cur: _Cursor, magic: bytes, kind: str):
    got = cur.take(4, "magic")
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r} ({kind})", offset=0)
    version = cur.u32("version")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported {kind} version {version}", offset=4)


def _check_finite(arr: np.ndarray, what: str, offset: int):
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"non-finite values in {what}", offset=offset)


# -- frame feature packs ---------------------------------------------------


def encode_frame_pack(pack: FrameFeaturePack) -> bytes:
    out = [
        PACK_MAGIC,
        struct.pack(
            "<IIIII",
            FORMAT_VERSION,
            pack.height,
            pack.width,
            pack.dim,
            pack.region_count,
        ),
        pack.global_feature.values.astype("<f4").tobytes(),
    ]
    for region in pack.regions:
        starts, runs = _rle_encode(region.mask)
        out.append(struct.pack("<I", starts.size))
        pairs = np.empty(2 * starts.size, dtype="<u4")
        pairs[0::2] = starts
        pairs[1::2] = runs
        out.append(pairs.tobytes())
        out.append(struct.pack("<IIII", *region.bbox))
        out.append(region.local_feature.values.astype("<f4").tobytes())
    return b"".join(out)


def decode_frame_pack(data: bytes, *, frame_id: int = 0) -> FrameFeaturePack:
    cur = _Cursor(data)
    _check_magic(cur, PACK_MAGIC, "frame pack")
    height = cur.u32("height")
    width = cur.u32("width")
    dim = cur.u32("dim")
    regions = cur.u32("region count")
    if not 0 < height <= _MAX_SIDE or not 0 < width <= _MAX_SIDE:
        raise FormatError(f"implausible frame size {width}x{height}", offset=8)
    if not 0 < dim <= _MAX_DIM:
        raise FormatError(f"implausible feature dim {dim}", offset=16)
    if regions > _MAX_REGIONS:
        raise FormatError(f"implausible region count {regions}", offset=20)

    goff = cur.offset
    global_values = cur.f32_array(dim, "global feature")
    _check_finite(global_values, "global feature", goff)

    proposals = []
    pixel_count = height * width
    for r in range(regions):
        proposals.append(
            _decode_region(cur, r, width, height, pixel_count, dim)
        )
    cur.expect_end()
    return FrameFeaturePack(
        frame_id=frame_id,
        width=width,
        height=height,
        global_feature=ConceptVector(global_values.astype(np.float64)),
        regions=proposals,
    )


def _decode_region(
    cur: _Cursor, index: int, width: int, height: int, pixel_count: int, dim: int
) -> RegionProposal:
    where = f"region {index}"
    pair_count = cur.u32(f"{where} pair count")
    if pair_count == 0:
        raise FormatError(f"{where} has an empty mask", offset=cur.offset - 4)
    if pair_count > pixel_count:
        raise FormatError(
            f"{where} declares {pair_count} runs for {pixel_count} pixels",
            offset=cur.offset - 4,
        )
    pairs_off = cur.offset
    raw = cur.take(8 * pair_count, f"{where} rle pairs")
    pairs = np.frombuffer(raw, dtype="<u4").astype(np.int64)
    starts, runs = pairs[0::2], pairs[1::2]
    ends = starts + runs
    if np.any(runs < 1):
        raise FormatError(f"{where} has a zero-length run", offset=pairs_off)
    if np.any(ends > pixel_count):
        raise FormatError(f"{where} run exceeds the pixel grid", offset=pairs_off)
    if np.any(starts[1:] < ends[:-1]):
        raise FormatError(
            f"{where} runs overlap or are out of order", offset=pairs_off
        )

    bbox_off = cur.offset
    bbox = struct.unpack("<IIII", cur.take(16, f"{where} bbox"))
    feat_off = cur.offset
    local = cur.f32_array(dim, f"{where} local feature")
    _check_finite(local, f"{where} local feature", feat_off)

    mask = np.zeros(pixel_count, dtype=bool)
    for s, e in zip(starts, ends):
        mask[s:e] = True
    mask = mask.reshape(height, width)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    tight = (int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1]))
    if tuple(bbox) != tight:
        raise FormatError(
            f"{where} bbox {tuple(bbox)} does not match its mask {tight}",
            offset=bbox_off,
        )
    return RegionProposal(
        mask=mask,
        local_feature=ConceptVector(local.astype(np.float64)),
        bbox=tight,
    )


def _rle_encode(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    flat = mask.ravel().astype(np.int8)
    edges = np.diff(np.concatenate(([0], flat, [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return starts.astype(np.uint32), (ends - starts).astype(np.uint32)


def write_frame_pack(pack: FrameFeaturePack, path: str | Path):
    Path(path).write_bytes(encode_frame_pack(pack))


def read_frame_pack(path: str | Path, *, frame_id: int = 0) -> FrameFeaturePack:
    return decode_frame_pack(Path(path).read_bytes(), frame_id=frame_id)


# -- surfel maps -----------------------------------------------------------


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype(
        [
            ("position", "<f4", 3),
            ("normal", "<f4", 3),
            ("confidence", "<f4"),
            ("color", "u1", 3),
            ("has_color", "u1"),
            ("concept", "<f4", dim),
        ]
    )


def encode_map(surfels: SurfelMap) -> bytes:
    cfg = surfels.config
    header = b"".join(
        [
            MAP_MAGIC,
            struct.pack("<I", FORMAT_VERSION),
            struct.pack("<I", surfels.dim),
            struct.pack("<Q", surfels.count),
            struct.pack(
                "<ffffff",
                cfg.sigma,
                cfg.tau,
                cfg.dist_thresh,
                cfg.angle_thresh_deg,
                cfg.depth_min,
                cfg.depth_max,
            ),
            struct.pack("<II", cfg.stride, surfels.frame_count),
        ]
    )
    records = np.zeros(surfels.count, dtype=_record_dtype(surfels.dim))
    records["position"] = surfels.positions.astype("<f4")
    records["normal"] = surfels.normals.astype("<f4")
    records["confidence"] = surfels.confidences.astype("<f4")
    records["color"] = np.clip(np.rint(surfels.colors), 0, 255).astype("u1")
    records["has_color"] = surfels.has_color.astype("u1")
    records["concept"] = surfels.concepts
    return header + records.tobytes()


def decode_map(data: bytes) -> SurfelMap:
    cur = _Cursor(data)
    _check_magic(cur, MAP_MAGIC, "map")
    dim = cur.u32("dim")
    if not 0 < dim <= _MAX_DIM:
        raise FormatError(f"implausible concept dim {dim}", offset=8)
    count = cur.u64("point count")
    if count > _MAX_POINTS:
        raise FormatError(f"implausible point count {count}", offset=12)

    cfg_off = cur.offset
    sigma, tau, dist, angle, dmin, dmax = struct.unpack(
        "<ffffff", cur.take(24, "config block")
    )
    stride = cur.u32("stride")
    frame_count = cur.u32("frame count")
    try:
        config = FusionConfig(
            dist_thresh=dist,
            angle_thresh_deg=angle,
            sigma=sigma,
            tau=tau,
            depth_min=dmin,
            depth_max=dmax,
            stride=stride,
        )
    except Exception as exc:
        raise FormatError(f"invalid config block: {exc}", offset=cfg_off) from None

    rec_dtype = _record_dtype(dim)
    rec_off = cur.offset
    raw = cur.take(rec_dtype.itemsize * count, "point records")
    cur.expect_end()
    records = np.frombuffer(raw, dtype=rec_dtype)

    positions = records["position"].astype(np.float64)
    normals = records["normal"].astype(np.float64)
    confidences = records["confidence"].astype(np.float64)
    # Strided view into the raw buffer; extend() copies it into the map.
    concepts = records["concept"]
    colors = records["color"].astype(np.float64)
    has_color = records["has_color"]

    _check_finite(positions, "positions", rec_off)
    _check_finite(normals, "normals", rec_off)
    _check_finite(confidences, "confidences", rec_off)
    _check_finite(concepts, "concepts", rec_off)
    if count:
        if np.any(confidences <= 0):
            raise FormatError("non-positive confidence", offset=rec_off)
        norm_err = np.abs(np.linalg.norm(normals, axis=1) - 1.0)
        if np.any(norm_err > 1e-3):
            raise FormatError("normal is not unit length", offset=rec_off)
        if np.any(has_color > 1):
            raise FormatError("has_color flag must be 0 or 1", offset=rec_off)

    surfels = SurfelMap(dim=dim, config=config)
    surfels.frame_count = frame_count
    if count:
        surfels.extend(
            positions,
            normals,
            confidences,
            concepts,
            colors=colors,
            has_color=has_color.astype(bool),
        )
    return surfels


def save_map(surfels: SurfelMap, path: str | Path):
    Path(path).write_bytes(encode_map(surfels))


def load_map(path: str | Path) -> SurfelMap:
    return decode_map(Path(path).read_bytes())


# -- ground-truth labels ---------------------------------------------------


def encode_labels(labels: np.ndarray) -> bytes:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise InputError("labels must be 1-D")
    if labels.size and (labels.min() < 0 or labels.max() >= 1 << 32):
        raise InputError("labels must fit in an unsigned 32-bit integer")
    header = LABEL_MAGIC + struct.pack("<IQ", FORMAT_VERSION, labels.size)
    return header + labels.astype("<u4").tobytes()


def decode_labels(data: bytes) -> np.ndarray:
    cur = _Cursor(data)
    _check_magic(cur, LABEL_MAGIC, "labels")
    count = cur.u64("label count")
    if count > _MAX_POINTS:
        raise FormatError(f"implausible label count {count}", offset=8)
    raw = cur.take(4 * count, "labels")
    cur.expect_end()
    return np.frombuffer(raw, dtype="<u4").astype(np.int64)


def write_labels(labels: np.ndarray, path: str | Path):
    Path(path).write_bytes(encode_labels(labels))


def read_labels(path: str | Path) -> np.ndarray:
    return decode_labels(Path(path).read_bytes())


# -- vector tables ---------------------------------------------------------


def load_vector_table(path: str | Path) -> dict[str, ConceptVector]:
    """Load a JSON name -> vector table; all vectors must share one dim."""
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"vector table is not valid JSON: {exc}") from None
    return parse_vector_table(payload)


def parse_vector_table(payload) -> dict[str, ConceptVector]:
    if isinstance(payload, dict) and isinstance(payload.get("vectors"), dict):
        payload = payload["vectors"]
    if not isinstance(payload, dict) or not payload:
        raise FormatError("vector table must be a non-empty JSON object")
    table: dict[str, ConceptVector] = {}
    dim = None
    for name, values in payload.items():
        if not isinstance(values, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in values
        ):
            raise FormatError(f"vector {name!r} must be a list of numbers")
        arr = np.asarray(values, dtype=np.float64)
        if arr.size == 0 or not np.all(np.isfinite(arr)):
            raise FormatError(f"vector {name!r} must be non-empty and finite")
        if dim is None:
            dim = arr.size
        elif arr.size != dim:
            raise FormatError(
                f"vector {name!r} has dim {arr.size}, table started with {dim}"
            )
        table[name] = ConceptVector(arr)
    return table
