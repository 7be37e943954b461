"""Serialize extraction output: CFF1 packs and JSON vector tables.

This is an independent implementation of the CFF1 wire format::

    "CFF1" | u32 version | u32 height | u32 width | u32 dim | u32 regions
    dim * f32 global feature
    per region:
        u32 pair_count
        pair_count * (u32 start, u32 run)    maximal runs over row-major
                                             flattened pixel indices
        4 * u32 bbox (u_min, v_min, u_max, v_max), inclusive and tight
        dim * f32 local feature

Keeping the writer separate from the engine's codec is what makes the
cross-loader conformance tests meaningful: files produced here are
validated by the consumer's own reader, not by the code that wrote them.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import InputError

PACK_MAGIC = b"CFF1"
PACK_VERSION = 1


def rle_runs(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(starts, lengths) of maximal runs in the flattened mask."""
    flat = mask.ravel().astype(np.int8)
    edges = np.diff(np.concatenate(([0], flat, [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return starts.astype("<u4"), (ends - starts).astype("<u4")


def encode_pack(
    height: int,
    width: int,
    global_feature: np.ndarray,
    regions: list[tuple[np.ndarray, tuple[int, int, int, int], np.ndarray]],
) -> bytes:
    """Serialize one frame; regions are (mask, bbox, local_feature)."""
    global_feature = np.asarray(global_feature, dtype=np.float64)
    dim = global_feature.shape[0]
    if not regions:
        raise InputError("a frame pack needs at least one region")
    out = [
        PACK_MAGIC,
        struct.pack("<IIIII", PACK_VERSION, height, width, dim, len(regions)),
        global_feature.astype("<f4").tobytes(),
    ]
    for mask, bbox, local in regions:
        if mask.shape != (height, width):
            raise InputError(f"mask shape {mask.shape} does not match frame")
        local = np.asarray(local, dtype=np.float64)
        if local.shape != (dim,):
            raise InputError("local feature dimension mismatch")
        starts, runs = rle_runs(mask)
        if starts.size == 0:
            raise InputError("empty region mask")
        out.append(struct.pack("<I", starts.size))
        pairs = np.empty(2 * starts.size, dtype="<u4")
        pairs[0::2] = starts
        pairs[1::2] = runs
        out.append(pairs.tobytes())
        out.append(struct.pack("<IIII", *bbox))
        out.append(local.astype("<f4").tobytes())
    return b"".join(out)


def write_atomic(path: str | Path, data: bytes):
    """Write via temp file + rename so readers never see a partial file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def update_table(path: str | Path, entries: dict[str, np.ndarray]):
    """Merge name->vector entries into a JSON vector table file."""
    path = Path(path)
    table: dict[str, list[float]] = {}
    if path.exists():
        try:
            loaded = json.loads(path.read_text())
        except (OSError, ValueError) as exc:
            raise InputError(f"existing table {path} is unreadable: {exc}")
        if not isinstance(loaded, dict):
            raise InputError(f"existing table {path} is not a JSON object")
        table.update(loaded)
    for name, vector in entries.items():
        table[name] = [float(x) for x in np.asarray(vector).ravel()]
    write_atomic(path, json.dumps(table, indent=1).encode())
