"""The surfel map and the frame fusion pipeline.

A map is an unordered set of points, each carrying a position, a unit
normal, a confidence weight, an optional color, and a concept vector stored
as an unnormalized running weighted mean. Fusing a frame means:

1. preprocess: backproject depth, estimate normals, move to world space,
2. associate each valid pixel with its best map point (nearest within a
   distance gate, agreeing in normal direction within an angle gate),
3. fold associated pixels into their points with a per-pixel weight that
   decays away from the principal point,
4. insert unmatched pixels that carry a feature as fresh points.

Concurrency: fusions on one map are serialized, and the arrays are only
mutated inside a short commit under the write lock. Readers take the read
lock (see :meth:`SurfelMap.reader`) and in exchange never observe a
half-applied frame.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .errors import InputError, MapBusyError
from .features import PixelFeatureMap
from .geometry import (
    CONFIDENCE_SIGMA,
    DEPTH_MAX_M,
    DEPTH_MIN_M,
    ConceptVector,
    InputFrame,
    VertexNormalMaps,
    backproject,
    compute_normals,
    radial_confidence,
    transform_to_world,
)

# Association gates. A frame pixel may only update a map point closer than
# the distance gate whose normal agrees within the angle gate; both bounds
# follow the fusion defaults used for consumer RGB-D streams.
ASSOC_DIST_M = 0.05
ASSOC_ANGLE_DEG = 20.0

# 21 bits per axis for packed voxel keys: +-2^20 cells of dist_thresh size.
_KEY_BITS = 21
_KEY_BIAS = 1 << (_KEY_BITS - 1)


@dataclass(frozen=True)
class FusionConfig:
    """Knobs for the whole fuse pipeline, snapshotted onto the map."""

    dist_thresh: float = ASSOC_DIST_M
    angle_thresh_deg: float = ASSOC_ANGLE_DEG
    sigma: float = CONFIDENCE_SIGMA
    tau: float = 1.0
    depth_min: float = DEPTH_MIN_M
    depth_max: float = DEPTH_MAX_M
    stride: int = 1

    def __post_init__(self):
        if self.dist_thresh <= 0:
            raise InputError("dist_thresh must be positive")
        if not 0 < self.angle_thresh_deg <= 180:
            raise InputError("angle_thresh_deg must be in (0, 180]")
        if self.sigma <= 0 or self.tau <= 0:
            raise InputError("sigma and tau must be positive")
        if self.stride < 1:
            raise InputError("stride must be >= 1")


@dataclass
class SurfelPoint:
    """One map point, materialized as a standalone record."""

    position: np.ndarray  # (3,) float64, world
    normal: np.ndarray  # (3,) float64, unit
    confidence: float
    concept: ConceptVector  # running weighted mean, not unit norm
    color: np.ndarray | None = None  # (3,) float64 in [0, 255]


@dataclass(frozen=True)
class Association:
    """A frame pixel matched to a map point."""

    pixel: tuple[int, int]  # (u, v) in the coordinates of the maps passed in
    map_index: int
    distance: float


@dataclass
class FusionReport:
    """What one fuse_frame call did with the frame's valid pixels."""

    fused: int = 0  # associated pixels that updated geometry and concept
    geometry_only: int = 0  # associated pixels without feature coverage
    inserted: int = 0
    skipped: int = 0  # valid but unmatched and uncovered
    valid_pixels: int = 0


class _ReadWriteLock:
    """Writer-preferring reader/writer lock built on one condition variable."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False
        self._writers_waiting = 0

    @contextmanager
    def read(self):
        with self._cond:
            while self._writer or self._writers_waiting:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if self._readers == 0:
                    self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            self._writers_waiting += 1
            while self._writer or self._readers:
                self._cond.wait()
            self._writers_waiting -= 1
            self._writer = True
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


def _readonly(arr: np.ndarray) -> np.ndarray:
    view = arr.view()
    view.flags.writeable = False
    return view


class SurfelMap:
    """Structure-of-arrays surfel store with snapshot reads.

    Positions, normals, confidences, and colors live in float64; concepts
    live in float32 (their on-disk precision) with all update arithmetic done
    in float64. Arrays grow by doubling; the public views are read-only.
    """

    def __init__(self, dim: int, config: FusionConfig | None = None):
        if dim <= 0:
            raise InputError("concept dimension must be positive")
        self.dim = int(dim)
        self.config = config or FusionConfig()
        self.frame_count = 0
        self._count = 0
        self._version = 0
        self._capacity = 1024
        self._positions = np.zeros((self._capacity, 3), dtype=np.float64)
        self._normals = np.zeros((self._capacity, 3), dtype=np.float64)
        self._confidences = np.zeros(self._capacity, dtype=np.float64)
        self._concepts = np.zeros((self._capacity, self.dim), dtype=np.float32)
        self._colors = np.zeros((self._capacity, 3), dtype=np.float64)
        self._has_color = np.zeros(self._capacity, dtype=bool)
        self._rw = _ReadWriteLock()
        self._fuse_lock = threading.Lock()
        self._norm_cache: tuple[int, np.ndarray] | None = None

    # -- read side ---------------------------------------------------------

    @property
    def count(self) -> int:
        return self._count

    @property
    def version(self) -> int:
        return self._version

    @property
    def positions(self) -> np.ndarray:
        return _readonly(self._positions[: self._count])

    @property
    def normals(self) -> np.ndarray:
        return _readonly(self._normals[: self._count])

    @property
    def confidences(self) -> np.ndarray:
        return _readonly(self._confidences[: self._count])

    @property
    def concepts(self) -> np.ndarray:
        return _readonly(self._concepts[: self._count])

    @property
    def colors(self) -> np.ndarray:
        return _readonly(self._colors[: self._count])

    @property
    def has_color(self) -> np.ndarray:
        return _readonly(self._has_color[: self._count])

    @contextmanager
    def reader(self):
        """Hold the read lock; array views stay consistent inside the block."""
        with self._rw.read():
            yield self

    def point(self, k: int) -> SurfelPoint:
        if not 0 <= k < self._count:
            raise InputError(f"point index {k} out of range [0, {self._count})")
        color = self._colors[k].copy() if self._has_color[k] else None
        return SurfelPoint(
            position=self._positions[k].copy(),
            normal=self._normals[k].copy(),
            confidence=float(self._confidences[k]),
            concept=ConceptVector(self._concepts[k].astype(np.float64)),
            color=color,
        )

    def concept_norms(self) -> np.ndarray:
        """Float64 norms of all stored concepts, cached per map version."""
        cache = self._norm_cache
        if cache is not None and cache[0] == self._version:
            return cache[1]
        n = self._count
        norms = np.empty(n, dtype=np.float64)
        # chunked so the float64 widening never materializes the whole
        # concept matrix (2 GB of float32 at a million 512-d points)
        for lo in range(0, n, 65536):
            hi = min(lo + 65536, n)
            chunk = self._concepts[lo:hi].astype(np.float64)
            norms[lo:hi] = np.linalg.norm(chunk, axis=1)
        self._norm_cache = (self._version, norms)
        return norms

    # -- write side --------------------------------------------------------

    def _ensure_capacity(self, extra: int):
        needed = self._count + extra
        if needed <= self._capacity:
            return
        new_cap = max(self._capacity * 2, needed)
        for name in ("_positions", "_normals", "_confidences", "_concepts",
                     "_colors", "_has_color"):
            old = getattr(self, name)
            shape = (new_cap,) + old.shape[1:]
            grown = np.zeros(shape, dtype=old.dtype)
            grown[: self._count] = old[: self._count]
            setattr(self, name, grown)
        self._capacity = new_cap

    def extend(
        self,
        positions: np.ndarray,
        normals: np.ndarray,
        confidences: np.ndarray,
        concepts: np.ndarray,
        colors: np.ndarray | None = None,
        has_color: np.ndarray | None = None,
    ):
        """Append points in bulk. Used by loaders and tests; fusion commits
        go through the same path so growth logic lives in one place."""
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        n = positions.shape[0]
        normals = np.asarray(normals, dtype=np.float64).reshape(n, 3)
        confidences = np.asarray(confidences, dtype=np.float64).reshape(n)
        concepts = np.asarray(concepts, dtype=np.float32).reshape(n, self.dim)
        if not (np.isfinite(positions).all() and np.isfinite(normals).all()
                and np.isfinite(confidences).all() and np.isfinite(concepts).all()):
            raise InputError("non-finite values in appended points")
        norms = np.linalg.norm(normals, axis=1)
        if n and not np.allclose(norms, 1.0, atol=1e-3):
            raise InputError("normals must be unit length")
        if n and confidences.min() <= 0:
            raise InputError("confidences must be positive")
        with self._rw.write():
            self._ensure_capacity(n)
            lo, hi = self._count, self._count + n
            self._positions[lo:hi] = positions
            self._normals[lo:hi] = normals
            self._confidences[lo:hi] = confidences
            self._concepts[lo:hi] = concepts
            if colors is not None:
                self._colors[lo:hi] = np.asarray(colors, dtype=np.float64).reshape(n, 3)
                self._has_color[lo:hi] = (
                    True if has_color is None
                    else np.asarray(has_color, dtype=bool).reshape(n)
                )
            self._count = hi
            self._version += 1


# -- single-point fusion ---------------------------------------------------


def fuse_point(
    point: SurfelPoint,
    feature: ConceptVector | None,
    alpha: float,
    position: np.ndarray,
    normal: np.ndarray,
    color: np.ndarray | None = None,
) -> SurfelPoint:
    """Fold one observation into one point; pure, returns a new record.

    Position, normal, and concept all move by the same confidence-weighted
    running mean; the normal is renormalized afterwards and the confidence
    grows by alpha. A None feature updates geometry only, which still counts
    as an observation for the confidence.
    """
    if alpha <= 0:
        raise InputError("alpha must be positive")
    position = np.asarray(position, dtype=np.float64)
    normal = np.asarray(normal, dtype=np.float64)
    c = point.confidence
    total = c + alpha

    new_pos = (c * point.position + alpha * position) / total
    blended_n = (c * point.normal + alpha * normal) / total
    norm = float(np.linalg.norm(blended_n))
    # Antipodal normals can cancel; the angle gate makes that unreachable in
    # the pipeline, so direct callers just keep the previous direction.
    new_normal = blended_n / norm if norm > 1e-12 else point.normal.copy()

    if feature is None:
        new_concept = ConceptVector(point.concept.values.copy())
    else:
        if feature.dim != point.concept.dim:
            raise InputError(
                f"feature dim {feature.dim} != point dim {point.concept.dim}"
            )
        new_concept = ConceptVector(
            (c * point.concept.values + alpha * feature.values) / total
        )

    new_color = None if point.color is None else point.color.copy()
    if color is not None:
        color = np.asarray(color, dtype=np.float64)
        if point.color is None:
            new_color = color.copy()
        else:
            new_color = (c * point.color + alpha * color) / total

    return SurfelPoint(
        position=new_pos,
        normal=new_normal,
        confidence=total,
        concept=new_concept,
        color=new_color,
    )


# -- association -----------------------------------------------------------


def _pack_cells(cells: np.ndarray) -> np.ndarray:
    """Pack (N, 3) integer cell coordinates into sortable int64 keys."""
    if np.any(np.abs(cells) >= _KEY_BIAS - 1):
        raise InputError("positions exceed the voxel-grid key range")
    biased = cells + _KEY_BIAS
    return (
        (biased[:, 0] << (2 * _KEY_BITS))
        | (biased[:, 1] << _KEY_BITS)
        | biased[:, 2]
    )


# Key deltas for the 3x3x3 cell neighborhood. Packing is positional, so a
# neighbor key is plain addition; bitwise OR would mangle negative deltas.
_NEIGHBOR_OFFSETS = np.array(
    [
        dx * (1 << (2 * _KEY_BITS)) + dy * (1 << _KEY_BITS) + dz
        for dx in (-1, 0, 1)
        for dy in (-1, 0, 1)
        for dz in (-1, 0, 1)
    ],
    dtype=np.int64,
)


def associate(
    world: VertexNormalMaps,
    surfels: SurfelMap,
    *,
    dist_thresh: float = ASSOC_DIST_M,
    angle_thresh_deg: float = ASSOC_ANGLE_DEG,
) -> list[Association]:
    """Match every valid frame pixel to its best map point, or to nothing.

    Best means: smallest Euclidean distance among map points within
    ``dist_thresh`` whose normal is within ``angle_thresh_deg`` of the pixel
    normal, ties broken by the lower map index. The search runs on a voxel
    grid with cells of ``dist_thresh``, so its results are exactly those of
    the all-pairs scan. No view-frustum culling happens here: a map point
    within the distance gate is the same surface whether or not it
    reprojects into the image.
    """
    pix, idx, dist = _associate_arrays(
        world, surfels, dist_thresh=dist_thresh, angle_thresh_deg=angle_thresh_deg
    )
    return [
        Association(pixel=(int(u), int(v)), map_index=int(k), distance=float(d))
        for (u, v), k, d in zip(pix, idx, dist)
    ]


def _associate_arrays(
    world: VertexNormalMaps,
    surfels: SurfelMap,
    *,
    dist_thresh: float,
    angle_thresh_deg: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Array-shaped core of :func:`associate`.

    Returns (pixels (M, 2) as (u, v), map indices (M,), distances (M,)) for
    the pixels that matched, in row-major pixel order.
    """
    if world.normals is None:
        raise InputError("associate needs normals; run compute_normals first")
    if dist_thresh <= 0:
        raise InputError("dist_thresh must be positive")

    vv, uu = np.nonzero(world.valid)
    if vv.size == 0 or surfels.count == 0:
        return np.empty((0, 2), np.int64), np.empty(0, np.int64), np.empty(0)
    qpos = world.vertices[vv, uu]
    qnrm = world.normals[vv, uu]

    mpos = surfels.positions
    mnrm = surfels.normals
    cell = dist_thresh
    keys = _pack_cells(np.floor(mpos / cell).astype(np.int64))
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]

    cos_gate = np.cos(np.deg2rad(angle_thresh_deg))
    d2_gate = dist_thresh * dist_thresh

    out_idx = np.full(qpos.shape[0], -1, dtype=np.int64)
    out_d2 = np.full(qpos.shape[0], np.inf)

    # Chunk the pixels to bound the size of the gathered candidate arrays.
    chunk = 16384
    for lo in range(0, qpos.shape[0], chunk):
        hi = min(lo + chunk, qpos.shape[0])
        _associate_chunk(
            qpos[lo:hi], qnrm[lo:hi], mpos, mnrm, sorted_keys, order,
            cell, d2_gate, cos_gate, out_idx[lo:hi], out_d2[lo:hi],
        )

    matched = out_idx >= 0
    pixels = np.stack([uu[matched], vv[matched]], axis=1)
    return pixels, out_idx[matched], np.sqrt(out_d2[matched])


def _associate_chunk(
    qpos, qnrm, mpos, mnrm, sorted_keys, order, cell, d2_gate, cos_gate,
    out_idx, out_d2,
):
    p = qpos.shape[0]
    qkeys = _pack_cells(np.floor(qpos / cell).astype(np.int64))
    neigh = (qkeys[:, None] + _NEIGHBOR_OFFSETS[None, :]).ravel()
    lo = np.searchsorted(sorted_keys, neigh, side="left")
    hi = np.searchsorted(sorted_keys, neigh, side="right")
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return

    # Flatten the [lo, hi) ranges into one candidate list plus owners.
    starts = np.repeat(lo, counts)
    within = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    cand = order[starts + within]
    owner = np.repeat(np.arange(p * 27) // 27, counts)

    diff = mpos[cand] - qpos[owner]
    d2 = np.einsum("ij,ij->i", diff, diff)
    ndot = np.einsum("ij,ij->i", mnrm[cand], qnrm[owner])
    good = (d2 <= d2_gate) & (ndot >= cos_gate)
    d2 = np.where(good, d2, np.inf)

    # Candidates are grouped by owner; reduce each owner's contiguous run.
    per_owner = counts.reshape(p, 27).sum(axis=1)
    present = per_owner > 0
    seg_starts = np.concatenate(([0], np.cumsum(per_owner)[:-1]))
    best_d2 = np.minimum.reduceat(d2, seg_starts[present]) if present.any() else np.empty(0)

    tmp_d2 = np.full(p, np.inf)
    tmp_d2[present] = best_d2
    # Tie-break on the lower map index among candidates at the best distance.
    tie = np.where(d2 == np.repeat(tmp_d2, per_owner), cand, np.iinfo(np.int64).max)
    best_idx = (
        np.minimum.reduceat(tie, seg_starts[present]) if present.any() else np.empty(0)
    )
    hit = present & np.isfinite(tmp_d2)
    out_d2[hit] = tmp_d2[hit]
    sel = np.full(p, np.iinfo(np.int64).max)
    sel[present] = best_idx
    out_idx[hit] = sel[hit]


# -- frame fusion ----------------------------------------------------------


def fuse_frame(
    surfels: SurfelMap,
    frame: InputFrame,
    pixel_features: PixelFeatureMap | None,
    config: FusionConfig | None = None,
    *,
    wait: bool = True,
) -> FusionReport:
    """Fuse one preprocessed frame into the map.

    Associated pixels fold into their points with the radial confidence as
    weight; within one frame, updates landing on the same point collapse to
    their batch weighted mean, which matches applying them pixel by pixel in
    row-major order. Unmatched pixels that carry a feature become new points.
    Geometry arrays mutate only inside the final commit, under the write
    lock, so concurrent readers see the map before or after the frame but
    never in between.

    Fusions on one map are serialized; with ``wait=False`` a busy map raises
    MapBusyError instead of queueing.
    """
    cfg = config or surfels.config
    if pixel_features is not None:
        if pixel_features.dim != surfels.dim:
            raise InputError(
                f"pixel features have dim {pixel_features.dim}, map has {surfels.dim}"
            )
        if pixel_features.features.shape[:2] != frame.depth.shape:
            raise InputError("pixel feature map does not match the frame size")

    if not surfels._fuse_lock.acquire(blocking=wait):
        raise MapBusyError("another fusion is in progress on this map")
    try:
        report = _fuse_frame_locked(surfels, frame, pixel_features, cfg)
    finally:
        surfels._fuse_lock.release()
    return report


def _fuse_frame_locked(
    surfels: SurfelMap,
    frame: InputFrame,
    pixel_features: PixelFeatureMap | None,
    cfg: FusionConfig,
) -> FusionReport:
    maps = backproject(
        frame.depth, frame.intrinsics, depth_min=cfg.depth_min, depth_max=cfg.depth_max
    )
    maps = compute_normals(maps)
    world = transform_to_world(maps, frame.pose)

    s = cfg.stride
    strided = VertexNormalMaps(
        vertices=world.vertices[::s, ::s],
        valid=world.valid[::s, ::s],
        normals=world.normals[::s, ::s],
    )
    report = FusionReport()
    report.valid_pixels = int(strided.valid.sum())

    pix, midx, _dist = _associate_arrays(
        strided, surfels,
        dist_thresh=cfg.dist_thresh, angle_thresh_deg=cfg.angle_thresh_deg,
    )
    # Pixel coordinates on the full-resolution grid.
    fu = pix[:, 0] * s
    fv = pix[:, 1] * s

    if pixel_features is not None:
        covered_assoc = pixel_features.coverage[fv, fu]
    else:
        covered_assoc = np.zeros(fu.shape[0], dtype=bool)

    alpha = radial_confidence(
        fu.astype(np.float64), fv.astype(np.float64), frame.intrinsics, sigma=cfg.sigma
    )
    has_color = frame.color is not None

    # Batch the per-point updates: group by target, form weighted sums.
    upd = _grouped_updates(
        surfels, midx, alpha,
        strided.vertices[pix[:, 1], pix[:, 0]],
        strided.normals[pix[:, 1], pix[:, 0]],
        pixel_features.features[fv, fu] if pixel_features is not None else None,
        covered_assoc,
        frame.color[fv, fu].astype(np.float64) if has_color else None,
    )
    report.fused = int(covered_assoc.sum())
    report.geometry_only = int(fu.shape[0] - report.fused)

    # New points: valid, unmatched, and covered by a feature.
    new_rows = _new_points(
        surfels, strided, pixel_features, pix, s, frame, cfg
    )
    if new_rows is None:
        report.inserted = 0
    else:
        report.inserted = new_rows[0].shape[0]
    report.skipped = report.valid_pixels - report.fused - report.geometry_only - report.inserted

    _commit(surfels, upd, new_rows)
    surfels.frame_count += 1
    return report


def _grouped_updates(
    surfels, midx, alpha, positions, normals, feats, covered, colors
):
    if midx.size == 0:
        return None
    order = np.argsort(midx, kind="stable")
    tgt = midx[order]
    uniq, seg = np.unique(tgt, return_index=True)

    a = alpha[order]
    sum_a = np.add.reduceat(a, seg)
    wpos = np.add.reduceat(a[:, None] * positions[order], seg, axis=0)
    wnrm = np.add.reduceat(a[:, None] * normals[order], seg, axis=0)

    c_old = surfels._confidences[uniq]
    new_conf = c_old + sum_a
    new_pos = (c_old[:, None] * surfels._positions[uniq] + wpos) / new_conf[:, None]
    blended = (c_old[:, None] * surfels._normals[uniq] + wnrm) / new_conf[:, None]
    norms = np.linalg.norm(blended, axis=1)
    degenerate = norms <= 1e-12
    blended[degenerate] = surfels._normals[uniq][degenerate]
    norms[degenerate] = np.linalg.norm(blended[degenerate], axis=1)
    new_nrm = blended / np.maximum(norms, 1e-300)[:, None]

    # Concepts take only feature-bearing updates; their denominator counts
    # only those weights on top of the pre-frame confidence.
    new_concepts = None
    if feats is not None and covered.any():
        a_cov = np.where(covered, alpha, 0.0)[order]
        wf = np.add.reduceat(
            a_cov[:, None] * feats[order].astype(np.float64), seg, axis=0
        )
        sum_cov = np.add.reduceat(a_cov, seg)
        old_f = surfels._concepts[uniq].astype(np.float64)
        denom = c_old + sum_cov
        new_f = (c_old[:, None] * old_f + wf) / denom[:, None]
        new_concepts = np.where(
            (sum_cov > 0)[:, None], new_f, old_f
        ).astype(np.float32)

    new_colors = None
    if colors is not None:
        wcol = np.add.reduceat(a[:, None] * colors[order], seg, axis=0)
        had = surfels._has_color[uniq]
        old_c = surfels._colors[uniq]
        mixed = (c_old[:, None] * old_c + wcol) / new_conf[:, None]
        fresh = wcol / sum_a[:, None]
        new_colors = np.where(had[:, None], mixed, fresh)

    return uniq, new_conf, new_pos, new_nrm, new_concepts, new_colors


def _new_points(surfels, strided, pixel_features, assoc_pix, s, frame, cfg):
    if pixel_features is None:
        return None
    matched = np.zeros(strided.valid.shape, dtype=bool)
    matched[assoc_pix[:, 1], assoc_pix[:, 0]] = True
    cov = pixel_features.coverage[::s, ::s]
    fresh = strided.valid & ~matched & cov
    sv, su = np.nonzero(fresh)
    if sv.size == 0:
        return None
    fu = su * s
    fv = sv * s
    alpha = radial_confidence(
        fu.astype(np.float64), fv.astype(np.float64), frame.intrinsics, sigma=cfg.sigma
    )
    concepts = pixel_features.features[fv, fu].astype(np.float32)
    colors = None
    if frame.color is not None:
        colors = frame.color[fv, fu].astype(np.float64)
    return (
        strided.vertices[sv, su],
        strided.normals[sv, su],
        alpha,
        concepts,
        colors,
    )


def _commit(surfels: SurfelMap, upd, new_rows):
    with surfels._rw.write():
        if upd is not None:
            uniq, conf, pos, nrm, concepts, colors = upd
            surfels._confidences[uniq] = conf
            surfels._positions[uniq] = pos
            surfels._normals[uniq] = nrm
            if concepts is not None:
                surfels._concepts[uniq] = concepts
            if colors is not None:
                surfels._colors[uniq] = colors
                surfels._has_color[uniq] = True
        if new_rows is not None:
            pos, nrm, alpha, concepts, colors = new_rows
            n = pos.shape[0]
            surfels._ensure_capacity(n)
            lo, hi = surfels._count, surfels._count + n
            surfels._positions[lo:hi] = pos
            surfels._normals[lo:hi] = nrm
            surfels._confidences[lo:hi] = alpha
            surfels._concepts[lo:hi] = concepts
            if colors is not None:
                surfels._colors[lo:hi] = colors
                surfels._has_color[lo:hi] = True
            surfels._count = hi
        surfels._version += 1
