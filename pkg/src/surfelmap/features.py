"""Per-frame feature blending: region proposals in, pixel-aligned features out.

A frame arrives as one global embedding plus R region proposals, each with a
mask and a local embedding. Blending balances the two per region:

1. score each region's local feature against the global one,
2. score each region against the other regions (uniqueness),
3. softmax the summed scores into a mixing weight,
4. blend global and local per region and renormalize,
5. rasterize blended vectors onto the pixel grid, summing where masks
   overlap and normalizing each covered pixel once at the end.

Reductions here use exactly rounded sums (math.fsum) and per-pair dot
products rather than one matrix product: permuting region order must permute
the outputs bitwise, which blocked BLAS reductions do not guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFeatureError, InputError
from .geometry import COSINE_EPS, ConceptVector

# Softmax temperature for the mixing weights; 1 leaves logits untouched.
DEFAULT_TAU = 1.0

# Row blocks for rasterization, sized to keep the float64 accumulator
# around 150 MB even at D = 1024 on a 640-wide image.
_RASTER_BLOCK_ROWS = 32


def _tight_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1])


@dataclass
class RegionProposal:
    """One class-agnostic mask proposal with its local embedding.

    ``bbox`` is (u_min, v_min, u_max, v_max), inclusive, and must be the
    tight bounding box of the mask; omit it to have it derived.
    """

    mask: np.ndarray  # (H, W) bool
    local_feature: ConceptVector
    bbox: tuple[int, int, int, int] | None = None

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 2:
            raise InputError("region mask must be 2-D")
        if not self.mask.any():
            raise InputError("region mask is empty")
        tight = _tight_bbox(self.mask)
        if self.bbox is None:
            self.bbox = tight
        elif tuple(self.bbox) != tight:
            raise InputError(f"bbox {tuple(self.bbox)} is not tight, expected {tight}")


@dataclass
class FrameFeaturePack:
    """Everything the fusion stage needs to know about one frame's features."""

    frame_id: int
    width: int
    height: int
    global_feature: ConceptVector
    regions: list[RegionProposal] = field(default_factory=list)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InputError("pack dimensions must be positive")
        dim = self.global_feature.dim
        for i, region in enumerate(self.regions):
            if region.mask.shape != (self.height, self.width):
                raise InputError(
                    f"region {i} mask is {region.mask.shape}, "
                    f"pack is {self.height}x{self.width}"
                )
            if region.local_feature.dim != dim:
                raise InputError(
                    f"region {i} feature dim {region.local_feature.dim} != {dim}"
                )

    @property
    def dim(self) -> int:
        return self.global_feature.dim

    @property
    def region_count(self) -> int:
        return len(self.regions)


@dataclass
class PixelFeatureMap:
    """Unit-norm feature per covered pixel, float32, plus the coverage mask."""

    features: np.ndarray  # (H, W, D) float32
    coverage: np.ndarray  # (H, W) bool

    @property
    def dim(self) -> int:
        return self.features.shape[2]


def _cosine_pair(a: np.ndarray, na: float, b: np.ndarray, nb: float) -> float:
    return float(np.dot(a, b)) / (na * nb + COSINE_EPS)


def global_alignment(pack: FrameFeaturePack) -> np.ndarray:
    """Cosine of each region's local feature against the frame's global one."""
    g = pack.global_feature.values
    ng = float(np.linalg.norm(g))
    out = np.empty(pack.region_count, dtype=np.float64)
    for i, region in enumerate(pack.regions):
        l = region.local_feature.values
        out[i] = _cosine_pair(l, float(np.linalg.norm(l)), g, ng)
    return out


def region_uniqueness(pack: FrameFeaturePack) -> np.ndarray:
    """Average similarity of each region to all the other regions.

    The divisor is the region count R, not R - 1, so a lone region scores
    exactly 0. Pair similarities use the same epsilon-guarded cosine as the
    global term.
    """
    r = pack.region_count
    locals_ = [region.local_feature.values for region in pack.regions]
    norms = [float(np.linalg.norm(l)) for l in locals_]
    sims = np.zeros((r, r), dtype=np.float64)
    for i in range(r):
        for j in range(i + 1, r):
            sims[i, j] = sims[j, i] = _cosine_pair(locals_[i], norms[i], locals_[j], norms[j])
    out = np.empty(r, dtype=np.float64)
    for i in range(r):
        out[i] = math.fsum(sims[i, j] for j in range(r) if j != i) / r
    return out


def mixing_weights(
    alignment: np.ndarray,
    uniqueness: np.ndarray,
    *,
    tau: float = DEFAULT_TAU,
) -> np.ndarray:
    """Softmax of (alignment + uniqueness) / tau across regions.

    The max logit is subtracted before exponentiation, so uniformly shifted
    logits give the same weights and large logits cannot overflow.
    """
    if tau <= 0:
        raise InputError("tau must be positive")
    a = np.asarray(alignment, dtype=np.float64)
    u = np.asarray(uniqueness, dtype=np.float64)
    if a.shape != u.shape or a.ndim != 1 or a.size == 0:
        raise InputError("alignment and uniqueness must be equal-length 1-D arrays")
    z = (a + u) / tau
    e = np.exp(z - z.max())
    return e / math.fsum(e)


def blend_features(pack: FrameFeaturePack, weights: np.ndarray) -> np.ndarray:
    """Mix global into local per region and renormalize.

    Region i becomes ``w_i * global + (1 - w_i) * local_i``, scaled back to
    unit length. A blend that cancels to (numerically) zero has no direction
    left and raises DegenerateFeatureError naming the region.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (pack.region_count,):
        raise InputError(
            f"got {weights.shape[0] if weights.ndim == 1 else 'malformed'} "
            f"weights for {pack.region_count} regions"
        )
    g = pack.global_feature.values
    out = np.empty((pack.region_count, pack.dim), dtype=np.float64)
    for i, region in enumerate(pack.regions):
        w = weights[i]
        blended = w * g + (1.0 - w) * region.local_feature.values
        norm = float(np.linalg.norm(blended))
        if norm < 1e-12:
            raise DegenerateFeatureError(
                f"region {i}: blended feature cancelled to zero"
            )
        out[i] = blended / norm
    return out


def rasterize(pack: FrameFeaturePack, blended: np.ndarray) -> PixelFeatureMap:
    """Scatter blended region vectors onto the pixel grid.

    Pixels covered by several masks accumulate a plain sum, in region index
    order, and are normalized once at the end. Accumulation runs in float64
    over row blocks; the result is stored float32.
    """
    blended = np.asarray(blended, dtype=np.float64)
    if blended.shape != (pack.region_count, pack.dim):
        raise InputError(
            f"blended array is {blended.shape}, "
            f"expected ({pack.region_count}, {pack.dim})"
        )
    h, w, d = pack.height, pack.width, pack.dim
    features = np.zeros((h, w, d), dtype=np.float32)
    coverage = np.zeros((h, w), dtype=bool)
    for region in pack.regions:
        coverage |= region.mask

    for row0 in range(0, h, _RASTER_BLOCK_ROWS):
        row1 = min(row0 + _RASTER_BLOCK_ROWS, h)
        acc = np.zeros((row1 - row0, w, d), dtype=np.float64)
        for i, region in enumerate(pack.regions):
            sub = region.mask[row0:row1]
            if sub.any():
                acc[sub] += blended[i]
        covered = coverage[row0:row1]
        norms = np.linalg.norm(acc[covered], axis=-1)
        # A covered pixel sums unit vectors; exact cancellation across
        # overlapping regions is the only way to land at zero.
        if np.any(norms < 1e-12):
            raise DegenerateFeatureError("pixel feature sum cancelled to zero")
        acc[covered] /= norms[:, None]
        block = np.zeros((row1 - row0, w, d), dtype=np.float32)
        block[covered] = acc[covered].astype(np.float32)
        features[row0:row1] = block
    return PixelFeatureMap(features=features, coverage=coverage)


def compute_pixel_features(
    pack: FrameFeaturePack,
    *,
    tau: float = DEFAULT_TAU,
) -> PixelFeatureMap:
    """Full blending chain for one frame.

    A pack with no regions yields an all-uncovered map; fusion will then
    update geometry only.
    """
    if pack.region_count == 0:
        return PixelFeatureMap(
            features=np.zeros((pack.height, pack.width, pack.dim), dtype=np.float32),
            coverage=np.zeros((pack.height, pack.width), dtype=bool),
        )
    alignment = global_alignment(pack)
    uniqueness = region_uniqueness(pack)
    weights = mixing_weights(alignment, uniqueness, tau=tau)
    blended = blend_features(pack, weights)
    return rasterize(pack, blended)
