"""Camera geometry: backprojection, normal estimation, world transforms.

Conventions used throughout the package:

- Depth maps are indexed ``depth[v, u]`` (row, column). Pixel coordinates are
  written ``(u, v)`` with ``u`` running along the image width.
- The camera looks down +z. A pixel with depth ``d`` backprojects to
  ``d * ((u - cx) / fx, (v - cy) / fy, 1)`` in camera space.
- Normals are unit length and face the camera: ``dot(n, -vertex) >= 0`` in
  camera space.
- World poses are camera-to-world rigid transforms ``p_w = R @ p_c + t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

# Epsilon in every cosine denominator; keeps zero vectors finite
# instead of NaN and is far below the 1e-6 tolerances used by callers.
COSINE_EPS = 1e-8

# Pixels with depth outside this window (meters) are discarded by default;
# consumer-grade RGB-D sensors are unreliable outside roughly this range.
DEPTH_MIN_M = 0.1
DEPTH_MAX_M = 8.0

# Width of the per-frame confidence falloff. Pixels at the image corner get
# weight exp(-1 / (2 * 0.6^2)) ~= 0.25 relative to the principal point.
CONFIDENCE_SIGMA = 0.6


@dataclass
class ConceptVector:
    """A D-dimensional embedding vector.

    ``normalized`` marks vectors known to be unit length; queries require it,
    stored map concepts generally are not (they are running weighted means).
    """

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size == 0:
            raise InputError("concept vector must be 1-D and non-empty")
        if not np.all(np.isfinite(self.values)):
            raise InputError("concept vector must be finite")
        if self.normalized:
            norm = float(np.linalg.norm(self.values))
            if abs(norm - 1.0) > 1e-6:
                raise InputError(
                    f"vector flagged normalized has norm {norm:.8f}"
                )

    @property
    def dim(self) -> int:
        return self.values.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def unit(self) -> "ConceptVector":
        """Return a unit-length copy.

        Raises
        ------
        InputError
            If the vector has zero norm, so there is no direction to keep.
        """
        norm = float(np.linalg.norm(self.values))
        if norm == 0.0:
            raise InputError("cannot normalize a zero vector")
        return ConceptVector(self.values / norm, normalized=True)


def cosine_similarity(a, b, *, eps: float = COSINE_EPS) -> float:
    """Cosine similarity with an epsilon-guarded denominator.

    Accepts ``ConceptVector`` or plain arrays. The guard makes the zero
    vector score 0 against everything rather than dividing by zero.
    """
    va = a.values if isinstance(a, ConceptVector) else np.asarray(a, dtype=np.float64)
    vb = b.values if isinstance(b, ConceptVector) else np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise InputError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    denom = float(np.linalg.norm(va)) * float(np.linalg.norm(vb)) + eps
    return float(np.dot(va, vb) / denom)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InputError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise InputError("image dimensions must be positive")


@dataclass(frozen=True)
class Pose:
    """Camera-to-world rigid transform."""

    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        object.__setattr__(
            self, "rotation", np.asarray(self.rotation, dtype=np.float64)
        )
        object.__setattr__(
            self, "translation", np.asarray(self.translation, dtype=np.float64)
        )
        if self.rotation.shape != (3, 3) or self.translation.shape != (3,):
            raise InputError("pose needs a 3x3 rotation and a 3-vector translation")
        err = np.abs(self.rotation @ self.rotation.T - np.eye(3)).max()
        if err > 1e-6:
            raise InputError(f"rotation is not orthonormal (max deviation {err:.2e})")
        if np.linalg.det(self.rotation) < 0:
            raise InputError("rotation must be proper (det +1), got a reflection")

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))


@dataclass
class InputFrame:
    """One RGB-D observation: depth in meters, optional color, pose, intrinsics."""

    depth: np.ndarray  # (H, W) float, meters
    pose: Pose
    intrinsics: CameraIntrinsics
    color: np.ndarray | None = None  # (H, W, 3) uint8
    frame_id: int = 0

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float64)
        if self.depth.ndim != 2:
            raise InputError("depth must be a 2-D array")
        h, w = self.depth.shape
        if (h, w) != (self.intrinsics.height, self.intrinsics.width):
            raise InputError(
                f"depth is {w}x{h} but intrinsics declare "
                f"{self.intrinsics.width}x{self.intrinsics.height}"
            )
        if self.color is not None:
            self.color = np.asarray(self.color, dtype=np.uint8)
            if self.color.shape != (h, w, 3):
                raise InputError("color must be (H, W, 3) and match depth")


@dataclass
class VertexNormalMaps:
    """Per-pixel vertices and normals plus a shared validity mask.

    ``normals`` is None until :func:`compute_normals` fills it. Entries at
    invalid pixels are zero and must not be read.
    """

    vertices: np.ndarray  # (H, W, 3) float64
    valid: np.ndarray  # (H, W) bool
    normals: np.ndarray | None = None  # (H, W, 3) float64


def backproject(
    depth: np.ndarray,
    intrinsics: CameraIntrinsics,
    *,
    depth_min: float = DEPTH_MIN_M,
    depth_max: float = DEPTH_MAX_M,
) -> VertexNormalMaps:
    """Lift a depth map to camera-space vertices.

    Pixels with non-finite depth or depth outside ``[depth_min, depth_max]``
    are marked invalid and left at zero.
    """
    if depth_min <= 0 or depth_max <= depth_min:
        raise InputError("need 0 < depth_min < depth_max")
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != (intrinsics.height, intrinsics.width):
        raise InputError(
            f"depth shape {depth.shape} does not match intrinsics "
            f"{intrinsics.height}x{intrinsics.width}"
        )
    h, w = depth.shape
    valid = np.isfinite(depth) & (depth >= depth_min) & (depth <= depth_max)

    u = np.arange(w, dtype=np.float64)
    v = np.arange(h, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    z = np.where(valid, depth, 0.0)
    vertices = np.empty((h, w, 3), dtype=np.float64)
    vertices[..., 0] = z * (uu - intrinsics.cx) / intrinsics.fx
    vertices[..., 1] = z * (vv - intrinsics.cy) / intrinsics.fy
    vertices[..., 2] = z
    return VertexNormalMaps(vertices=vertices, valid=valid)


def project(points: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Forward-project camera-space points to pixel coordinates.

    Returns an (N, 3) array of (u, v, z). Points at or behind the camera
    plane get non-finite (u, v); callers filter on z themselves.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    z = pts[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intrinsics.fx * pts[:, 0] / z + intrinsics.cx
        v = intrinsics.fy * pts[:, 1] / z + intrinsics.cy
    out = np.stack([u, v, z], axis=1)
    out[z <= 0, :2] = np.nan
    return out


def compute_normals(maps: VertexNormalMaps) -> VertexNormalMaps:
    """Estimate per-pixel normals by central differences.

    The normal at (u, v) is the normalized cross product of the horizontal
    and vertical vertex differences, flipped to face the camera. Pixels on
    the image border, pixels with any invalid 4-neighbor, and pixels with a
    degenerate cross product come back invalid.
    """
    verts = maps.vertices
    h, w = maps.valid.shape
    normals = np.zeros_like(verts)
    valid = np.zeros_like(maps.valid)
    if h < 3 or w < 3:
        return VertexNormalMaps(vertices=verts, valid=valid, normals=normals)

    center = maps.valid[1:-1, 1:-1]
    ok = (
        center
        & maps.valid[1:-1, :-2]
        & maps.valid[1:-1, 2:]
        & maps.valid[:-2, 1:-1]
        & maps.valid[2:, 1:-1]
    )
    du = verts[1:-1, 2:] - verts[1:-1, :-2]
    dv = verts[2:, 1:-1] - verts[:-2, 1:-1]
    n = np.cross(du, dv)
    length = np.linalg.norm(n, axis=-1)
    ok &= length > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        n = n / length[..., None]
    n = np.where(ok[..., None], n, 0.0)

    # Face the camera: camera sits at the origin, so flip normals whose dot
    # with the viewing ray (the vertex itself) is positive.
    inward = np.sum(n * verts[1:-1, 1:-1], axis=-1) > 0
    n[inward] = -n[inward]

    normals[1:-1, 1:-1] = n
    valid[1:-1, 1:-1] = ok
    return VertexNormalMaps(vertices=verts, valid=valid, normals=normals)


def transform_to_world(maps: VertexNormalMaps, pose: Pose) -> VertexNormalMaps:
    """Apply a camera-to-world pose to vertices (and normals, if present)."""
    h, w, _ = maps.vertices.shape
    flat = maps.vertices.reshape(-1, 3)
    world = (flat @ pose.rotation.T + pose.translation).reshape(h, w, 3)
    world[~maps.valid] = 0.0
    normals = None
    if maps.normals is not None:
        normals = (maps.normals.reshape(-1, 3) @ pose.rotation.T).reshape(h, w, 3)
        normals[~maps.valid] = 0.0
    return VertexNormalMaps(vertices=world, valid=maps.valid.copy(), normals=normals)


def radial_confidence(u, v, intrinsics: CameraIntrinsics, *, sigma: float = CONFIDENCE_SIGMA):
    """Per-pixel fusion weight, falling off with distance from the principal point.

    The radius is normalized by the principal-point half-diagonal, so the
    weight is 1 at the principal point and exp(-1 / (2 sigma^2)) where the
    normalized radius reaches 1. Scalar in, scalar out; arrays broadcast.
    """
    if sigma <= 0:
        raise InputError("sigma must be positive")
    uu = np.asarray(u, dtype=np.float64)
    vv = np.asarray(v, dtype=np.float64)
    half_diag = float(np.hypot(intrinsics.cx, intrinsics.cy))
    # Degenerate principal point at the corner: weight collapses onto it.
    gamma = np.hypot(uu - intrinsics.cx, vv - intrinsics.cy) / max(half_diag, 1e-12)
    alpha = np.exp(-(gamma**2) / (2.0 * sigma * sigma))
    if np.isscalar(u) and np.isscalar(v):
        return float(alpha)
    return alpha
