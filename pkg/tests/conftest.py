"""Shared fixtures and synthetic scene builders.

The depth renderer draws fronto-parallel front faces of axis-aligned
boxes over a background plane, which is enough to exercise fusion end to
end while keeping every expected value computable by hand: a face at
depth z projects to the pixel rectangle given by the pinhole model, its
normals point straight back at the camera, and translating the camera
shifts the rectangle without changing the face's depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pytest

from surfelmap import (
    CameraIntrinsics,
    ConceptVector,
    FrameFeaturePack,
    InputFrame,
    Pose,
    RegionProposal,
    SurfelMap,
)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@dataclass
class Box:
    """Axis-aligned box; only the face at z_front is ever rendered."""

    x0: float
    x1: float
    y0: float
    y1: float
    z_front: float
    object_id: int = 0


@dataclass
class Scene:
    boxes: list[Box]
    background_z: float = 4.0
    intrinsics: CameraIntrinsics = field(default_factory=lambda: CameraIntrinsics(
        fx=60.0, fy=60.0, cx=32.0, cy=24.0, width=64, height=48,
    ))

    def render(self, camera_xyz=(0.0, 0.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
        """Depth and object-id images from a translated, unrotated camera.

        The id image holds -1 for background pixels.
        """
        intr = self.intrinsics
        tx, ty, tz = camera_xyz
        u = np.arange(intr.width, dtype=np.float64)
        v = np.arange(intr.height, dtype=np.float64)
        uu, vv = np.meshgrid(u, v)

        depth = np.full((intr.height, intr.width), self.background_z - tz)
        ids = np.full((intr.height, intr.width), -1, dtype=np.int64)
        for box in self.boxes:
            z = box.z_front - tz
            if z <= 0:
                continue
            x = (uu - intr.cx) / intr.fx * z + tx
            y = (vv - intr.cy) / intr.fy * z + ty
            hit = (
                (x >= box.x0) & (x <= box.x1)
                & (y >= box.y0) & (y <= box.y1)
                & (z < depth)
            )
            depth[hit] = z
            ids[hit] = box.object_id
        return depth, ids

    def frame(self, camera_xyz=(0.0, 0.0, 0.0), frame_id=0) -> InputFrame:
        depth, _ = self.render(camera_xyz)
        pose = Pose(
            rotation=np.eye(3),
            translation=np.asarray(camera_xyz, dtype=np.float64),
        )
        return InputFrame(
            depth=depth, pose=pose, intrinsics=self.intrinsics, frame_id=frame_id
        )

    def pack(self, features: dict[int, np.ndarray], global_feature: np.ndarray,
             camera_xyz=(0.0, 0.0, 0.0), frame_id=0) -> FrameFeaturePack:
        """One region per object id present in the rendered id image."""
        _, ids = self.render(camera_xyz)
        regions = []
        for object_id, feat in sorted(features.items()):
            mask = ids == object_id
            if not mask.any():
                continue
            regions.append(RegionProposal(
                mask=mask, local_feature=ConceptVector(np.asarray(feat, dtype=np.float64)),
            ))
        return FrameFeaturePack(
            frame_id=frame_id,
            width=self.intrinsics.width,
            height=self.intrinsics.height,
            global_feature=ConceptVector(np.asarray(global_feature, dtype=np.float64)),
            regions=regions,
        )


@pytest.fixture
def three_box_scene() -> Scene:
    """Three well-separated boxes in front of a far wall."""
    return Scene(boxes=[
        Box(-1.0, -0.5, -0.4, 0.1, 2.0, object_id=0),
        Box(0.3, 0.9, -0.5, 0.0, 2.5, object_id=1),
        Box(-0.3, 0.2, 0.3, 0.7, 1.8, object_id=2),
    ])


def random_map(rng, count: int, dim: int, *, spread: float = 2.0) -> SurfelMap:
    """A map of random unit-normal points with random positive confidence."""
    surfels = SurfelMap(dim=dim)
    if count == 0:
        return surfels
    positions = rng.uniform(-spread, spread, size=(count, 3))
    normals = rng.normal(size=(count, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    confidences = rng.uniform(0.1, 5.0, size=count)
    concepts = rng.normal(size=(count, dim)).astype(np.float32)
    surfels.extend(positions, normals, confidences, concepts)
    return surfels


def orthogonal_features(dim: int, count: int) -> list[np.ndarray]:
    """First ``count`` canonical basis vectors, so cross-talk is exactly 0."""
    feats = []
    for k in range(count):
        e = np.zeros(dim)
        e[k] = 1.0
        feats.append(e)
    return feats
