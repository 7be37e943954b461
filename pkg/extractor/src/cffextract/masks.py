"""Deterministic class-agnostic region proposals.

The ``colorseg`` backend quantizes colors to 4 levels per channel and
takes connected components of equal-color pixels, then reshapes that
set to exactly the requested proposal count: surplus components are
dropped smallest-first, a deficit is covered by splitting the largest
components along their longer bbox axis. Everything is a pure function
of the pixel values, so reruns are bit-identical.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import InputError

QUANT_SHIFT = 6  # 256 >> 6 = 4 levels per channel


def check_image(image: np.ndarray) -> np.ndarray:
    """Validate and return an (H, W, 3) uint8 view of ``image``."""
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        raise InputError(f"image must be uint8, got {arr.dtype}")
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InputError(f"image must be HxW or HxWx3, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputError("image has no pixels")
    return arr


def quantize_ids(image: np.ndarray) -> np.ndarray:
    """Per-pixel color bucket id in [0, 64)."""
    q = (image >> QUANT_SHIFT).astype(np.int32)
    return q[:, :, 0] * 16 + q[:, :, 1] * 4 + q[:, :, 2]


def tight_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Inclusive (u_min, v_min, u_max, v_max) of a non-empty mask."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1])


class Proposal:
    __slots__ = ("mask", "bbox", "size", "first")

    def __init__(self, mask: np.ndarray):
        self.mask = mask
        self.bbox = tight_bbox(mask)
        self.size = int(mask.sum())
        self.first = int(np.flatnonzero(mask.ravel())[0])

    def sort_key(self):
        return (-self.size, self.first)


def _components(image: np.ndarray) -> list[Proposal]:
    ids = quantize_ids(image)
    out = []
    for value in np.unique(ids):
        labeled, count = ndimage.label(ids == value)
        for k in range(1, count + 1):
            out.append(Proposal(labeled == k))
    out.sort(key=Proposal.sort_key)
    return out


def _split(prop: Proposal) -> tuple[Proposal, Proposal]:
    u0, v0, u1, v1 = prop.bbox
    a = np.zeros_like(prop.mask)
    b = np.zeros_like(prop.mask)
    if v1 - v0 >= u1 - u0:
        mid = (v0 + v1) // 2
        a[: mid + 1] = prop.mask[: mid + 1]
        b[mid + 1 :] = prop.mask[mid + 1 :]
    else:
        mid = (u0 + u1) // 2
        a[:, : mid + 1] = prop.mask[:, : mid + 1]
        b[:, mid + 1 :] = prop.mask[:, mid + 1 :]
    return Proposal(a), Proposal(b)


def propose_regions(image: np.ndarray, count: int) -> list[Proposal]:
    """Exactly ``count`` non-empty proposals for a validated image."""
    if count < 1:
        raise InputError("proposal count must be >= 1")
    props = _components(image)

    if len(props) > count:
        props = props[:count]
    while len(props) < count:
        # largest splittable proposal first; a tight bbox guarantees both
        # halves stay non-empty whenever the longer side spans >= 2
        splittable = [p for p in props
                      if max(p.bbox[2] - p.bbox[0], p.bbox[3] - p.bbox[1]) >= 1]
        if not splittable:
            break
        victim = min(splittable, key=Proposal.sort_key)
        props.remove(victim)
        props.extend(_split(victim))

    # more proposals than pixels: cycle through what exists
    base = len(props)
    while len(props) < count:
        props.append(props[len(props) % base])

    props.sort(key=Proposal.sort_key)
    return props
