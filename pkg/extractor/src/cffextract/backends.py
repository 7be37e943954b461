"""Backend registry: deterministic defaults plus guarded model wrappers.

The deterministic backends (``colorseg``, ``hashtokens``) have no model
weights and run anywhere; the wrappers around real segmentation and
joint-embedding models import their heavyweight dependencies lazily and
turn any load failure into a ModelError naming the missing piece.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError, ModelError
from .features import hash_embed, image_tokens, text_tokens
from .masks import Proposal, check_image, propose_regions


class ColorSegmenter:
    """Connected components of quantized colors, reshaped to R proposals."""

    def __init__(self, device: str = "cpu"):
        del device  # pure numpy, nothing to place

    def propose(self, image: np.ndarray, count: int) -> list[Proposal]:
        return propose_regions(check_image(image), count)


class SamSegmenter:
    """Class-agnostic proposals from a promptable segmentation model."""

    def __init__(self, device: str = "cpu"):
        try:
            from segment_anything import (  # noqa: F401
                SamAutomaticMaskGenerator,
                sam_model_registry,
            )
        except ImportError as exc:
            raise ModelError(
                "mask model 'sam' needs the segment-anything package and a "
                f"checkpoint file: {exc}"
            ) from None
        self._device = device
        raise ModelError(
            "mask model 'sam' requires a checkpoint path; deterministic "
            "extraction uses 'colorseg'"
        )


class HashTokenEmbedder:
    """Joint text/image space from signed token hashing; any dimension."""

    output_dim: int | None = None  # flexible
    modalities = frozenset({"text", "image"})

    def __init__(self, device: str = "cpu"):
        del device

    def embed_text(self, text: str, dim: int) -> np.ndarray:
        return hash_embed(text_tokens(text), dim)

    def embed_image(self, image: np.ndarray, dim: int) -> np.ndarray:
        tokens = image_tokens(check_image(image))
        if not tokens:
            raise InputError("image has no dominant colors to embed")
        return hash_embed(tokens, dim)

    def embed_region(self, image: np.ndarray, bbox, dim: int) -> np.ndarray:
        u0, v0, u1, v1 = bbox
        return self.embed_image(image[v0 : v1 + 1, u0 : u1 + 1], dim)

    def embed_audio(self, path, dim: int) -> np.ndarray:
        raise ModelError("embedding model 'hashtokens' does not embed audio")


class ClipEmbedder:
    """Wrapper around a CLIP checkpoint from the transformers hub."""

    output_dim = 512
    modalities = frozenset({"text", "image"})

    def __init__(self, device: str = "cpu",
                 checkpoint: str = "openai/clip-vit-base-patch32"):
        try:
            import torch  # noqa: F401
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ModelError(f"embedding model 'clip' needs torch and "
                             f"transformers: {exc}") from None
        try:
            self._model = CLIPModel.from_pretrained(checkpoint).to(device)
            self._processor = CLIPProcessor.from_pretrained(checkpoint)
        except Exception as exc:
            raise ModelError(f"loading CLIP checkpoint {checkpoint!r} "
                             f"failed: {exc}") from None
        self._device = device

    def embed_text(self, text: str, dim: int) -> np.ndarray:
        if not text.strip():
            raise InputError("text is empty")
        inputs = self._processor(text=[text], return_tensors="pt",
                                 padding=True).to(self._device)
        vec = self._model.get_text_features(**inputs)
        return vec.detach().cpu().numpy()[0].astype(np.float64)

    def embed_image(self, image: np.ndarray, dim: int) -> np.ndarray:
        inputs = self._processor(images=[check_image(image)],
                                 return_tensors="pt").to(self._device)
        vec = self._model.get_image_features(**inputs)
        return vec.detach().cpu().numpy()[0].astype(np.float64)

    def embed_region(self, image: np.ndarray, bbox, dim: int) -> np.ndarray:
        u0, v0, u1, v1 = bbox
        return self.embed_image(image[v0 : v1 + 1, u0 : u1 + 1], dim)

    def embed_audio(self, path, dim: int) -> np.ndarray:
        raise ModelError("embedding model 'clip' does not embed audio; "
                         "use an audio-capable joint-embedding model")


MASK_BACKENDS = {"colorseg": ColorSegmenter, "sam": SamSegmenter}
EMBED_BACKENDS = {"hashtokens": HashTokenEmbedder, "clip": ClipEmbedder}


def mask_backend_class(name: str):
    try:
        return MASK_BACKENDS[name]
    except KeyError:
        raise ModelError(f"unknown mask model {name!r} "
                         f"(have: {', '.join(sorted(MASK_BACKENDS))})") from None


def embed_backend_class(name: str):
    try:
        return EMBED_BACKENDS[name]
    except KeyError:
        raise ModelError(f"unknown embedding model {name!r} "
                         f"(have: {', '.join(sorted(EMBED_BACKENDS))})") from None
