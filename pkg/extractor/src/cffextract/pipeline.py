"""Extraction pipeline: images in, frame feature packs and vectors out."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .backends import embed_backend_class, mask_backend_class
from .config import ExtractorConfig
from .errors import InputError, ModelError
from .masks import check_image
from .writer import encode_pack, write_atomic

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".npy")


def load_image(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such image: {path}")
    if path.suffix == ".npy":
        try:
            return check_image(np.load(path))
        except ValueError as exc:
            raise InputError(f"unreadable npy image {path}: {exc}") from None
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))
    except (OSError, UnidentifiedImageError) as exc:
        raise InputError(f"unreadable image {path}: {exc}") from None


class Extractor:
    """Holds the configured backends and turns frames into pack bytes."""

    def __init__(self, config: ExtractorConfig | None = None):
        self.config = config or ExtractorConfig()
        embed_cls = embed_backend_class(self.config.embed_model)
        # check before constructing: a fixed-dim model should fail on the
        # mismatch, not after loading its weights
        fixed = getattr(embed_cls, "output_dim", None)
        if fixed is not None and fixed != self.config.dim:
            raise InputError(
                f"embedding model {self.config.embed_model!r} produces "
                f"{fixed}-d vectors but config asks for {self.config.dim}"
            )
        self.masks = mask_backend_class(self.config.mask_model)(
            device=self.config.device)
        self.embedder = embed_cls(device=self.config.device)

    def extract_frame(self, image: np.ndarray) -> bytes:
        image = check_image(image)
        proposals = self.masks.propose(image, self.config.proposals)
        if not proposals:
            raise ModelError("mask model returned no proposals")
        dim = self.config.dim
        global_feature = self.embedder.embed_image(image, dim)
        regions = [
            (p.mask, p.bbox, self.embedder.embed_region(image, p.bbox, dim))
            for p in proposals
        ]
        height, width = image.shape[:2]
        return encode_pack(height, width, global_feature, regions)

    def extract_path(self, image_path: str | Path, out_path: str | Path):
        write_atomic(out_path, self.extract_frame(load_image(image_path)))

    def extract_dir(self, images_dir: str | Path,
                    out_dir: str | Path) -> list[str]:
        """Extract every image in a directory; returns the stems written."""
        images_dir = Path(images_dir)
        out_dir = Path(out_dir)
        if not images_dir.is_dir():
            raise InputError(f"not a directory: {images_dir}")
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = sorted(p for p in images_dir.iterdir()
                       if p.suffix.lower() in IMAGE_SUFFIXES)
        if not paths:
            raise InputError(f"no images in {images_dir}")
        stems = []
        for path in paths:
            self.extract_path(path, out_dir / f"{path.stem}.cff")
            stems.append(path.stem)
        return stems

    def embed_query(self, *, text: str | None = None,
                    image: str | Path | None = None,
                    audio: str | Path | None = None) -> np.ndarray:
        given = [v is not None for v in (text, image, audio)]
        if sum(given) != 1:
            raise InputError("exactly one of text, image, audio is required")
        dim = self.config.dim
        if text is not None:
            if "text" not in self.embedder.modalities:
                raise ModelError(f"model {self.config.embed_model!r} "
                                 f"does not embed text")
            return self.embedder.embed_text(text, dim)
        if image is not None:
            if "image" not in self.embedder.modalities:
                raise ModelError(f"model {self.config.embed_model!r} "
                                 f"does not embed images")
            return self.embedder.embed_image(load_image(image), dim)
        return self.embedder.embed_audio(audio, dim)
