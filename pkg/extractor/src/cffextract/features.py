"""Deterministic joint text/image embeddings via token hashing.

Text becomes lowercase word tokens; an image becomes the names of its
dominant quantized colors. Both token streams hash into the same signed
D-bin space (blake2b, stable across runs and machines), so an image and
a text that mention the same color land near each other while unrelated
inputs stay near orthogonal. A crude stand-in for a real joint encoder,
but fully deterministic and dimension-flexible.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

from .errors import InputError
from .masks import QUANT_SHIFT

_WORD = re.compile(r"[a-z0-9]+")

# prototype RGB values for naming a quantization-bucket centroid
COLOR_NAMES = (
    ("black", (0, 0, 0)),
    ("white", (255, 255, 255)),
    ("gray", (128, 128, 128)),
    ("red", (220, 40, 40)),
    ("green", (40, 180, 60)),
    ("blue", (40, 70, 220)),
    ("yellow", (230, 220, 50)),
    ("orange", (240, 150, 40)),
    ("purple", (140, 60, 180)),
    ("brown", (130, 90, 50)),
    ("pink", (240, 150, 190)),
    ("cyan", (60, 200, 210)),
)

MAX_COLOR_TOKENS = 6
MIN_COLOR_SHARE = 0.02


def text_tokens(text: str) -> list[str]:
    tokens = _WORD.findall(text.lower())
    if not tokens:
        raise InputError("text has no embeddable tokens")
    return tokens


def color_name(rgb: tuple[float, float, float]) -> str:
    best = min(COLOR_NAMES,
               key=lambda item: sum((a - b) ** 2 for a, b in zip(item[1], rgb)))
    return best[0]


def image_tokens(image: np.ndarray) -> list[str]:
    """Names of the dominant quantized colors, most frequent first."""
    q = (image >> QUANT_SHIFT).astype(np.int32)
    ids = (q[:, :, 0] * 16 + q[:, :, 1] * 4 + q[:, :, 2]).ravel()
    counts = np.bincount(ids, minlength=64)
    order = np.argsort(-counts, kind="stable")
    step = 1 << QUANT_SHIFT
    tokens: list[str] = []
    for value in order[:MAX_COLOR_TOKENS]:
        if counts[value] < MIN_COLOR_SHARE * ids.size:
            break
        centroid = (
            (value // 16) * step + step / 2,
            (value // 4 % 4) * step + step / 2,
            (value % 4) * step + step / 2,
        )
        name = color_name(centroid)
        if name not in tokens:
            tokens.append(name)
    return tokens


def hash_embed(tokens: list[str], dim: int) -> np.ndarray:
    """Signed feature hashing of a token list, L2-normalized.

    Tokens are weighted 2^-rank so earlier entries dominate. The weights
    being distinct powers of two also means colliding bins can never sum
    to exactly zero, so every non-empty token list embeds.
    """
    if not tokens:
        raise InputError("no tokens to embed")
    out = np.zeros(dim, dtype=np.float64)
    for rank, token in enumerate(tokens):
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        value = int.from_bytes(digest, "little")
        sign = 1.0 if value & (1 << 63) == 0 else -1.0
        out[value % dim] += sign * 2.0 ** -min(rank, 60)
    return out / np.linalg.norm(out)
