import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240818)


def blocks_image(height=40, width=56, background=(30, 30, 30)):
    """Dark canvas with a red and a green rectangle, the standard fixture."""
    img = np.zeros((height, width, 3), dtype=np.uint8)
    img[:] = background
    img[8:20, 10:26] = (210, 40, 40)
    img[22:34, 30:50] = (40, 180, 60)
    return img


def random_blocks(rng, height=32, width=48, blocks=3):
    """Random rectangles over a random dark background."""
    img = np.zeros((height, width, 3), dtype=np.uint8)
    img[:] = rng.integers(10, 60, size=3)
    for _ in range(blocks):
        v0 = int(rng.integers(0, height - 4))
        u0 = int(rng.integers(0, width - 4))
        v1 = int(rng.integers(v0 + 2, min(v0 + 14, height)))
        u1 = int(rng.integers(u0 + 2, min(u0 + 14, width)))
        img[v0:v1, u0:u1] = rng.integers(70, 250, size=3)
    return img
