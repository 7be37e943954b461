"""Proposal generator: exact counts, tight boxes, determinism."""

import numpy as np
import pytest

from conftest import blocks_image, random_blocks
from cffextract.errors import InputError
from cffextract.masks import check_image, propose_regions, tight_bbox


def test_two_blocks_give_three_components():
    props = propose_regions(blocks_image(), 3)
    assert len(props) == 3
    sizes = [p.size for p in props]
    assert sizes == sorted(sizes, reverse=True)
    # background is the largest, then the 20x16 green, then the 12x16 red
    assert sizes[0] == 40 * 56 - 12 * 16 - 12 * 20
    assert sizes[1] == 12 * 20
    assert sizes[2] == 12 * 16
    union = np.zeros((40, 56), dtype=int)
    for p in props:
        union += p.mask
    assert (union == 1).all()  # a partition, no overlap


def test_splitting_reaches_exact_count():
    props = propose_regions(blocks_image(), 10)
    assert len(props) == 10
    total = sum(p.size for p in props)
    assert total == 40 * 56  # splits preserve pixels
    for p in props:
        assert p.mask.any()
        assert p.bbox == tight_bbox(p.mask)


def test_truncation_keeps_largest():
    img = blocks_image()
    all_three = propose_regions(img, 3)
    top_two = propose_regions(img, 2)
    assert [p.size for p in top_two] == [p.size for p in all_three[:2]]


def test_solid_color_still_fills_request():
    img = np.full((16, 16, 3), 77, dtype=np.uint8)
    props = propose_regions(img, 100)
    assert len(props) == 100
    assert sum(p.size for p in props) == 256
    for p in props:
        assert p.mask.any()


def test_tiny_image_duplicates_proposals():
    img = np.zeros((1, 2, 3), dtype=np.uint8)
    img[0, 1] = 200
    props = propose_regions(img, 5)
    assert len(props) == 5
    for p in props:
        assert p.size == 1


def test_deterministic_over_random_images(rng):
    for _ in range(10):
        img = random_blocks(rng)
        first = propose_regions(img, 17)
        second = propose_regions(img, 17)
        assert len(first) == len(second) == 17
        for a, b in zip(first, second):
            assert np.array_equal(a.mask, b.mask)
            assert a.bbox == b.bbox


def test_bboxes_always_tight(rng):
    for _ in range(10):
        props = propose_regions(random_blocks(rng), 25)
        for p in props:
            assert p.bbox == tight_bbox(p.mask)


def test_check_image_validation():
    with pytest.raises(InputError):
        check_image(np.zeros((4, 4, 3), dtype=np.float32))
    with pytest.raises(InputError):
        check_image(np.zeros((4, 4, 2), dtype=np.uint8))
    with pytest.raises(InputError):
        check_image(np.zeros((0, 4, 3), dtype=np.uint8))
    gray = check_image(np.full((4, 5), 9, dtype=np.uint8))
    assert gray.shape == (4, 5, 3)


def test_count_below_one_rejected():
    with pytest.raises(InputError):
        propose_regions(blocks_image(), 0)
