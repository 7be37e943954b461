"""Pipeline wiring: image loading, directory extraction, query embedding."""

import numpy as np
import pytest
from PIL import Image
from surfelmap.formats import decode_frame_pack

from conftest import blocks_image, random_blocks
from cffextract import Extractor, ExtractorConfig
from cffextract.errors import InputError, ModelError


def small() -> Extractor:
    return Extractor(ExtractorConfig(proposals=12, dim=16))


def test_extract_frame_is_loader_valid():
    pack = decode_frame_pack(small().extract_frame(blocks_image()))
    assert pack.region_count == 12
    assert pack.dim == 16
    assert pack.height == 40 and pack.width == 56


def test_default_config_emits_100_regions():
    pack = decode_frame_pack(Extractor().extract_frame(blocks_image()))
    assert pack.region_count == 100
    assert pack.dim == 64


def test_extract_dir_roundtrip_and_rerun(tmp_path, rng):
    images = tmp_path / "images"
    packs = tmp_path / "packs"
    images.mkdir()
    for k in range(2):
        Image.fromarray(random_blocks(rng)).save(images / f"{k:03d}.png")
    np.save(images / "002.npy", random_blocks(rng))

    extractor = small()
    stems = extractor.extract_dir(images, packs)
    assert stems == ["000", "001", "002"]
    first = {p.name: p.read_bytes() for p in packs.iterdir()}
    assert sorted(first) == ["000.cff", "001.cff", "002.cff"]
    for data in first.values():
        assert decode_frame_pack(data).region_count == 12

    extractor.extract_dir(images, packs)
    second = {p.name: p.read_bytes() for p in packs.iterdir()}
    assert second == first  # bit-identical rerun


def test_extract_dir_input_errors(tmp_path):
    extractor = small()
    with pytest.raises(InputError):
        extractor.extract_dir(tmp_path / "missing", tmp_path / "out")
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(InputError):
        extractor.extract_dir(empty, tmp_path / "out")
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "x.png").write_bytes(b"not a png")
    with pytest.raises(InputError):
        extractor.extract_dir(bad, tmp_path / "out")


def test_embed_query_modalities(tmp_path):
    extractor = small()
    vec = extractor.embed_query(text="a red apple")
    assert vec.shape == (16,)
    assert abs(np.linalg.norm(vec) - 1.0) <= 1e-12

    img_path = tmp_path / "apple.png"
    Image.fromarray(np.full((8, 8, 3), (210, 40, 40), dtype=np.uint8)).save(img_path)
    img_vec = extractor.embed_query(image=img_path)
    assert img_vec.shape == (16,)

    with pytest.raises(ModelError):
        extractor.embed_query(audio=tmp_path / "clip.wav")
    with pytest.raises(InputError):
        extractor.embed_query()
    with pytest.raises(InputError):
        extractor.embed_query(text="a", image=img_path)
    with pytest.raises(InputError):
        extractor.embed_query(text="")


def test_backend_selection_errors():
    with pytest.raises(ModelError):
        Extractor(ExtractorConfig(mask_model="nope"))
    with pytest.raises(ModelError):
        Extractor(ExtractorConfig(embed_model="nope"))
    # fixed-dim model checked before any weights load
    with pytest.raises(InputError):
        Extractor(ExtractorConfig(embed_model="clip", dim=64))
    # the promptable-segmentation wrapper needs its missing package
    with pytest.raises(ModelError):
        Extractor(ExtractorConfig(mask_model="sam"))


def test_config_validation():
    with pytest.raises(InputError):
        ExtractorConfig(proposals=0)
    with pytest.raises(InputError):
        ExtractorConfig(dim=0)
    with pytest.raises(InputError):
        ExtractorConfig(mask_model="")
