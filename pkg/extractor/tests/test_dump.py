import json

import numpy as np
import pytest

from vortex.aggregation import aggregate, cls_descriptor
from vortex.errors import ValidationError
from vortex.interchange import read_vte
from vortex_extractor.dump import dump_tokens, iter_image_paths


def test_dump_writes_expected_geometry(tiny_backbone, image_dir, tmp_path):
    out = tmp_path / "tokens.vte"
    written = dump_tokens(tiny_backbone, image_dir, out, batch_size=2)
    assert written == 3
    records = read_vte(out)
    assert [r.image_id for r in records] == ["a.png", "b.jpg", "sub/c.png"]
    for record in records:
        # n = (image/patch)^2 spatial tokens per block, CLS excluded
        assert record.layers.shape == (3, 4, 32)
        assert record.layers.dtype == np.float32
        assert record.cls_token is not None and record.cls_token.shape == (32,)


def test_dump_is_bit_deterministic(tiny_backbone, image_dir, tmp_path):
    for name in ("one.vte", "two.vte"):
        dump_tokens(tiny_backbone, image_dir, tmp_path / name, batch_size=2)
    assert (tmp_path / "one.vte").read_bytes() == (tmp_path / "two.vte").read_bytes()


def test_dump_feeds_the_encoder(tiny_backbone, image_dir, tmp_path):
    out = tmp_path / "tokens.vte"
    dump_tokens(tiny_backbone, image_dir, out)
    (record, *_) = read_vte(out)
    stacked = aggregate(record)
    assert stacked.shape == (12, 32)
    assert cls_descriptor(record).shape == (32,)


def test_dump_without_cls_blocks_cls_baseline(tiny_backbone, image_dir, tmp_path):
    out = tmp_path / "tokens.vte"
    dump_tokens(tiny_backbone, image_dir, out, include_cls=False)
    (record, *_) = read_vte(out)
    assert record.cls_token is None
    with pytest.raises(ValidationError, match="CLS"):
        cls_descriptor(record)


def test_dump_skips_undecodable_images(tiny_backbone, image_dir, tmp_path, caplog):
    (image_dir / "broken.png").write_bytes(b"not an image at all")
    out = tmp_path / "tokens.vte"
    with caplog.at_level("WARNING"):
        written = dump_tokens(tiny_backbone, image_dir, out)
    assert written == 3
    assert "broken.png" in caplog.text


def test_dump_writes_transform_sidecar(tiny_backbone, image_dir, tmp_path):
    out = tmp_path / "tokens.vte"
    dump_tokens(tiny_backbone, image_dir, out, batch_size=2)
    meta = json.loads((tmp_path / "tokens.vte.meta.json").read_text())
    assert meta["backbone"]["model_id"] == "tiny-vit-for-tests"
    assert meta["backbone"]["tokens_per_block"] == 4
    assert meta["records"] == 3
    assert meta["transform"]["image_mean"] == [0.5, 0.5, 0.5]


def test_dump_limit(tiny_backbone, image_dir, tmp_path):
    out = tmp_path / "tokens.vte"
    assert dump_tokens(tiny_backbone, image_dir, out, limit=2) == 2


def test_dump_empty_directory_fails(tiny_backbone, tmp_path):
    empty = tmp_path / "none"
    empty.mkdir()
    with pytest.raises(ValidationError, match="no decodable images"):
        dump_tokens(tiny_backbone, empty, tmp_path / "tokens.vte")
    assert not (tmp_path / "tokens.vte").exists()


def test_iter_image_paths_is_sorted_and_filtered(image_dir):
    (image_dir / "notes.txt").write_text("ignore me")
    paths = [p.name for p in iter_image_paths(image_dir)]
    assert paths == ["a.png", "b.jpg", "c.png"]
