import os

import pytest

from vortex_extractor.backbones import REGISTRY, load_backbone


def test_registry_geometry_invariants():
    for spec in REGISTRY.values():
        assert spec.image_size % spec.patch_size == 0
        assert spec.tokens_per_block == (spec.image_size // spec.patch_size) ** 2


def test_base_backbone_token_counts():
    vit_b = REGISTRY["vit-b16-in21k"]
    assert (vit_b.tokens_per_block, vit_b.hidden_size, vit_b.n_blocks) == (196, 768, 12)
    vit_h = REGISTRY["vit-h14-laion2b"]
    assert (vit_h.tokens_per_block, vit_h.hidden_size) == (256, 1280)


@pytest.mark.skipif(
    not os.environ.get("VORTEX_HUB_TESTS"),
    reason="set VORTEX_HUB_TESTS=1 to exercise checkpoint downloads",
)
def test_load_real_backbone_matches_registry():
    handle = load_backbone("vit-b16-in21k")
    assert handle.n_blocks == 12
    assert handle.hidden_size == 768
