import numpy as np
import pytest
import torch
from PIL import Image
from transformers import ViTConfig, ViTImageProcessor, ViTModel

from vortex_extractor.backbones import BackboneHandle


@pytest.fixture(scope="session")
def tiny_backbone():
    """An untrained 3-block ViT small enough for CPU tests (l=3, n=4, d=32)."""
    config = ViTConfig(
        hidden_size=32,
        num_hidden_layers=3,
        num_attention_heads=2,
        intermediate_size=48,
        image_size=32,
        patch_size=16,
    )
    torch.manual_seed(0)
    model = ViTModel(config, add_pooling_layer=False)
    model.eval()
    processor = ViTImageProcessor(
        size={"height": 32, "width": 32}, image_mean=[0.5] * 3, image_std=[0.5] * 3
    )
    return BackboneHandle(
        model=model,
        processor=processor,
        model_id="tiny-vit-for-tests",
        kind="vit",
        n_blocks=3,
        hidden_size=32,
        patch_size=16,
        image_size=32,
    )


@pytest.fixture
def image_dir(tmp_path):
    rng = np.random.default_rng(5)
    root = tmp_path / "images"
    (root / "sub").mkdir(parents=True)
    for i, name in enumerate(["a.png", "b.jpg", "sub/c.png"]):
        pixels = rng.integers(0, 255, (40, 48, 3), dtype=np.uint8)
        Image.fromarray(pixels).save(root / name)
    return root
