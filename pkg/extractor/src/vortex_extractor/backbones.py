"""Backbone registry and loading.

Each entry names a pretrained checkpoint on the Hugging Face hub together
with its geometry; `load_backbone` accepts either a registry key or any
hub id of a ViT-family model.  Geometry invariants: n = (image/patch)^2
spatial tokens per block, hidden width d fixed by the architecture.
"""

from dataclasses import dataclass, field

from vortex.errors import ValidationError


@dataclass(frozen=True)
class BackboneSpec:
    key: str
    hub_id: str
    pretraining: str
    kind: str  # "vit" (ViT/DeiT/BEiT-style AutoModel) or "clip" (CLIP vision tower)
    patch_size: int
    image_size: int
    hidden_size: int
    n_blocks: int

    @property
    def tokens_per_block(self):
        return (self.image_size // self.patch_size) ** 2


REGISTRY = {
    spec.key: spec
    for spec in [
        BackboneSpec("vit-b16-in21k", "google/vit-base-patch16-224-in21k",
                     "IN-21k", "vit", 16, 224, 768, 12),
        BackboneSpec("vit-l16-in21k", "google/vit-large-patch16-224-in21k",
                     "IN-21k", "vit", 16, 224, 1024, 24),
        BackboneSpec("deit-b16-in1k", "facebook/deit-base-patch16-224",
                     "IN-1k", "vit", 16, 224, 768, 12),
        BackboneSpec("beit-b16-in21k", "microsoft/beit-base-patch16-224-pt22k-ft22k",
                     "IN-21k", "vit", 16, 224, 768, 12),
        BackboneSpec("beit-l16-in21k", "microsoft/beit-large-patch16-224-pt22k-ft22k",
                     "IN-21k", "vit", 16, 224, 1024, 24),
        BackboneSpec("vit-h14-laion2b", "laion/CLIP-ViT-H-14-laion2B-s32B-b79K",
                     "LAION-2B", "clip", 14, 224, 1280, 32),
        BackboneSpec("vit-l14-laion2b", "laion/CLIP-ViT-L-14-laion2B-s32B-b82K",
                     "LAION-2B", "clip", 14, 224, 1024, 24),
    ]
}


@dataclass
class BackboneHandle:
    """A ready-to-run model plus everything needed to document the dump."""

    model: object = field(repr=False)
    processor: object = field(repr=False)
    model_id: str
    kind: str
    n_blocks: int
    hidden_size: int
    patch_size: int
    image_size: int
    prefix_tokens: int = 1

    @property
    def tokens_per_block(self):
        return (self.image_size // self.patch_size) ** 2

    def describe(self):
        return {
            "model_id": self.model_id,
            "kind": self.kind,
            "n_blocks": self.n_blocks,
            "hidden_size": self.hidden_size,
            "patch_size": self.patch_size,
            "image_size": self.image_size,
            "prefix_tokens": self.prefix_tokens,
            "tokens_per_block": self.tokens_per_block,
        }


def _handle_from_vit(model, processor, model_id):
    config = model.config
    return BackboneHandle(
        model=model,
        processor=processor,
        model_id=model_id,
        kind="vit",
        n_blocks=config.num_hidden_layers,
        hidden_size=config.hidden_size,
        patch_size=config.patch_size,
        image_size=config.image_size,
    )


def load_backbone(name, device="cpu"):
    """Resolve a registry key or hub id into a BackboneHandle.

    Downloads the checkpoint on first use (a network-reachable hub or a
    local HF cache is required).
    """
    from transformers import AutoImageProcessor, AutoModel

    spec = REGISTRY.get(name)
    hub_id = spec.hub_id if spec else name
    kind = spec.kind if spec else "vit"
    try:
        processor = AutoImageProcessor.from_pretrained(hub_id)
        if kind == "clip":
            from transformers import CLIPVisionModel

            model = CLIPVisionModel.from_pretrained(hub_id)
            config = model.config
            handle = BackboneHandle(
                model=model,
                processor=processor,
                model_id=hub_id,
                kind="clip",
                n_blocks=config.num_hidden_layers,
                hidden_size=config.hidden_size,
                patch_size=config.patch_size,
                image_size=config.image_size,
            )
        else:
            model = AutoModel.from_pretrained(hub_id)
            handle = _handle_from_vit(model, processor, hub_id)
    except OSError as exc:
        raise ValidationError(
            f"checkpoint {hub_id!r} unavailable (no hub access and not cached): {exc}"
        ) from exc
    handle.model.to(device)
    handle.model.eval()
    if spec is not None:
        for attr in ("n_blocks", "hidden_size", "patch_size", "image_size"):
            expected, got = getattr(spec, attr), getattr(handle, attr)
            if expected != got:
                raise ValidationError(
                    f"{name}: checkpoint {attr} is {got}, registry expects {expected}"
                )
    return handle
