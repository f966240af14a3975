"""Token extraction from pretrained vision transformers into VTE files."""

__version__ = "0.1.0"

from .backbones import REGISTRY, BackboneHandle, BackboneSpec, load_backbone
from .dump import dump_tokens, iter_image_paths
from .manifests import EXPECTED, build_manifest

__all__ = [
    "REGISTRY",
    "BackboneHandle",
    "BackboneSpec",
    "load_backbone",
    "dump_tokens",
    "iter_image_paths",
    "EXPECTED",
    "build_manifest",
    "__version__",
]
