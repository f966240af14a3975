"""Turn a directory of images into a VTE token file.

Every transformer block's spatial token matrix is captured from the
model's hidden states (raw block outputs, before any final layernorm);
the CLS side channel, when requested, is the representation a
classification head would see (post-layernorm class token, or the CLIP
vision pooler output).  Records are keyed by the image's path relative to
the image root, so manifests built from the same root line up exactly.

A sidecar ``<out>.meta.json`` documents the checkpoint, the eval
transform actually applied, and the token geometry, keeping the VTE
payload itself bit-exact.
"""

import json
import logging
import pathlib

import numpy as np
import torch
from PIL import Image

from vortex.errors import ValidationError
from vortex.interchange import EmbeddingRecord, VteWriter

from .backbones import BackboneHandle, load_backbone

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png", ".bmp", ".ras", ".tif", ".tiff", ".webp")


def iter_image_paths(image_dir, extensions=IMAGE_EXTENSIONS):
    root = pathlib.Path(image_dir)
    if not root.is_dir():
        raise ValidationError(f"image directory {image_dir!r} does not exist")
    for path in sorted(root.rglob("*")):
        if path.is_file() and path.suffix.lower() in extensions:
            yield path


def _batched(iterable, size):
    batch = []
    for item in iterable:
        batch.append(item)
        if len(batch) == size:
            yield batch
            batch = []
    if batch:
        yield batch


def _capture_batch(handle, images, include_cls):
    inputs = handle.processor(images=images, return_tensors="pt")
    inputs = {k: v.to(handle.model.device) for k, v in inputs.items()}
    with torch.no_grad():
        out = handle.model(**inputs, output_hidden_states=True)
    # hidden_states[0] is the patch embedding input; blocks follow
    blocks = out.hidden_states[1:]
    prefix = handle.prefix_tokens
    tokens = torch.stack([h[:, prefix:, :] for h in blocks], dim=1)
    tokens = tokens.to(torch.float32).cpu().numpy()
    cls = None
    if include_cls:
        if handle.kind == "clip":
            cls = out.pooler_output
        else:
            cls = out.last_hidden_state[:, 0, :]
        cls = cls.to(torch.float32).cpu().numpy()
    return tokens, cls


def dump_tokens(backbone, image_dir, out_path, include_cls=True, batch_size=8,
                device="cpu", deterministic=True, limit=None):
    """Run the backbone over every image under ``image_dir`` and write VTE.

    Undecodable images are skipped with a log line.  With
    ``deterministic`` (default) inference runs single-threaded with
    deterministic kernels, so re-running yields bit-identical payloads.
    Returns the number of records written.
    """
    handle = backbone if isinstance(backbone, BackboneHandle) else load_backbone(backbone, device)
    if deterministic:
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)

    expected_tokens = handle.tokens_per_block
    out_path = pathlib.Path(out_path)
    written = 0

    def load(path):
        try:
            with Image.open(path) as img:
                return img.convert("RGB")
        except Exception as exc:  # undecodable file: skip, keep going
            logger.warning("skipping %s: %s", path, exc)
            return None

    root = pathlib.Path(image_dir)
    paths = iter_image_paths(image_dir)
    if limit is not None:
        paths = (p for _, p in zip(range(limit), paths))

    with VteWriter(out_path, with_cls=include_cls) as writer:
        for batch_paths in _batched(paths, batch_size):
            loaded = [(p, load(p)) for p in batch_paths]
            loaded = [(p, img) for p, img in loaded if img is not None]
            if not loaded:
                continue
            tokens, cls = _capture_batch(handle, [img for _, img in loaded], include_cls)
            if tokens.shape[1] != handle.n_blocks or tokens.shape[2] != expected_tokens \
                    or tokens.shape[3] != handle.hidden_size:
                raise ValidationError(
                    f"unexpected token geometry {tokens.shape[1:]}; expected "
                    f"({handle.n_blocks}, {expected_tokens}, {handle.hidden_size})"
                )
            for i, (path, _) in enumerate(loaded):
                image_id = path.relative_to(root).as_posix()
                writer.add(EmbeddingRecord(
                    image_id,
                    np.ascontiguousarray(tokens[i]),
                    None if cls is None else np.ascontiguousarray(cls[i]),
                ))
                written += 1
        if written == 0:
            raise ValidationError(f"no decodable images found under {image_dir!r}")

    meta = {
        "backbone": handle.describe(),
        "transform": _jsonable(handle.processor.to_dict() if hasattr(handle.processor, "to_dict")
                               else repr(handle.processor)),
        "include_cls": include_cls,
        "deterministic": deterministic,
        "records": written,
        "torch_version": torch.__version__,
    }
    with open(f"{out_path}.meta.json", "w", encoding="utf-8") as sidecar:
        json.dump(meta, sidecar, indent=1, sort_keys=True)
        sidecar.write("\n")
    return written


def _jsonable(value):
    try:
        json.dumps(value)
        return value
    except TypeError:
        if isinstance(value, dict):
            return {k: _jsonable(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [_jsonable(v) for v in value]
        return repr(value)
