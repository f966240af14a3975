"""Bit-exact interchange files between token extraction and encoding.

Two binary formats (both little-endian on every platform) decouple the
backbone side of the pipeline from encoding and evaluation:

VTE (token embeddings), magic ``VTE\\0`` + u32 version:
    per record: u32 id length, UTF-8 image id, u32 l, u32 n, u32 d, then
    l*n*d float32 values in layer-major, row-major order.  Version 1
    carries spatial tokens only.  Version 2 appends one u8 flag per record
    and, when set, d float32 values holding the final-block CLS token as a
    side channel; the token layout is unchanged.

VTD (descriptors), magic ``VTD\\0`` + u32 version:
    per record: u32 id length, UTF-8 image id, i32 label (-1 = unlabeled),
    u32 d, then d float64 values.

Round-tripping either format is bit-exact for finite inputs.  Writers
reject non-finite values up front, naming the offending record.

Split manifests are JSON (schema in docs/FORMATS.md): dataset name, class
names, an id -> class map, and explicit fold memberships.  Random-fold
protocols must store the materialized assignment plus the seed that
produced it, so an evaluation can never silently re-randomize.
"""

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagicError,
    ManifestError,
    TruncatedPayloadError,
    ValidationError,
    VersionMismatchError,
)

VTE_MAGIC = b"VTE\0"
VTD_MAGIC = b"VTD\0"
VTE_VERSION_TOKENS = 1
VTE_VERSION_WITH_CLS = 2
VTD_VERSION = 1

PROTOCOLS = ("single-split", "k-fold", "random-k-fold")

_U32 = struct.Struct("<I")
_I32 = struct.Struct("<i")
_DIMS = struct.Struct("<III")


@dataclass
class EmbeddingRecord:
    """Spatial token embeddings of one image: an (l, n, d) float32 array.

    ``layers[i]`` holds the n x d token matrix of transformer block i+1;
    the CLS token is never part of ``layers`` (n counts spatial tokens
    only) but may ride along as a ``cls_token`` side channel.
    """

    image_id: str
    layers: np.ndarray
    cls_token: np.ndarray | None = None

    @property
    def n_layers(self):
        return self.layers.shape[0]

    @property
    def n_tokens(self):
        return self.layers.shape[1]

    @property
    def n_features(self):
        return self.layers.shape[2]

    def validate(self):
        if self.layers.ndim != 3:
            raise ValidationError(
                f"record {self.image_id!r}: layers must be (l, n, d), got shape {self.layers.shape}"
            )
        if min(self.layers.shape) < 1:
            raise ValidationError(f"record {self.image_id!r}: empty dimension in {self.layers.shape}")
        if self.layers.dtype != np.float32:
            raise ValidationError(f"record {self.image_id!r}: tokens must be float32, got {self.layers.dtype}")
        if not np.isfinite(self.layers).all():
            raise ValidationError(f"record {self.image_id!r}: non-finite token values")
        if self.cls_token is not None:
            cls = self.cls_token
            if cls.shape != (self.n_features,):
                raise ValidationError(
                    f"record {self.image_id!r}: CLS shape {cls.shape} does not match d={self.n_features}"
                )
            if cls.dtype != np.float32:
                raise ValidationError(f"record {self.image_id!r}: CLS must be float32, got {cls.dtype}")
            if not np.isfinite(cls).all():
                raise ValidationError(f"record {self.image_id!r}: non-finite CLS values")


@dataclass
class DescriptorRecord:
    """One image descriptor: id, integer class label and a float64 vector."""

    image_id: str
    label: int
    features: np.ndarray

    def validate(self):
        if self.label < -1:
            raise ValidationError(f"record {self.image_id!r}: label must be >= 0 or -1, got {self.label}")
        if self.features.ndim != 1 or self.features.size < 1:
            raise ValidationError(f"record {self.image_id!r}: features must be a non-empty vector")
        if self.features.dtype != np.float64:
            raise ValidationError(f"record {self.image_id!r}: features must be float64")
        if not np.isfinite(self.features).all():
            raise ValidationError(f"record {self.image_id!r}: non-finite feature values")


def _cleanup_partial(handle, path):
    handle.close()
    if os.path.exists(path):
        os.unlink(path)


class VteWriter:
    """Streaming VTE writer for one exclusive owner.

    The format version must be fixed up front: pass with_cls=True when any
    record may carry a CLS side channel.  Use as a context manager; on an
    exception the partial file is removed.
    """

    def __init__(self, path, with_cls=False):
        self.path = path
        self.version = VTE_VERSION_WITH_CLS if with_cls else VTE_VERSION_TOKENS
        self.count = 0
        self._out = open(path, "wb")
        try:
            self._out.write(VTE_MAGIC)
            self._out.write(_U32.pack(self.version))
        except BaseException:
            _cleanup_partial(self._out, path)
            raise

    def add(self, record):
        try:
            record.validate()
            if record.cls_token is not None and self.version != VTE_VERSION_WITH_CLS:
                raise ValidationError(
                    f"record {record.image_id!r} carries CLS but the writer was opened "
                    "without with_cls=True"
                )
            encoded_id = record.image_id.encode("utf-8")
            self._out.write(_U32.pack(len(encoded_id)))
            self._out.write(encoded_id)
            self._out.write(_DIMS.pack(record.n_layers, record.n_tokens, record.n_features))
            self._out.write(np.ascontiguousarray(record.layers, dtype="<f4").tobytes())
            if self.version == VTE_VERSION_WITH_CLS:
                if record.cls_token is None:
                    self._out.write(b"\x00")
                else:
                    self._out.write(b"\x01")
                    self._out.write(np.ascontiguousarray(record.cls_token, dtype="<f4").tobytes())
            self.count += 1
        except BaseException:
            _cleanup_partial(self._out, self.path)
            raise

    def close(self):
        if not self._out.closed:
            self._out.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            _cleanup_partial(self._out, self.path)
        return False


def write_vte(records, path):
    """Write EmbeddingRecords to ``path``.

    Version 2 is used only when some record carries a CLS side channel.
    On any error the partial file is removed before the exception
    propagates.  (For collections too large to hold in memory, use
    VteWriter directly.)
    """
    records = list(records) if not isinstance(records, (list, tuple)) else records
    if len(records) == 0:
        raise ValidationError("write_vte requires at least one record")
    with_cls = any(r.cls_token is not None for r in records)
    with VteWriter(path, with_cls=with_cls) as writer:
        for record in records:
            writer.add(record)


def _read_exact(handle, nbytes, what):
    data = handle.read(nbytes)
    if len(data) != nbytes:
        raise TruncatedPayloadError(f"truncated payload while reading {what}")
    return data


def _read_header(handle, magic, versions, kind):
    lead = handle.read(len(magic))
    if len(lead) < len(magic) or lead != magic:
        raise BadMagicError(f"not a {kind} file: bad magic {lead!r}")
    (version,) = _U32.unpack(_read_exact(handle, 4, f"{kind} version"))
    if version not in versions:
        raise VersionMismatchError(f"unsupported {kind} version {version}")
    return version


def iter_vte(path):
    """Yield EmbeddingRecords one at a time (streaming read)."""
    with open(path, "rb") as handle:
        version = _read_header(handle, VTE_MAGIC, (VTE_VERSION_TOKENS, VTE_VERSION_WITH_CLS), "VTE")
        while True:
            lead = handle.read(4)
            if len(lead) == 0:
                return
            if len(lead) < 4:
                raise TruncatedPayloadError("truncated payload in record header")
            (id_len,) = _U32.unpack(lead)
            image_id = _read_exact(handle, id_len, "image id").decode("utf-8")
            l, n, d = _DIMS.unpack(_read_exact(handle, 12, f"dimensions of {image_id!r}"))
            if min(l, n, d) < 1:
                raise ValidationError(f"record {image_id!r}: zero dimension (l={l}, n={n}, d={d})")
            payload = _read_exact(handle, l * n * d * 4, f"tokens of {image_id!r}")
            layers = np.frombuffer(payload, dtype="<f4").reshape(l, n, d)
            cls_token = None
            if version == VTE_VERSION_WITH_CLS:
                flag = _read_exact(handle, 1, f"CLS flag of {image_id!r}")
                if flag == b"\x01":
                    cls_payload = _read_exact(handle, d * 4, f"CLS of {image_id!r}")
                    cls_token = np.frombuffer(cls_payload, dtype="<f4").copy()
                elif flag != b"\x00":
                    raise ValidationError(f"record {image_id!r}: invalid CLS flag {flag!r}")
            record = EmbeddingRecord(image_id, layers.copy(), cls_token)
            record.validate()
            yield record


def read_vte(path):
    """Read a whole VTE file into a list (exact inverse of write_vte)."""
    return list(iter_vte(path))


def write_vtd(records, path):
    """Write DescriptorRecords to ``path`` (one fixed d per file)."""
    records = list(records) if not isinstance(records, (list, tuple)) else records
    out = open(path, "wb")
    try:
        out.write(VTD_MAGIC)
        out.write(_U32.pack(VTD_VERSION))
        dim = None
        for record in records:
            record.validate()
            if dim is None:
                dim = record.features.size
            elif record.features.size != dim:
                raise ValidationError(
                    f"record {record.image_id!r}: dimension {record.features.size} != {dim} of earlier records"
                )
            encoded_id = record.image_id.encode("utf-8")
            out.write(_U32.pack(len(encoded_id)))
            out.write(encoded_id)
            out.write(_I32.pack(record.label))
            out.write(_U32.pack(record.features.size))
            out.write(np.ascontiguousarray(record.features, dtype="<f8").tobytes())
    except BaseException:
        _cleanup_partial(out, path)
        raise
    out.close()


def iter_vtd(path):
    """Yield DescriptorRecords one at a time (streaming read)."""
    with open(path, "rb") as handle:
        _read_header(handle, VTD_MAGIC, (VTD_VERSION,), "VTD")
        dim = None
        while True:
            lead = handle.read(4)
            if len(lead) == 0:
                return
            if len(lead) < 4:
                raise TruncatedPayloadError("truncated payload in record header")
            (id_len,) = _U32.unpack(lead)
            image_id = _read_exact(handle, id_len, "image id").decode("utf-8")
            (label,) = _I32.unpack(_read_exact(handle, 4, f"label of {image_id!r}"))
            (d,) = _U32.unpack(_read_exact(handle, 4, f"dimension of {image_id!r}"))
            if dim is None:
                dim = d
            elif d != dim:
                raise ValidationError(f"record {image_id!r}: dimension {d} != {dim} of earlier records")
            payload = _read_exact(handle, d * 8, f"features of {image_id!r}")
            record = DescriptorRecord(image_id, label, np.frombuffer(payload, dtype="<f8").copy())
            record.validate()
            yield record


def read_vtd(path):
    return list(iter_vtd(path))


@dataclass(frozen=True)
class Fold:
    fold_id: int
    train_ids: tuple
    test_ids: tuple


@dataclass
class SplitManifest:
    """A dataset evaluation protocol: classes, labels and fold membership."""

    dataset_name: str
    class_names: tuple
    labels: dict = field(repr=False)  # image id -> class index
    folds: tuple
    protocol: str
    seed: int | None = None

    @property
    def n_classes(self):
        return len(self.class_names)

    def all_ids(self):
        ids = set()
        for fold in self.folds:
            ids.update(fold.train_ids)
            ids.update(fold.test_ids)
        return ids

    def label_of(self, image_id):
        try:
            return self.labels[image_id]
        except KeyError:
            raise ManifestError(f"image id {image_id!r} has no class assignment") from None

    def fold_hash(self):
        """Digest of the exact fold membership, for cross-run comparisons."""
        digest = hashlib.sha256()
        digest.update(self.dataset_name.encode("utf-8"))
        for fold in self.folds:
            digest.update(str(fold.fold_id).encode())
            for ids in (fold.train_ids, fold.test_ids):
                for image_id in sorted(ids):
                    digest.update(image_id.encode("utf-8"))
                digest.update(b"|")
        return digest.hexdigest()[:16]

    def validate(self):
        if self.protocol not in PROTOCOLS:
            raise ManifestError(f"unknown protocol {self.protocol!r}; expected one of {PROTOCOLS}")
        if self.protocol == "random-k-fold" and self.seed is None:
            raise ManifestError("random-k-fold manifests must record the seed that materialized the folds")
        if len(self.class_names) < 2:
            raise ManifestError("a manifest needs at least two classes")
        if len(set(self.class_names)) != len(self.class_names):
            raise ManifestError("duplicate class names")
        if not self.folds:
            raise ManifestError("a manifest needs at least one fold")
        seen_folds = set()
        for fold in self.folds:
            if fold.fold_id in seen_folds:
                raise ManifestError(f"duplicate fold id {fold.fold_id}")
            seen_folds.add(fold.fold_id)
            if not fold.train_ids or not fold.test_ids:
                raise ManifestError(f"fold {fold.fold_id}: empty train or test side")
            overlap = set(fold.train_ids) & set(fold.test_ids)
            if overlap:
                example = sorted(overlap)[0]
                raise ManifestError(
                    f"fold {fold.fold_id}: {len(overlap)} id(s) in both train and test (e.g. {example!r})"
                )
            for ids in (fold.train_ids, fold.test_ids):
                if len(set(ids)) != len(ids):
                    raise ManifestError(f"fold {fold.fold_id}: duplicated image ids")
        n_classes = len(self.class_names)
        for image_id in self.all_ids():
            if image_id not in self.labels:
                raise ManifestError(f"image id {image_id!r} has no class assignment")
        for image_id, label in self.labels.items():
            if not 0 <= label < n_classes:
                raise ManifestError(f"image id {image_id!r}: class index {label} out of range")


def save_manifest(manifest, path):
    """Write a manifest as deterministic, human-readable JSON."""
    manifest.validate()
    payload = {
        "dataset_name": manifest.dataset_name,
        "protocol": manifest.protocol,
        "class_names": list(manifest.class_names),
        "labels": {
            image_id: manifest.class_names[label]
            for image_id, label in sorted(manifest.labels.items())
        },
        "folds": [
            {
                "fold_id": fold.fold_id,
                "train_ids": list(fold.train_ids),
                "test_ids": list(fold.test_ids),
            }
            for fold in manifest.folds
        ],
    }
    if manifest.seed is not None:
        payload["seed"] = manifest.seed
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=1, sort_keys=True)
        handle.write("\n")


def load_manifest(path):
    """Load and validate a JSON split manifest."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: not valid JSON ({exc})") from exc
    for key in ("dataset_name", "protocol", "class_names", "labels", "folds"):
        if key not in payload:
            raise ManifestError(f"{path}: missing required key {key!r}")
    class_names = tuple(payload["class_names"])
    class_index = {name: i for i, name in enumerate(class_names)}
    labels = {}
    for image_id, class_name in payload["labels"].items():
        if class_name not in class_index:
            raise ManifestError(f"image id {image_id!r} references unknown class {class_name!r}")
        labels[image_id] = class_index[class_name]
    folds = tuple(
        Fold(
            fold_id=int(entry["fold_id"]),
            train_ids=tuple(entry["train_ids"]),
            test_ids=tuple(entry["test_ids"]),
        )
        for entry in payload["folds"]
    )
    manifest = SplitManifest(
        dataset_name=payload["dataset_name"],
        class_names=class_names,
        labels=labels,
        folds=folds,
        protocol=payload["protocol"],
        seed=payload.get("seed"),
    )
    manifest.validate()
    return manifest
