"""Split-manifest builders for the nine texture benchmarks.

Each builder walks the dataset's published on-disk layout (documented in
the package README), emits record ids as paths relative to the dataset
root (matching dump.dump_tokens), and hard-fails with a diff when the
resulting class/train/test counts do not match the reference protocol.
Random-fold datasets materialize their folds once from a recorded seed.
"""

import pathlib
from dataclasses import dataclass

import numpy as np

from vortex.errors import ManifestError
from vortex.interchange import Fold, SplitManifest


@dataclass(frozen=True)
class Protocol:
    n_classes: int
    n_train: int
    n_test: int
    protocol: str
    n_folds: int


EXPECTED = {
    "outex10": Protocol(24, 480, 3840, "single-split", 1),
    "outex12": Protocol(24, 480, 4320, "single-split", 1),
    "outex13": Protocol(68, 680, 680, "single-split", 1),
    "outex14": Protocol(68, 680, 1360, "single-split", 1),
    "dtd": Protocol(47, 3760, 1880, "k-fold", 10),
    "fmd": Protocol(10, 900, 100, "random-k-fold", 10),
    "kth-2-b": Protocol(11, 3564, 1188, "k-fold", 4),
    "gtos": Protocol(40, 27284, 6821, "k-fold", 5),
    "gtos-mobile": Protocol(31, 93945, 6066, "single-split", 1),
}


def _check_counts(name, manifest):
    expected = EXPECTED[name]
    problems = []
    if manifest.n_classes != expected.n_classes:
        problems.append(f"classes: expected {expected.n_classes}, got {manifest.n_classes}")
    if len(manifest.folds) != expected.n_folds:
        problems.append(f"folds: expected {expected.n_folds}, got {len(manifest.folds)}")
    for fold in manifest.folds:
        if len(fold.train_ids) != expected.n_train:
            problems.append(
                f"fold {fold.fold_id} train: expected {expected.n_train}, got {len(fold.train_ids)}"
            )
        if len(fold.test_ids) != expected.n_test:
            problems.append(
                f"fold {fold.fold_id} test: expected {expected.n_test}, got {len(fold.test_ids)}"
            )
    if problems:
        raise ManifestError(f"{name}: dataset does not match its reference protocol; "
                            + "; ".join(problems))


def _read_outex_listing(path):
    """Outex problem listing: optional leading count, then 'file label' lines."""
    entries = []
    lines = pathlib.Path(path).read_text().split("\n")
    for line in lines:
        parts = line.split()
        if not parts:
            continue
        if len(parts) == 1 and parts[0].isdigit() and not entries:
            continue  # leading count line
        if len(parts) != 2:
            raise ManifestError(f"{path}: cannot parse line {line!r}")
        entries.append((f"images/{parts[0]}", int(parts[1])))
    return entries


def _build_outex(name, root):
    root = pathlib.Path(root)
    problem_dirs = sorted(p for p in root.iterdir() if p.is_dir() and p.name.isdigit())
    if not problem_dirs:
        raise ManifestError(f"{name}: no problem directories (000, 001, ...) under {root}")
    train, test, labels = [], [], {}
    for problem in problem_dirs:
        for listing, bucket in (("train.txt", train), ("test.txt", test)):
            for image_id, label in _read_outex_listing(problem / listing):
                if image_id not in labels:
                    bucket.append(image_id)
                elif labels[image_id] != label:
                    raise ManifestError(f"{name}: {image_id} relabeled across problems")
                labels[image_id] = label
    n_classes = max(labels.values()) + 1
    class_names = tuple(f"class{c:02d}" for c in range(n_classes))
    return SplitManifest(
        dataset_name=name,
        class_names=class_names,
        labels=labels,
        folds=(Fold(0, tuple(train), tuple(test)),),
        protocol="single-split",
    )


def _scan_class_dirs(root, pattern="*"):
    """{class_name: [relative ids]} for root/<class>/**/<image> layouts."""
    root = pathlib.Path(root)
    by_class = {}
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        ids = [
            p.relative_to(root.parent if root.name in ("image", "images") else root).as_posix()
            for p in sorted(class_dir.rglob(pattern))
            if p.is_file()
        ]
        if ids:
            by_class[class_dir.name] = ids
    if not by_class:
        raise ManifestError(f"no class directories with images under {root}")
    return by_class


def _build_fmd(root, seed):
    root = pathlib.Path(root)
    image_root = root / "image" if (root / "image").is_dir() else root
    by_class = _scan_class_dirs(image_root)
    class_names = tuple(sorted(by_class))
    labels = {}
    folds_test = [[] for _ in range(10)]
    rng = np.random.default_rng(seed)
    for c, class_name in enumerate(class_names):
        ids = by_class[class_name]
        for image_id in ids:
            labels[image_id] = c
        order = rng.permutation(len(ids))
        per_fold = len(ids) // 10
        for k in range(10):
            for j in order[k * per_fold:(k + 1) * per_fold]:
                folds_test[k].append(ids[j])
    all_ids = [i for ids in by_class.values() for i in ids]
    folds = []
    for k in range(10):
        held_out = set(folds_test[k])
        folds.append(Fold(k, tuple(i for i in all_ids if i not in held_out), tuple(folds_test[k])))
    return SplitManifest("fmd", class_names, labels, tuple(folds), "random-k-fold", seed=seed)


def _build_kth(root):
    root = pathlib.Path(root)
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    sample_names = ("sample_a", "sample_b", "sample_c", "sample_d")
    labels = {}
    by_sample = {s: [] for s in sample_names}
    class_names = tuple(p.name for p in class_dirs)
    for c, class_dir in enumerate(class_dirs):
        for sample in sample_names:
            sample_dir = class_dir / sample
            if not sample_dir.is_dir():
                raise ManifestError(f"kth-2-b: missing {sample_dir}")
            for path in sorted(sample_dir.rglob("*")):
                if path.is_file():
                    image_id = path.relative_to(root).as_posix()
                    labels[image_id] = c
                    by_sample[sample].append(image_id)
    # one physical sample held out per fold
    folds = tuple(
        Fold(
            k,
            tuple(i for s in sample_names if s != held_out for i in by_sample[s]),
            tuple(by_sample[held_out]),
        )
        for k, held_out in enumerate(sample_names)
    )
    return SplitManifest("kth-2-b", class_names, labels, folds, "k-fold")


def _read_listed_ids(path, prefix="images"):
    ids = []
    for line in pathlib.Path(path).read_text().split("\n"):
        line = line.strip()
        if line:
            ids.append(f"{prefix}/{line}")
    return ids


def _build_dtd(root):
    root = pathlib.Path(root)
    by_class = _scan_class_dirs(root / "images")
    class_names = tuple(sorted(by_class))
    class_index = {name: c for c, name in enumerate(class_names)}
    labels = {i: class_index[name] for name, ids in by_class.items() for i in ids}
    folds = []
    for k in range(1, 11):
        train = _read_listed_ids(root / "labels" / f"train{k}.txt")
        train += _read_listed_ids(root / "labels" / f"val{k}.txt")
        test = _read_listed_ids(root / "labels" / f"test{k}.txt")
        folds.append(Fold(k - 1, tuple(train), tuple(test)))
    return SplitManifest("dtd", class_names, labels, tuple(folds), "k-fold")


def _build_gtos(root):
    root = pathlib.Path(root)
    labels = {}
    names_by_label = {}
    folds = []
    for k in range(1, 6):
        sides = {}
        for side in ("train", "test"):
            listing = root / "labels" / f"{side}{k}.txt"
            if not listing.exists():
                raise ManifestError(f"gtos: missing split file {listing}")
            ids = []
            for line in listing.read_text().split("\n"):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 2:
                    raise ManifestError(f"{listing}: cannot parse line {line!r}")
                image_id = parts[0].lstrip("/")
                label = int(parts[1])
                class_name = image_id.split("/")[0]
                labels[image_id] = label
                names_by_label.setdefault(label, class_name)
                ids.append(image_id)
            sides[side] = ids
        folds.append(Fold(k - 1, tuple(sides["train"]), tuple(sides["test"])))
    n_classes = max(labels.values()) + 1
    class_names = tuple(names_by_label.get(c, f"class{c:02d}") for c in range(n_classes))
    return SplitManifest("gtos", class_names, labels, tuple(folds), "k-fold")


def _build_gtos_mobile(root):
    root = pathlib.Path(root)
    sides = {}
    for side in ("train", "test"):
        if not (root / side).is_dir():
            raise ManifestError(f"gtos-mobile: missing {root / side}")
        sides[side] = _scan_class_dirs(root / side)
    class_names = tuple(sorted(set(sides["train"]) | set(sides["test"])))
    class_index = {name: c for c, name in enumerate(class_names)}
    labels = {}
    buckets = {"train": [], "test": []}
    for side, by_class in sides.items():
        for name, ids in by_class.items():
            for image_id in ids:
                full_id = f"{side}/{image_id}"
                labels[full_id] = class_index[name]
                buckets[side].append(full_id)
    folds = (Fold(0, tuple(buckets["train"]), tuple(buckets["test"])),)
    return SplitManifest("gtos-mobile", class_names, labels, folds, "single-split")


def build_manifest(dataset_name, root, seed=0):
    """Build the validated SplitManifest for a supported dataset layout."""
    name = dataset_name.lower()
    if name not in EXPECTED:
        raise ManifestError(
            f"unknown dataset {dataset_name!r}; supported: {', '.join(sorted(EXPECTED))}"
        )
    if name.startswith("outex"):
        manifest = _build_outex(name, root)
    elif name == "fmd":
        manifest = _build_fmd(root, seed)
    elif name == "kth-2-b":
        manifest = _build_kth(root)
    elif name == "dtd":
        manifest = _build_dtd(root)
    elif name == "gtos":
        manifest = _build_gtos(root)
    else:
        manifest = _build_gtos_mobile(root)
    _check_counts(name, manifest)
    manifest.validate()
    return manifest
