"""End-to-end evaluation harness: encode, fit, test, per fold.

A run streams a VTE file once, turns each needed record into a descriptor
(orderless soup, CLS or GAP), then fits the chosen classifier per manifest
fold and reports per-fold accuracies.  Descriptors depend only on the
record and the extractor settings, so one encoding pass serves all folds.

Also hosts the synthetic embedding generator used throughout the test
suite: each class gets its own random token signature per layer, images
add Gaussian noise and shuffle their token rows, so descriptors carry
class structure while token order carries none.
"""

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import classifiers
from .aggregation import cls_descriptor, gap_descriptor
from .errors import ValidationError
from .interchange import (
    DescriptorRecord,
    EmbeddingRecord,
    Fold,
    SplitManifest,
    iter_vte,
)
from .rae import vortex_descriptor_series, vortex_encode

EXTRACTOR_METHODS = ("vortex", "cls", "gap")
CLASSIFIER_FITS = {
    "knn": classifiers.knn_fit,
    "lda": classifiers.lda_fit,
    "svm": classifiers.svm_fit,
}

#: fixed column order of the per-fold report CSV
REPORT_CSV_COLUMNS = ("dataset", "extractor", "classifier", "fold_id", "accuracy")
#: fixed column order of the soup-size ablation CSV
ABLATION_CSV_COLUMNS = ("m", "knn", "lda", "svm", "mean")


@dataclass(frozen=True)
class ExtractorConfig:
    """Which descriptor to compute per record, and with what knobs."""

    method: str = "vortex"
    soup_size: int = 16
    seed_mode: str = "literal"
    gap_layer: object = "last"

    def describe(self):
        if self.method == "vortex":
            return f"vortex(m={self.soup_size})"
        return self.method

    def encode(self, record):
        if self.method == "vortex":
            return vortex_encode(record, self.soup_size, self.seed_mode)
        if self.method == "cls":
            return cls_descriptor(record)
        if self.method == "gap":
            return gap_descriptor(record, self.gap_layer)
        raise ValidationError(f"unknown extractor {self.method!r}; expected one of {EXTRACTOR_METHODS}")


@dataclass
class RunReport:
    """Result of one (dataset, extractor, classifier) evaluation."""

    dataset_name: str
    extractor: str
    classifier: str
    fold_accuracies: list
    mean: float
    std: float | None
    wall_clock_sec: float
    config: dict = field(default_factory=dict)
    fold_hash: str = ""

    @classmethod
    def build(cls, dataset_name, extractor, classifier, fold_accuracies, wall_clock_sec,
              config=None, fold_hash=""):
        accs = [float(a) for a in fold_accuracies]
        std = float(np.std(accs)) if len(accs) > 1 else None
        return cls(
            dataset_name=dataset_name,
            extractor=extractor,
            classifier=classifier,
            fold_accuracies=accs,
            mean=float(np.mean(accs)),
            std=std,
            wall_clock_sec=wall_clock_sec,
            config=dict(config or {}),
            fold_hash=fold_hash,
        )

    def summary(self):
        spread = "" if self.std is None else f" +/- {100 * self.std:.1f}"
        return (
            f"{self.dataset_name}: {self.extractor} + {self.classifier} -> "
            f"{100 * self.mean:.1f}{spread} ({len(self.fold_accuracies)} fold(s), "
            f"{self.wall_clock_sec:.1f}s, folds {self.fold_hash})"
        )

    def to_json_dict(self):
        return {
            "dataset_name": self.dataset_name,
            "extractor": self.extractor,
            "classifier": self.classifier,
            "fold_accuracies": self.fold_accuracies,
            "mean": self.mean,
            "std": self.std,
            "wall_clock_sec": self.wall_clock_sec,
            "config": self.config,
            "fold_hash": self.fold_hash,
        }


def save_reports(reports, path):
    with open(path, "w", encoding="utf-8") as out:
        json.dump([r.to_json_dict() for r in reports], out, indent=1, sort_keys=True)
        out.write("\n")


def load_reports(path):
    with open(path, "r", encoding="utf-8") as handle:
        return [RunReport(**entry) for entry in json.load(handle)]


def save_report_csv(reports, path):
    """Per-fold accuracies, one row per (report, fold)."""
    with open(path, "w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out)
        writer.writerow(REPORT_CSV_COLUMNS)
        for report in reports:
            for fold_id, acc in enumerate(report.fold_accuracies):
                writer.writerow(
                    [report.dataset_name, report.extractor, report.classifier, fold_id, f"{acc:.6f}"]
                )


def encode_descriptors(vte_path, config=ExtractorConfig(), wanted_ids=None, threads=1):
    """Stream a VTE file and return {image_id: descriptor}.

    Records outside ``wanted_ids`` are skipped; an error lists any wanted
    ids the file did not contain.  Encoding is distributed over a thread
    pool; results are keyed by id, so the pool size cannot change them.
    """
    wanted = None if wanted_ids is None else set(wanted_ids)

    def should_encode(record):
        return wanted is None or record.image_id in wanted

    descriptors = {}
    records = (r for r in iter_vte(vte_path) if should_encode(r))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for image_id, descriptor in pool.map(
                lambda r: (r.image_id, config.encode(r)), records
            ):
                descriptors[image_id] = descriptor
    else:
        for record in records:
            descriptors[record.image_id] = config.encode(record)

    if wanted is not None:
        missing = sorted(wanted - set(descriptors))
        if missing:
            raise ValidationError(
                f"{len(missing)} manifest id(s) missing from {vte_path}: "
                + ", ".join(missing[:10])
                + ("..." if len(missing) > 10 else "")
            )
    return descriptors


def _fold_matrices(manifest, descriptors, fold):
    def stack(ids):
        features = np.vstack([descriptors[i] for i in ids])
        labels = np.array([manifest.label_of(i) for i in ids], dtype=np.int64)
        return features, labels

    return stack(fold.train_ids), stack(fold.test_ids)


def _evaluate_folds(manifest, descriptors, classifier, classifier_options):
    fit = CLASSIFIER_FITS.get(classifier)
    if fit is None:
        raise ValidationError(
            f"unknown classifier {classifier!r}; expected one of {tuple(CLASSIFIER_FITS)}"
        )
    accuracies = []
    for fold in manifest.folds:
        (train_x, train_y), (test_x, test_y) = _fold_matrices(manifest, descriptors, fold)
        model = fit(train_x, train_y, **(classifier_options or {}))
        accuracies.append(classifiers.accuracy(model, test_x, test_y))
    return accuracies


def run_protocol(vte_path, manifest, extractor_cfg=ExtractorConfig(), classifier="svm",
                 classifier_options=None, threads=1):
    """Encode every manifest id, then fit/test per fold.  Returns a RunReport."""
    manifest.validate()
    started = time.perf_counter()
    options = dict(classifier_options or {})
    if classifier == "svm":
        options.setdefault("n_jobs", threads)  # per-class fits are order-independent
    descriptors = encode_descriptors(vte_path, extractor_cfg, manifest.all_ids(), threads)
    fold_accuracies = _evaluate_folds(manifest, descriptors, classifier, options)
    return RunReport.build(
        dataset_name=manifest.dataset_name,
        extractor=extractor_cfg.describe(),
        classifier=classifier,
        fold_accuracies=fold_accuracies,
        wall_clock_sec=time.perf_counter() - started,
        config={
            "extractor": extractor_cfg.describe(),
            "soup_size": extractor_cfg.soup_size,
            "seed_mode": extractor_cfg.seed_mode,
            "gap_layer": str(extractor_cfg.gap_layer),
            "classifier": classifier,
            "classifier_options": options,
            "svm_shuffle_seed": options.get("shuffle_seed", classifiers.DEFAULT_SVM_SHUFFLE_SEED)
            if classifier == "svm" else None,
            "threads": threads,
            "protocol": manifest.protocol,
            "manifest_seed": manifest.seed,
        },
        fold_hash=manifest.fold_hash(),
    )


def soup_ablation(vte_path, manifest, soup_sizes, seed_mode="literal", threads=1):
    """Sweep the soup size, scoring each m with all three classifiers.

    Returns (reports, table): one report per m whose per-fold values are
    the unweighted mean of the KNN/LDA/SVM accuracies on that fold, and a
    plottable table of rows (m, knn, lda, svm, mean) using fold-averaged
    accuracies.  Descriptors for all m are computed in one pass per image.
    """
    manifest.validate()
    sizes = sorted(set(int(m) for m in soup_sizes))
    if not sizes or sizes[0] < 1:
        raise ValidationError("soup_sizes must be non-empty positive integers")
    wanted = manifest.all_ids()
    started = time.perf_counter()

    def encode(record):
        return record.image_id, vortex_descriptor_series(record, sizes, seed_mode)

    series = {}
    records = (r for r in iter_vte(vte_path) if r.image_id in wanted)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for image_id, by_size in pool.map(encode, records):
                series[image_id] = by_size
    else:
        for record in records:
            image_id, by_size = encode(record)
            series[image_id] = by_size
    missing = sorted(wanted - set(series))
    if missing:
        raise ValidationError(f"{len(missing)} manifest id(s) missing from {vte_path}")

    reports = []
    table = []
    for m in sizes:
        descriptors = {image_id: by_size[m] for image_id, by_size in series.items()}
        per_classifier = {
            name: _evaluate_folds(manifest, descriptors, name, None)
            for name in ("knn", "lda", "svm")
        }
        fold_means = np.mean([per_classifier[n] for n in ("knn", "lda", "svm")], axis=0)
        report = RunReport.build(
            dataset_name=manifest.dataset_name,
            extractor=f"vortex(m={m})",
            classifier="mean(knn,lda,svm)",
            fold_accuracies=fold_means,
            wall_clock_sec=time.perf_counter() - started,
            config={
                "soup_size": m,
                "seed_mode": seed_mode,
                "threads": threads,
                "per_classifier_mean": {n: float(np.mean(a)) for n, a in per_classifier.items()},
            },
            fold_hash=manifest.fold_hash(),
        )
        reports.append(report)
        table.append(
            {
                "m": m,
                "knn": float(np.mean(per_classifier["knn"])),
                "lda": float(np.mean(per_classifier["lda"])),
                "svm": float(np.mean(per_classifier["svm"])),
                "mean": float(report.mean),
            }
        )
    return reports, table


def save_ablation_csv(table, path):
    with open(path, "w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out)
        writer.writerow(ABLATION_CSV_COLUMNS)
        for row in table:
            writer.writerow([row["m"]] + [f"{row[c]:.6f}" for c in ABLATION_CSV_COLUMNS[1:]])


def compare_extractors(vte_path, manifest, classifier="svm", soup_size=16,
                       seed_mode="literal", threads=1):
    """Score the soup descriptor against the CLS and GAP baselines.

    All three columns use the identical manifest folds (compare the
    fold_hash fields).  If the records carry no CLS side channel, the cls
    column is None and the comparison continues.
    """
    results = {}
    for method in EXTRACTOR_METHODS:
        cfg = ExtractorConfig(method=method, soup_size=soup_size, seed_mode=seed_mode)
        try:
            results[method] = run_protocol(vte_path, manifest, cfg, classifier, threads=threads)
        except ValidationError as exc:
            if method == "cls" and "CLS" in str(exc):
                results[method] = None
            else:
                raise
    return results


# ---------------------------------------------------------------------------
# synthetic embeddings


@dataclass(frozen=True)
class SyntheticTextureSpec:
    """Recipe for a deterministic, desk-scale embedding dataset.

    Every class owns a random per-layer token signature; an image is that
    signature plus Gaussian noise, with token rows shuffled inside each
    layer.  At noise 0 the classes are separable by construction.
    """

    n_classes: int = 5
    images_per_class: int = 10
    n_layers: int = 2
    n_tokens: int = 16
    n_features: int = 24
    noise: float = 0.05
    seed: int = 0
    train_fraction: float = 0.5
    n_folds: int = 1
    include_cls: bool = True
    dataset_name: str = "synthetic"

    def validate(self):
        if self.n_classes < 2:
            raise ValidationError("a synthetic dataset needs at least 2 classes")
        if self.images_per_class < 2:
            raise ValidationError("need at least 2 images per class")
        if min(self.n_layers, self.n_tokens, self.n_features) < 1:
            raise ValidationError("layers, tokens and features must all be >= 1")
        if self.noise < 0:
            raise ValidationError("noise must be >= 0")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must be in (0, 1)")
        if self.n_folds < 1 or self.n_folds > self.images_per_class:
            raise ValidationError("n_folds must be in [1, images_per_class]")


def generate_synthetic(spec):
    """Build (records, manifest) for a SyntheticTextureSpec.

    One seeded generator drives everything, so equal recipes produce
    bit-identical VTE files.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    shape = (spec.n_layers, spec.n_tokens, spec.n_features)
    signatures = rng.normal(size=(spec.n_classes,) + shape)
    cls_signatures = rng.normal(size=(spec.n_classes, spec.n_features))

    records = []
    labels = {}
    class_names = tuple(f"class{c:02d}" for c in range(spec.n_classes))
    by_class = {c: [] for c in range(spec.n_classes)}
    for c in range(spec.n_classes):
        for i in range(spec.images_per_class):
            tokens = signatures[c] + spec.noise * rng.standard_normal(shape)
            for layer in range(spec.n_layers):
                tokens[layer] = tokens[layer][rng.permutation(spec.n_tokens)]
            cls_token = None
            if spec.include_cls:
                cls_vec = cls_signatures[c] + spec.noise * rng.standard_normal(spec.n_features)
                cls_token = cls_vec.astype(np.float32)
            image_id = f"{spec.dataset_name}-c{c:02d}-i{i:03d}"
            records.append(EmbeddingRecord(image_id, tokens.astype(np.float32), cls_token))
            labels[image_id] = c
            by_class[c].append(image_id)

    if spec.n_folds == 1:
        n_train = max(1, min(spec.images_per_class - 1,
                             round(spec.train_fraction * spec.images_per_class)))
        train_ids = []
        test_ids = []
        for c in range(spec.n_classes):
            train_ids.extend(by_class[c][:n_train])
            test_ids.extend(by_class[c][n_train:])
        folds = (Fold(0, tuple(train_ids), tuple(test_ids)),)
        protocol = "single-split"
    else:
        folds = []
        for k in range(spec.n_folds):
            test_ids = []
            train_ids = []
            for c in range(spec.n_classes):
                for i, image_id in enumerate(by_class[c]):
                    (test_ids if i % spec.n_folds == k else train_ids).append(image_id)
            folds.append(Fold(k, tuple(train_ids), tuple(test_ids)))
        folds = tuple(folds)
        protocol = "k-fold"

    manifest = SplitManifest(
        dataset_name=spec.dataset_name,
        class_names=class_names,
        labels=labels,
        folds=folds,
        protocol=protocol,
        seed=spec.seed,
    )
    manifest.validate()
    return records, manifest


def descriptor_records(descriptors, manifest=None):
    """Wrap an {id: vector} map as DescriptorRecords, labeling from the
    manifest when given (unlabeled ids get -1)."""
    records = []
    for image_id in descriptors:
        label = -1
        if manifest is not None and image_id in manifest.labels:
            label = manifest.labels[image_id]
        records.append(DescriptorRecord(image_id, label, np.asarray(descriptors[image_id], dtype=np.float64)))
    return records
