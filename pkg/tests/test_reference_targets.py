"""Full-dataset reference checks (require real backbone embeddings).

These run only when VORTEX_EVAL_ROOT points at a directory laid out as

    $VORTEX_EVAL_ROOT/<dataset>/tokens.vte   # ViT-B/16 (IN-21k) tokens, all 12 blocks
    $VORTEX_EVAL_ROOT/<dataset>/split.json   # the dataset's split manifest

for the datasets below (see the extractor package for how to produce
both).  Expected SVM accuracies for ViT-B/16 (IN-21k) with m=16, within
1.0 percentage point (1.5 for fmd, whose random folds and exact SVM
formulation are not pinned down):
"""

import os

import numpy as np
import pytest

from vortex.bench import ExtractorConfig, run_protocol, soup_ablation
from vortex.interchange import load_manifest

REFERENCE_SVM_ACCURACY = {
    "outex10": (95.1, 1.0),
    "outex12": (94.0, 1.0),
    "outex13": (94.1, 1.0),
    "outex14": (77.9, 1.0),
    "fmd": (84.2, 1.5),
}

EVAL_ROOT = os.environ.get("VORTEX_EVAL_ROOT")

needs_data = pytest.mark.skipif(
    EVAL_ROOT is None,
    reason="set VORTEX_EVAL_ROOT to a directory of extracted tokens.vte + split.json per dataset",
)


def dataset_paths(name):
    root = os.path.join(EVAL_ROOT, name)
    vte = os.path.join(root, "tokens.vte")
    manifest = os.path.join(root, "split.json")
    if not (os.path.exists(vte) and os.path.exists(manifest)):
        pytest.skip(f"no extracted data for {name} under {root}")
    return vte, manifest


@needs_data
@pytest.mark.parametrize("dataset", sorted(REFERENCE_SVM_ACCURACY))
def test_svm_accuracy_matches_reference(dataset):
    expected, tolerance = REFERENCE_SVM_ACCURACY[dataset]
    vte, manifest_path = dataset_paths(dataset)
    manifest = load_manifest(manifest_path)
    report = run_protocol(vte, manifest, ExtractorConfig(soup_size=16), classifier="svm",
                          threads=os.cpu_count() or 1)
    accuracy = 100.0 * report.mean
    print(f"[ACCEPTANCE] {dataset} svm m=16: {accuracy:.1f} (expected {expected} +/- {tolerance})")
    assert abs(accuracy - expected) <= tolerance


@needs_data
def test_soup_beats_both_baselines_on_outex13():
    vte, manifest_path = dataset_paths("outex13")
    manifest = load_manifest(manifest_path)
    reports, _ = soup_ablation(vte, manifest, [16], threads=os.cpu_count() or 1)
    soup_average = 100.0 * reports[0].mean

    baseline_averages = {}
    for method in ("cls", "gap"):
        accs = [
            run_protocol(vte, manifest, ExtractorConfig(method=method), classifier=c,
                         threads=os.cpu_count() or 1).mean
            for c in ("knn", "lda", "svm")
        ]
        baseline_averages[method] = 100.0 * float(np.mean(accs))

    print(f"[ACCEPTANCE] outex13 averages: soup {soup_average:.1f}, "
          f"gap {baseline_averages['gap']:.1f}, cls {baseline_averages['cls']:.1f}")
    assert soup_average >= baseline_averages["gap"] + 1.0
    assert soup_average >= baseline_averages["cls"] + 1.0
