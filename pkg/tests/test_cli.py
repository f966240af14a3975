import json

import pytest

from vortex.cli import main
from vortex.interchange import VTE_MAGIC, read_vtd


def run(*argv):
    return main(list(argv))


@pytest.fixture
def dataset(tmp_path):
    vte = tmp_path / "tokens.vte"
    manifest = tmp_path / "split.json"
    code = run(
        "synth", "--out-vte", str(vte), "--out-manifest", str(manifest),
        "--classes", "3", "--images-per-class", "6", "--layers", "2",
        "--tokens", "8", "--dim", "12", "--noise", "0.02", "--seed", "4",
    )
    assert code == 0
    return vte, manifest


def test_synth_is_deterministic(tmp_path):
    args = ["--classes", "3", "--images-per-class", "4", "--seed", "7"]
    for name in ("a", "b"):
        assert run("synth", "--out-vte", str(tmp_path / f"{name}.vte"),
                   "--out-manifest", str(tmp_path / f"{name}.json"), *args) == 0
    assert (tmp_path / "a.vte").read_bytes() == (tmp_path / "b.vte").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_synth_rejects_single_class(tmp_path, capsys):
    code = run("synth", "--out-vte", str(tmp_path / "x.vte"),
               "--out-manifest", str(tmp_path / "x.json"), "--classes", "1")
    assert code == 4
    assert "classes" in capsys.readouterr().err


def test_encode_defaults_to_m16(dataset, tmp_path):
    vte, manifest = dataset
    default_out = tmp_path / "default.vtd"
    explicit_out = tmp_path / "explicit.vtd"
    assert run("encode", "--vte", str(vte), "--out", str(default_out)) == 0
    assert run("encode", "--vte", str(vte), "--out", str(explicit_out), "--m", "16") == 0
    assert default_out.read_bytes() == explicit_out.read_bytes()
    other = tmp_path / "m4.vtd"
    assert run("encode", "--vte", str(vte), "--out", str(other), "--m", "4") == 0
    assert other.read_bytes() != default_out.read_bytes()


def test_encode_rerun_is_bit_identical(dataset, tmp_path):
    vte, manifest = dataset
    for name, threads in (("one.vtd", "1"), ("two.vtd", "3")):
        assert run("encode", "--vte", str(vte), "--out", str(tmp_path / name),
                   "--m", "4", "--threads", threads, "--manifest", str(manifest)) == 0
    assert (tmp_path / "one.vtd").read_bytes() == (tmp_path / "two.vtd").read_bytes()
    labels = {r.label for r in read_vtd(tmp_path / "one.vtd")}
    assert labels == {0, 1, 2}


def test_encode_empty_vte_warns(tmp_path, capsys):
    empty = tmp_path / "empty.vte"
    empty.write_bytes(VTE_MAGIC + (1).to_bytes(4, "little"))
    out = tmp_path / "empty.vtd"
    assert run("encode", "--vte", str(empty), "--out", str(out)) == 0
    assert "warning" in capsys.readouterr().err
    assert read_vtd(out) == []


@pytest.mark.parametrize("classifier", ["knn", "lda", "svm"])
def test_eval_classifier_choices(dataset, tmp_path, classifier, capsys):
    vte, manifest = dataset
    report_path = tmp_path / "r.json"
    code = run("eval", "--vte", str(vte), "--manifest", str(manifest),
               "--classifier", classifier, "--m", "4", "--report", str(report_path))
    assert code == 0
    assert classifier in capsys.readouterr().out
    (entry,) = json.loads(report_path.read_text())
    assert entry["classifier"] == classifier
    assert entry["mean"] == 1.0


def test_eval_unknown_classifier_is_usage_error(dataset, capsys):
    vte, manifest = dataset
    assert run("eval", "--vte", str(vte), "--manifest", str(manifest),
               "--classifier", "tree") == 2


def test_eval_requires_flags_or_config(capsys):
    assert run("eval") == 2
    assert "required" in capsys.readouterr().err


def test_eval_ablation_range(dataset, tmp_path, capsys):
    vte, manifest = dataset
    csv_path = tmp_path / "ablation.csv"
    code = run("eval", "--vte", str(vte), "--manifest", str(manifest),
               "--ablate-m", "1..3", "--csv", str(csv_path))
    assert code == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "m,knn,lda,svm,mean"
    assert len(lines) == 4
    assert capsys.readouterr().out.count("vortex(m=") == 3


def test_eval_compare_extractors(dataset, capsys):
    vte, manifest = dataset
    code = run("eval", "--vte", str(vte), "--manifest", str(manifest),
               "--compare-extractors", "--m", "2", "--classifier", "knn")
    assert code == 0
    out = capsys.readouterr().out
    for token in ("vortex(m=2)", "cls", "gap"):
        assert token in out


def test_config_file_supplies_defaults_flags_win(dataset, tmp_path, capsys):
    vte, manifest = dataset
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"vte": str(vte), "manifest": str(manifest),
                                  "classifier": "knn", "m": 2}))
    assert run("--config", str(config), "eval") == 0
    assert "knn" in capsys.readouterr().out
    assert run("--config", str(config), "eval", "--classifier", "lda") == 0
    assert "lda" in capsys.readouterr().out


def test_exit_code_families(tmp_path, dataset, capsys):
    vte, manifest = dataset
    bad_magic = tmp_path / "bad.vte"
    bad_magic.write_bytes(b"XXXX" + (1).to_bytes(4, "little"))
    assert run("encode", "--vte", str(bad_magic), "--out", str(tmp_path / "o.vtd")) == 3

    overlapping = tmp_path / "overlap.json"
    overlapping.write_text(json.dumps({
        "dataset_name": "d", "protocol": "single-split", "class_names": ["a", "b"],
        "labels": {"x": "a", "y": "b"},
        "folds": [{"fold_id": 0, "train_ids": ["x", "y"], "test_ids": ["x"]}],
    }))
    assert run("eval", "--vte", str(vte), "--manifest", str(overlapping)) == 5

    assert run("encode", "--vte", str(tmp_path / "missing.vte"),
               "--out", str(tmp_path / "o.vtd")) == 7
    capsys.readouterr()


def test_version_flag(capsys):
    assert run("--version") == 0
    assert "vortex" in capsys.readouterr().out


def test_eval_saves_models_and_predict_reuses_them(dataset, tmp_path, capsys):
    vte, manifest = dataset
    models_dir = tmp_path / "models"
    assert run("eval", "--vte", str(vte), "--manifest", str(manifest),
               "--classifier", "lda", "--m", "4", "--save-models", str(models_dir)) == 0
    (model_path,) = sorted(models_dir.glob("*.vtm"))
    vtd = tmp_path / "all.vtd"
    assert run("encode", "--vte", str(vte), "--out", str(vtd), "--m", "4",
               "--manifest", str(manifest)) == 0
    capsys.readouterr()
    assert run("predict", "--model", str(model_path), "--vtd", str(vtd)) == 0
    out = capsys.readouterr().out
    assert "accuracy on 18 labeled record(s): 1.0000" in out
