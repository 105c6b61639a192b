import csv
import json

import numpy as np
import pytest
import yaml

from xlirony.align import load_map
from xlirony.cli import main
from xlirony.manifest import RunManifest


def run(*argv):
    return main([str(a) for a in argv])


def test_no_args_prints_usage(capsys):
    assert run() == 2
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["bogus"], ["corpus"], ["corpus", "stats"], ["train", "--model", "svm"],
                                  ["--jobs", "0", "corpus", "stats", "--in", "x.csv"]])
def test_usage_errors(argv, capsys):
    assert run(*argv) == 2
    assert "usage" in capsys.readouterr().err


def test_domain_error_exit_1(tmp_path, capsys):
    assert run("corpus", "stats", "--in", tmp_path / "missing.csv") == 1
    assert "error" in capsys.readouterr().err


def test_corpus_stats(world_dir, capsys):
    assert run("corpus", "stats", "--in", world_dir / "corpora" / "ar.csv") == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].split() == ["Language", "Ironic", "Non-ironic", "Total"]
    assert out[1].split()[0] == "ar" and out[1].split()[-1] == "600"


def test_corpus_preprocess_and_split(world_dir, tmp_path):
    clean = tmp_path / "clean.csv"
    assert run("corpus", "preprocess", "--in", world_dir / "corpora" / "en.csv", "--out", clean) == 0
    assert RunManifest.read(str(clean) + ".manifest.json").seed == 42
    assert run("--seed", "3", "corpus", "split", "--in", clean, "--n-train", 400, "--n-test", 100,
               "--out-dir", tmp_path / "s") == 0
    with open(tmp_path / "s" / "clean_train.csv", encoding="utf-8") as fh:
        assert sum(1 for _ in fh) == 401
    m = RunManifest.read(tmp_path / "s" / "clean_split.manifest.json")
    assert m.seed == 3 and list(m.input_digests) == [str(clean.resolve())]


def test_features_and_coverage(world_dir, tmp_path, capsys):
    out = tmp_path / "f.csv"
    assert run("features", "extract", "--corpus", world_dir / "corpora" / "fr.csv", "--out", out) == 0
    with open(out, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:3] == ["id", "lang", "label"] and len(rows) == 601
    assert run("embeddings", "coverage", "--corpus", world_dir / "corpora" / "fr.csv",
               "--embeddings", world_dir / "embeddings" / "fr.vec") == 0
    cap = capsys.readouterr()
    assert cap.out.startswith("oov_word,count")
    assert "token_coverage=1.0000" in cap.err


def test_align_commands(world, world_dir, tmp_path, capsys):
    m = tmp_path / "fr-en.tsv"
    e = world_dir / "embeddings"
    assert run("align", "fit", "--src", e / "fr.vec", "--tgt", e / "en.vec",
               "--dict", world_dir / "dictionaries" / "fr-en.tsv", "--out", m, "--refine", 1) == 0
    W = load_map(m).W
    assert np.linalg.norm(W - world.true_map("fr", "en")) < 0.5
    assert run("align", "apply", "--src", e / "fr.vec", "--map", m, "--out", tmp_path / "fr_in_en.vec") == 0
    capsys.readouterr()
    word = world.tables["fr"].words[3]
    assert run("align", "neighbors", "--word", word, "--src", e / "fr.vec", "--tgt", e / "en.vec",
               "--map", m, "--k", 3) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3 and lines[0].split("\t")[0] == world.tables["en"].words[3]
    assert run("align", "neighbors", "--word", "nope", "--src", e / "fr.vec", "--tgt", e / "en.vec",
               "--map", m) == 1


def test_train_predict_rf(world_dir, tmp_path):
    corpus = world_dir / "corpora" / "en.csv"
    cfg = tmp_path / "rf.yaml"
    cfg.write_text("n_trees: 10\n", encoding="utf-8")
    model = tmp_path / "rf.model"
    assert run("train", "--model", "rf", "--corpus", corpus, "--config", cfg, "--surface", "--out", model) == 0
    assert model.read_text(encoding="utf-8").startswith("xlirony-rf 1")
    preds = tmp_path / "p.csv"
    assert run("predict", "--model-file", model, "--corpus", world_dir / "corpora" / "fr.csv", "--out", preds) == 0
    with open(preds, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["id", "gold", "pred", "p_ironic"] and len(rows) == 600


def test_train_predict_cnn_and_tune(world_dir, tmp_path):
    corpus = world_dir / "corpora" / "ar.csv"
    cfg = tmp_path / "cnn.yaml"
    cfg.write_text(yaml.safe_dump({"epochs": 2, "n_filters": 4, "widths": [1, 2], "max_seq_len": 16}),
                   encoding="utf-8")
    model = tmp_path / "cnn.model"
    emb = world_dir / "embeddings" / "ar.vec"
    assert run("train", "--model", "cnn", "--corpus", corpus, "--embeddings", emb, "--config", cfg,
               "--out", model) == 0
    assert run("predict", "--model-file", model, "--corpus", corpus, "--out", tmp_path / "p.csv") == 0
    assert run("train", "--model", "cnn", "--corpus", corpus, "--out", tmp_path / "x") == 1
    space = tmp_path / "space.yaml"
    space.write_text("n_filters: [2, 4]\n", encoding="utf-8")
    best = tmp_path / "best.yaml"
    assert run("tune", "--corpus", corpus, "--embeddings", f"ar={emb}", "--config", cfg, "--space", space,
               "--budget", 2, "--out", best) == 0
    assert yaml.safe_load(best.read_text(encoding="utf-8"))["n_filters"] in (2, 4)
    assert len(json.loads((tmp_path / "best.yaml.trials.json").read_text(encoding="utf-8"))) == 2


def test_predict_rejects_unknown_model(tmp_path, world_dir):
    bad = tmp_path / "m"
    bad.write_text("hello\n", encoding="utf-8")
    assert run("predict", "--model-file", bad, "--corpus", world_dir / "corpora" / "ar.csv",
               "--out", tmp_path / "p.csv") == 1


def test_manifest_out_for_stdout_commands(world_dir, tmp_path, capsys):
    target = tmp_path / "m.json"
    assert run("--manifest-out", target, "corpus", "stats", "--in", world_dir / "corpora" / "fr.csv") == 0
    m = RunManifest.read(target)
    assert m.command.startswith("xlirony --manifest-out") and len(m.input_digests) == 1


def _small_matrix(world_dir, tmp_path):
    cfg = yaml.safe_load((world_dir / "matrix.yaml").read_text(encoding="utf-8"))
    cfg["cnn"]["epochs"] = 2
    cfg["rf"]["n_trees"] = 5
    cfg["experiments"] = [{"train": ["ar"], "test": ["fr"], "family": "cnn_crosslingual"},
                          {"train": ["en"], "test": ["en"], "family": "rf_full"}]
    del cfg["generate"]
    for k in ("corpora",):
        for lang, entry in cfg[k].items():
            entry["path"] = str(world_dir / entry["path"])
    for k in ("embeddings", "dictionaries"):
        cfg[k] = {a: str(world_dir / b) for a, b in cfg[k].items()}
    p = tmp_path / "m.yaml"
    p.write_text(yaml.safe_dump(cfg, allow_unicode=True), encoding="utf-8")
    return p


def test_experiment_run_report_and_rerun(world_dir, tmp_path, capsys):
    matrix = _small_matrix(world_dir, tmp_path)
    out = tmp_path / "run"
    assert run("--quiet", "experiment", "run", "--matrix", matrix, "--out-dir", out) == 0
    assert sorted(p.name for p in (out / "metrics").iterdir()) == [
        "ar_to_fr__cnn_crosslingual.json", "en_to_en__rf_full.json"]
    man = RunManifest.read(out / "manifest.json")
    assert man.seed == 42 and man.config["seed"] == 42
    assert run("--quiet", "experiment", "run", "--manifest", out / "manifest.json", "--out-dir", tmp_path / "again") == 0
    for sub in ("predictions", "metrics"):
        for p in (out / sub).iterdir():
            assert p.read_bytes() == (tmp_path / "again" / sub / p.name).read_bytes()
    capsys.readouterr()
    assert run("experiment", "report", "--in-dir", out, "--format", "csv") == 0
    assert capsys.readouterr().out.startswith("experiment,train,test,family")
    assert (out / "figures" / "macro_f1.png").exists()
    assert run("experiment", "report", "--in-dir", out, "--format", "txt", "--out", tmp_path / "r.txt",
               "--no-figures", "--fig-dir", tmp_path / "nofig") == 0
    assert "Train->Test" in (tmp_path / "r.txt").read_text(encoding="utf-8")
    assert not (tmp_path / "nofig").exists()


def test_seed_flag_overrides_matrix_seed(world_dir, tmp_path):
    matrix = _small_matrix(world_dir, tmp_path)
    assert run("--quiet", "--seed", "7", "experiment", "run", "--matrix", matrix, "--out-dir", tmp_path / "o") == 0
    assert RunManifest.read(tmp_path / "o" / "manifest.json").config["seed"] == 7
    spec = json.loads((tmp_path / "o" / "metrics" / "en_to_en__rf_full.json").read_text(encoding="utf-8"))["spec"]
    assert spec["seed"] == 7


def test_stale_manifest_rejected(world_dir, tmp_path):
    import shutil
    local = tmp_path / "w"
    shutil.copytree(world_dir, local)
    matrix = _small_matrix(local, tmp_path)
    out = tmp_path / "run"
    assert run("--quiet", "experiment", "run", "--matrix", matrix, "--out-dir", out) == 0
    with open(local / "corpora" / "en.csv", "a", encoding="utf-8") as fh:
        fh.write("extra,en,ironic,more text\n")
    assert run("experiment", "run", "--manifest", out / "manifest.json", "--out-dir", tmp_path / "x") == 1


def test_synth(tmp_path, capsys):
    assert run("synth", "--out-dir", tmp_path / "w", "--n-tweets", 60, "--n-test", 20, "--dim", 6) == 0
    assert (tmp_path / "w" / "matrix.yaml").exists()
    assert len((tmp_path / "w" / "embeddings" / "fr.vec").read_text(encoding="utf-8").splitlines()) == 81
