"""Acceptance suite: one PASS/FAIL line per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they are
produced; they are also collected into the terminal summary.
"""

import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import yaml

import conftest
from conftest import make_ds
from oracles import (METRICS_HAND, csls_bruteforce, depth2_trees_shatter_xor, finite_difference_check,
                     metrics_exact, random_orthogonal, separable_set, toy_corpus, xor_set)
from xlirony import align
from xlirony.embeddings import EmbeddingTable, normalize


def verdict(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_procrustes_planted_map_recovery():
    t0 = time.perf_counter()
    worst_exact = worst_noisy = 0.0
    for dim in (2, 5, 20, 50):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            Q = random_orthogonal(dim, rng)
            X = rng.normal(size=(5000, dim))
            X /= np.linalg.norm(X, axis=1, keepdims=True)
            Y = X @ Q.T
            worst_exact = max(worst_exact, np.linalg.norm(align.procrustes(X, Y) - Q))
            Yn = Y + 0.01 * rng.normal(size=Y.shape)
            worst_noisy = max(worst_noisy, np.linalg.norm(align.procrustes(X, Yn) - Q))
    elapsed = time.perf_counter() - t0
    verdict("Procrustes planted-map recovery", worst_exact <= 1e-8 and worst_noisy <= 0.1 and elapsed < 5,
            f"dims 2/5/20/50 x 5 seeds, exact max ||W-Q||_F={worst_exact:.1e} (<=1e-8), "
            f"sigma=0.01 max={worst_noisy:.3f} (<=0.1), {elapsed:.2f}s (<5s)")


def test_orthogonality_invariant():
    # Maps exist only through LinearMap, which refuses ||W W^T - I||_F > 1e-8; also stress
    # the solver with rank-deficient, tiny and badly scaled inputs.
    rng = np.random.default_rng(0)
    worst = 0.0
    for i in range(500):
        dim = int(rng.integers(1, 60))
        n = int(rng.integers(1, 2 * dim + 2))
        X = rng.normal(size=(n, dim)) * 10.0 ** rng.uniform(-6, 6)
        Y = rng.normal(size=(n, dim)) * 10.0 ** rng.uniform(-6, 6)
        if i % 5 == 0:
            X[:, : dim // 2] = 0.0
        worst = max(worst, align.orthogonality_error(align.procrustes(X, Y)))
    rec = conftest.orthogonality_record()
    ok = worst <= 1e-8 and align.ORTHO_TOL <= 1e-8 and rec["worst"] <= 1e-8
    verdict("orthogonality invariant", ok,
            f"500 stress fits max ||W W^T - I||_F={worst:.1e}; {rec['fits']} fits so far in this session "
            f"max {rec['worst']:.1e}; LinearMap rejects > {align.ORTHO_TOL:g} (<=1e-8)")


def _csls_case(seed):
    rng = np.random.default_rng(seed)
    n_t, n_s, dim = int(rng.integers(3, 51)), int(rng.integers(2, 51)), int(rng.integers(2, 11))
    T = rng.normal(size=(n_t, dim))
    if seed % 2 == 0:
        # duplicated target vectors force exact ties
        T[1::3] = T[0]
    S = rng.normal(size=(n_s, dim))
    words = [f"w{j:02d}" for j in rng.permutation(n_t)]
    k = int(rng.integers(1, 12))
    return words, T, S, rng.normal(size=dim), k


def test_csls_oracle_equivalence():
    t0 = time.perf_counter()
    mismatches, ties = 0, 0
    for seed in range(20):
        words, T, S, q, k = _csls_case(seed)
        tbl = normalize(EmbeddingTable(tuple(words), T))
        got = [w for w, _ in align.CslsIndex(tbl, S, align.CslsConfig(k=k)).neighbors(q)]
        want = csls_bruteforce(q, S.tolist(), T.tolist(), words, k)
        mismatches += got != want
        ties += len({tuple(r) for r in T}) < len(T)
    elapsed = time.perf_counter() - t0
    verdict("CSLS oracle equivalence", mismatches == 0 and elapsed < 5,
            f"20 random tables (<=50 words, dim<=10, {ties} with exact ties), "
            f"{mismatches} ranking mismatches vs brute force, {elapsed:.2f}s (<5s)")


def test_cnn_gradient_check():
    from xlirony.models.cnn import (TrainConfig, cnn_backward, cnn_forward, cross_entropy,
                                    dense_embedding_grad, init_model)
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(5):
        rows, words, M = toy_corpus(8, seed, vocab=12, dim=5)
        cfg = TrainConfig(widths=(1, 2, 3), n_filters=3, max_seq_len=8, dropout_rate=0.5, seed=seed)
        rng = np.random.default_rng(seed)
        model = init_model({"en": EmbeddingTable(tuple(words), M)}, cfg, rng)
        for w in cfg.widths:
            model.params[f"conv{w}.bias"] = rng.normal(0, 0.1, cfg.n_filters)
        X = model.encode_all(make_ds(rows))[:4]
        y = rng.integers(0, 2, size=4)
        mask = (rng.random((4, 9)) < 0.5) / 0.5
        errs = finite_difference_check(model, X, y, mask, cnn_forward, cross_entropy, cnn_backward,
                                       dense_embedding_grad, eps=1e-5)
        worst = max(worst, max(errs.values()))
    elapsed = time.perf_counter() - t0
    verdict("CNN gradient check", worst <= 1e-4 and elapsed < 30,
            f"5 random batches, all parameter groups, max relative error {worst:.1e} (<=1e-4), "
            f"{elapsed:.2f}s (<30s)")


def test_cnn_capacity():
    from xlirony.models.cnn import TrainConfig, cnn_predict, cnn_train, dumps
    rows, words, M = toy_corpus(20, 1)
    ds, tables = make_ds(rows), {"en": EmbeddingTable(tuple(words), M)}
    cfg = TrainConfig(epochs=200, n_filters=8, widths=(1, 2), max_seq_len=10, val_fraction=0.0,
                      early_stop_patience=None, dropout_rate=0.0, learning_rate=0.01, seed=5)
    a, b = cnn_train(ds, tables, cfg), cnn_train(ds, tables, cfg)
    first = next((e["epoch"] for e in a.log if e["train_acc"] == 1.0), None)
    labels, _ = cnn_predict(a.model, ds)
    acc = np.mean([l == t.label for l, t in zip(labels, ds)])
    same = [e["train_loss"] for e in a.log] == [e["train_loss"] for e in b.log] and dumps(a.model) == dumps(b.model)
    verdict("CNN capacity", first is not None and acc == 1.0 and same,
            f"20-example toy corpus, 100% train accuracy first at epoch {first} (<=200), "
            f"final {acc:.0%}, repeated seeded runs identical: {same}")


def test_rf_correctness():
    from xlirony.models.rf import RFParams, dumps, rf_predict, rf_train
    X, y = xor_set()
    xor = rf_train(X, y, RFParams(n_trees=50, max_depth=2), seed=0)
    xor_acc = np.mean(np.array(rf_predict(xor, X)[0]) == np.array(y))
    Xtr, ytr, Xte, yte = separable_set(0)
    sep = rf_train(Xtr, ytr, RFParams(n_trees=100), seed=1)
    sep_acc = np.mean(np.array(rf_predict(sep, Xte)[0]) == np.array(yte))
    identical = dumps(rf_train(Xtr, ytr, RFParams(n_trees=100), seed=1)) == dumps(sep)
    ok = depth2_trees_shatter_xor() and xor_acc == 1.0 and sep_acc >= 0.95 and identical
    verdict("RF correctness", ok,
            f"XOR x25 depth 2 train accuracy {xor_acc:.0%} (=100%), separable 500/200 test accuracy "
            f"{sep_acc:.1%} (>=95%), repeated serialization bit-identical: {identical}")


def test_metrics_oracle():
    from xlirony.eval import ConfusionMatrix, confusion, metrics
    m = metrics(ConfusionMatrix(50, 10, 20, 20))
    hand = all(abs(getattr(m, k) - v) <= 0.1 for k, v in METRICS_HAND.items())
    I, N = "ironic", "non_ironic"
    gold6 = [I] * 6 + [N] * 4
    bal = [I] * 5 + [N] * 5
    trivial = [
        confusion(gold6, gold6) == ConfusionMatrix(6, 0, 0, 4),
        confusion(bal, [I] * 10) == ConfusionMatrix(5, 5, 0, 0),
        set(metrics(ConfusionMatrix(6, 0, 0, 4)).as_dict().values()) == {100.0},
        metrics(ConfusionMatrix(5, 5, 0, 0)).as_dict() == pytest.approx(metrics_exact(5, 5, 0, 0), abs=1e-9),
        round(metrics(ConfusionMatrix(5, 5, 0, 0)).macro_f1, 1) == 33.3,
    ]
    try:
        confusion(bal, bal[:-1])
        trivial.append(False)
    except Exception:
        trivial.append(True)
    verdict("metrics oracle", hand and all(trivial),
            f"tp=50 fp=10 fn=20 tn=20 macro-F {m.macro_f1:.1f} (67.0+-0.1), per-class values within 0.1; "
            f"{sum(trivial)}/{len(trivial)} exact cases")


@pytest.fixture(scope="module")
def synthetic_run(tmp_path_factory):
    from xlirony.cli import main
    from xlirony.synthetic import make_world, write_world
    d = tmp_path_factory.mktemp("accept")
    matrix = write_world(make_world(seed=0), d / "world", families=("cnn_crosslingual",))
    t0 = time.perf_counter()
    code = main(["--quiet", "experiment", "run", "--matrix", str(matrix), "--out-dir", str(d / "run")])
    return d, code, time.perf_counter() - t0


def test_end_to_end_synthetic(synthetic_run):
    from xlirony.eval.report import load_results
    d, code, elapsed = synthetic_run
    results = load_results(d / "run") if code == 0 else []
    scores = {r[0].label: r[1].macro_f1 for r in results}
    n_files = len(list((d / "run" / "metrics").glob("*.json")))
    has_manifest = (d / "run" / "manifest.json").exists()
    ok = code == 0 and n_files == 8 and has_manifest and min(scores.values()) >= 70 and elapsed < 300
    detail = ", ".join(f"{k} {v:.1f}" for k, v in scores.items())
    verdict("end-to-end synthetic cross-lingual run", ok,
            f"align->map->train->test macro-F per row [{detail}], min {min(scores.values(), default=0):.1f} "
            f"(>=70, chance 50); {n_files} metric files + manifest; {elapsed:.1f}s (<300s)")


def test_reproducibility(synthetic_run):
    from xlirony.cli import main
    d, code, _ = synthetic_run
    assert code == 0
    again = d / "again"
    code2 = main(["--quiet", "experiment", "run", "--manifest", str(d / "run" / "manifest.json"),
                  "--out-dir", str(again)])
    compared = diffs = 0
    for sub in ("predictions", "metrics"):
        for p in sorted((d / "run" / sub).iterdir()):
            compared += 1
            diffs += p.read_bytes() != (again / sub / p.name).read_bytes()
    verdict("reproducibility", code2 == 0 and compared == 16 and diffs == 0,
            f"re-run from manifest: {compared} prediction/metric files compared, {diffs} differ (0)")


AR_CORPUS = os.environ.get("XLIRONY_AR_CORPUS")
AR_EMBEDDINGS = os.environ.get("XLIRONY_AR_EMBEDDINGS")


@pytest.mark.skipif(not AR_CORPUS, reason="set XLIRONY_AR_CORPUS to the public Arabic irony corpus (CSV)")
def test_arabic_corpus_counts():
    from xlirony.corpus import load_corpus, stats
    s = stats(load_corpus(AR_CORPUS, "ar"))
    verdict("Arabic corpus counts", (s.n_total, s.n_ironic, s.n_non_ironic) == (11225, 6005, 5220),
            f"n_total={s.n_total} (11225), ironic={s.n_ironic} (6005), non_ironic={s.n_non_ironic} (5220)")


@pytest.mark.slow
@pytest.mark.skipif(not (AR_CORPUS and AR_EMBEDDINGS),
                    reason="set XLIRONY_AR_CORPUS and XLIRONY_AR_EMBEDDINGS for the Arabic CNN check")
def test_arabic_monolingual_cnn():
    from xlirony.corpus import default_preprocess_config, load_corpus, preprocess_dataset, split
    from xlirony.embeddings import load_embeddings
    from xlirony.eval.experiment import ExperimentSpec, Resources, run_experiment
    ds = load_corpus(AR_CORPUS, "ar")
    s = split(ds, 10219, 1006, 42)
    cfg = default_preprocess_config()
    res = Resources({"ar": type(s)(preprocess_dataset(s.train, cfg), preprocess_dataset(s.test, cfg), 42)},
                    {"ar": load_embeddings(AR_EMBEDDINGS, lang="ar")})
    m = run_experiment(ExperimentSpec(("ar",), ("ar",), "cnn_mono"), res).metrics
    verdict("Arabic monolingual CNN", m.macro_f1 >= 70, f"macro-F {m.macro_f1:.1f} (>=70)")


if __name__ == "__main__":
    sys.exit(pytest.main([str(Path(__file__)), "-s", "-q"]))
