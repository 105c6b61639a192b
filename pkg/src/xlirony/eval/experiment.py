"""Declarative train -> test experiments and the monolingual / cross-lingual matrices.

An ``ExperimentSpec`` names the training languages, the test languages and a
model family. ``run_experiment`` trains on the concatenated training splits,
holds out a validation fifth, and only then touches the test splits.
"""

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import multiprocessing as mp
import numpy as np

from .. import LANGS
from ..align import LinearMap, map_table
from ..corpus import Dataset, Split, concat, stratified_holdout
from ..embeddings import EmbeddingTable, normalize
from ..errors import ExperimentError
from ..features import CROSSLINGUAL_SLOTS, SLOTS, LexiconSet, bundled_lexicons, feature_matrix
from ..models import cnn as cnnmod
from ..models import rf as rfmod
from .metrics import ConfusionMatrix, Metrics, confusion, metrics

log = logging.getLogger(__name__)

FAMILIES = ("rf_surface", "rf_full", "cnn_mono", "cnn_crosslingual")
CROSSLINGUAL_FAMILIES = ("cnn_crosslingual", "rf_surface")
MONOLINGUAL_FAMILIES = ("rf_full", "cnn_mono")
VAL_FRACTION = 0.2

CROSSLINGUAL_ROWS = (
    (("ar",), ("fr",)),
    (("fr",), ("ar",)),
    (("ar",), ("en",)),
    (("en",), ("ar",)),
    (("fr",), ("en",)),
    (("en",), ("fr",)),
    (("en", "fr"), ("ar",)),
    (("ar",), ("en", "fr")),
)
MONOLINGUAL_LANGS = ("ar", "fr", "en")


def _side_label(langs: Sequence[str]) -> str:
    names = [l.capitalize() for l in langs]
    return names[0] if len(names) == 1 else "(" + "/".join(names) + ")"


@dataclass(frozen=True)
class ExperimentSpec:
    train_langs: tuple
    test_langs: tuple
    family: str
    seed: int = 42
    name: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "train_langs", tuple(self.train_langs))
        object.__setattr__(self, "test_langs", tuple(self.test_langs))
        if self.family not in FAMILIES:
            raise ExperimentError(f"unknown model family {self.family!r}")
        for l in self.train_langs + self.test_langs:
            if l not in LANGS:
                raise ExperimentError(f"unknown language {l!r}")
        if not self.train_langs or not self.test_langs:
            raise ExperimentError("an experiment needs training and test languages")
        if self.monolingual:
            if len(self.train_langs) != 1:
                raise ExperimentError("monolingual experiments train on exactly the test language")
            if self.family == "cnn_crosslingual":
                raise ExperimentError("cnn_crosslingual needs different train and test languages")
        elif self.family not in CROSSLINGUAL_FAMILIES:
            raise ExperimentError(
                f"cross-lingual experiments use {' or '.join(CROSSLINGUAL_FAMILIES)}, not {self.family!r}")
        if self.name is None:
            object.__setattr__(self, "name", self.label)

    @property
    def monolingual(self) -> bool:
        return self.train_langs == self.test_langs

    @property
    def label(self) -> str:
        return f"{_side_label(self.train_langs)}->{_side_label(self.test_langs)}"

    @property
    def slug(self) -> str:
        return f"{'+'.join(self.train_langs)}_to_{'+'.join(self.test_langs)}__{self.family}"

    def to_dict(self) -> dict:
        return {"name": self.name, "train": list(self.train_langs), "test": list(self.test_langs),
                "family": self.family, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: Mapping, seed: int = 42) -> "ExperimentSpec":
        try:
            return cls(tuple(d["train"]), tuple(d["test"]), d["family"], int(d.get("seed", seed)), d.get("name"))
        except KeyError as exc:
            raise ExperimentError(f"experiment entry lacks {exc}") from None


def crosslingual_matrix(families: Sequence[str] = CROSSLINGUAL_FAMILIES, seed: int = 42) -> list:
    """The eight cross-lingual train -> test rows, each for every requested family."""
    return [ExperimentSpec(tr, te, fam, seed) for tr, te in CROSSLINGUAL_ROWS for fam in families]


def monolingual_matrix(families: Sequence[str] = MONOLINGUAL_FAMILIES, seed: int = 42) -> list:
    return [ExperimentSpec((l,), (l,), fam, seed) for l in MONOLINGUAL_LANGS for fam in families]


@dataclass
class Resources:
    splits: Mapping[str, Split]
    tables: Mapping[str, EmbeddingTable] = field(default_factory=dict)
    maps: Mapping[tuple, LinearMap] = field(default_factory=dict)
    lexicons: Mapping[str, LexiconSet] = field(default_factory=dict)
    cnn_config: cnnmod.TrainConfig = field(default_factory=cnnmod.TrainConfig)
    rf_params: rfmod.RFParams = field(default_factory=rfmod.RFParams)

    def lexicon(self, lang: str) -> LexiconSet:
        return self.lexicons[lang] if lang in self.lexicons else bundled_lexicons(lang)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    confusion: ConfusionMatrix
    metrics: Metrics
    predictions: list  # (id, gold, pred, p_ironic)
    log: dict


def _train_set(spec: ExperimentSpec, res: Resources) -> Dataset:
    missing = [l for l in spec.train_langs if l not in res.splits]
    if missing:
        raise ExperimentError(f"{spec.name}: no corpus for training language(s) {missing}")
    train = concat([res.splits[l].train for l in spec.train_langs])
    if len(train) == 0:
        raise ExperimentError(f"{spec.name}: empty training set")
    return train


def _test_set(spec: ExperimentSpec, res: Resources, lang: str) -> Dataset:
    if lang not in res.splits:
        raise ExperimentError(f"{spec.name}: no corpus for test language {lang!r}")
    return res.splits[lang].test


def _run_rf(spec: ExperimentSpec, res: Resources):
    slots = SLOTS if spec.family == "rf_full" else CROSSLINGUAL_SLOTS
    train = _train_set(spec, res)
    lex = {l: res.lexicon(l) for l in set(spec.train_langs) | set(spec.test_langs)}
    keep, held = stratified_holdout(train.labels, VAL_FRACTION, spec.seed)
    X = feature_matrix(train, lex, slots)
    y = train.labels
    model = rfmod.rf_train(X[keep], [y[i] for i in keep], res.rf_params, spec.seed, slots)
    run_log = {"n_train": len(keep), "n_val": len(held), "slots": list(slots)}
    if held:
        vpred, _ = rfmod.rf_predict(model, X[held], slots)
        run_log["val_macro_f1"] = metrics(confusion([y[i] for i in held], vpred)).macro_f1
    preds = []
    for lang in spec.test_langs:
        test = _test_set(spec, res, lang)
        if len(test) == 0:
            continue
        labels, proba = rfmod.rf_predict(model, feature_matrix(test, lex, slots), slots)
        p_ironic = proba[:, model.classes.index("ironic")]
        preds.extend((t.id, t.label, p, float(q)) for t, p, q in zip(test, labels, p_ironic))
    return preds, run_log


def _spaces(spec: ExperimentSpec, res: Resources):
    """(test language, embedding tables keyed by language) per trained model."""
    for l in set(spec.train_langs) | set(spec.test_langs):
        if l not in res.tables:
            raise ExperimentError(f"{spec.name}: no embeddings for {l!r}")
    if spec.family == "cnn_mono":
        lang = spec.test_langs[0]
        yield lang, {lang: res.tables[lang]}
        return
    for tgt in spec.test_langs:
        tables = {tgt: normalize(res.tables[tgt])}
        for src in spec.train_langs:
            m = res.maps.get((src, tgt))
            if m is None:
                raise ExperimentError(f"{spec.name}: no alignment map {src}->{tgt}")
            tables[src] = map_table(normalize(res.tables[src]), m)
        yield tgt, tables


def _run_cnn(spec: ExperimentSpec, res: Resources):
    train = _train_set(spec, res)
    cfg = replace(res.cnn_config, seed=spec.seed, val_fraction=VAL_FRACTION)
    preds, run_log = [], {"models": []}
    for lang, tables in _spaces(spec, res):
        out = cnnmod.cnn_train(train, tables, cfg)
        run_log["models"].append({"test_lang": lang, "best_epoch": out.best_epoch,
                                  "best_val_macro_f1": out.best_val_macro_f1, "epochs": out.log})
        test = _test_set(spec, res, lang)
        if len(test) == 0:
            continue
        labels, p_ironic = cnnmod.cnn_predict(out.model, test)
        preds.extend((t.id, t.label, p, float(q)) for t, p, q in zip(test, labels, p_ironic))
    return preds, run_log


def run_experiment(spec: ExperimentSpec, res: Resources) -> ExperimentResult:
    """Train, then predict the untouched test split(s) and score them as one pooled set."""
    runner = _run_rf if spec.family.startswith("rf") else _run_cnn
    preds, run_log = runner(spec, res)
    if not preds:
        raise ExperimentError(f"{spec.name}: empty test set")
    cm = confusion([p[1] for p in preds], [p[2] for p in preds])
    return ExperimentResult(spec, cm, metrics(cm), preds, run_log)


# --- persistence -------------------------------------------------------------

def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def predictions_csv(preds: Sequence) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("id", "gold", "pred", "p_ironic"))
    for tid, gold, pred, p in preds:
        w.writerow((tid, gold, pred, "%.17g" % p))
    return buf.getvalue()


def write_result(result: ExperimentResult, out_dir) -> dict:
    """Write predictions, metrics and training log; returns the written paths."""
    out = Path(out_dir)
    for sub in ("predictions", "metrics", "logs"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    slug = result.spec.slug
    paths = {"predictions": out / "predictions" / f"{slug}.csv",
             "metrics": out / "metrics" / f"{slug}.json",
             "log": out / "logs" / f"{slug}.json"}
    paths["predictions"].write_text(predictions_csv(result.predictions), encoding="utf-8")
    _dump_json({"spec": result.spec.to_dict(), "label": result.spec.label,
                "confusion": asdict(result.confusion), "metrics": result.metrics.as_dict()},
               paths["metrics"])
    _dump_json(result.log, paths["log"])
    return paths


_WORKER_RES: Optional[Resources] = None


def _worker(spec: ExperimentSpec) -> ExperimentResult:
    return run_experiment(spec, _WORKER_RES)


def run_matrix(specs: Sequence[ExperimentSpec], res: Resources, out_dir, jobs: int = 1) -> list:
    """Run every spec (in parallel when ``jobs > 1``) and write their artifacts."""
    slugs = [s.slug for s in specs]
    if len(set(slugs)) != len(slugs):
        raise ExperimentError("experiment matrix contains duplicate specs")
    if jobs > 1 and len(specs) > 1:
        global _WORKER_RES
        _WORKER_RES = res
        try:
            ctx = mp.get_context("fork")
            with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
                results = list(pool.map(_worker, specs))
        finally:
            _WORKER_RES = None
    else:
        results = [run_experiment(s, res) for s in specs]
    for r in results:
        write_result(r, out_dir)
        log.info("%s [%s]: macro-F %.1f", r.spec.label, r.spec.family, r.metrics.macro_f1)
    return results
