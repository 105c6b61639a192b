"""Experiment-matrix files (YAML) and their resolution into specs and resources.

Schema (relative paths are resolved against the matrix file's directory)::

    seed: 42
    corpora:
      ar: {train: ar_train.csv, test: ar_test.csv}        # already split
      fr: {path: fr.csv, n_train: 5843, n_test: 1464}     # split here with `seed`
    preprocess: true              # or a path to a preprocess config; false skips cleaning
    embeddings: {ar: ar.vec, fr: fr.vec, en: en.vec}
    max_vocab: 50000              # optional load cap per embedding file
    maps: {ar-fr: maps/ar-fr.tsv}                 # precomputed src-tgt maps, or
    dictionaries: {ar-fr: dicts/ar-fr.tsv}        # fit missing maps from dictionaries
    refine_rounds: 0
    lexicons: lexicons/           # optional; bundled lists otherwise
    cnn: {epochs: 30, n_filters: 100}             # TrainConfig overrides
    rf: {n_trees: 200}                            # RFParams overrides
    experiments:
      - {train: [ar], test: [fr], family: cnn_crosslingual}
    generate:                     # shorthand for the standard matrices
      - {matrix: crosslingual, families: [cnn_crosslingual, rf_surface]}
"""

import copy
import logging
from pathlib import Path
from typing import Mapping

import yaml

from .. import LANGS
from ..align import fit_procrustes, load_dictionary, load_map, refine
from ..corpus import (Split, default_preprocess_config, load_corpus, load_preprocess_config,
                      preprocess_dataset, split)
from ..embeddings import load_embeddings, normalize
from ..errors import ExperimentError
from ..features import load_lexicons
from ..models.cnn import TrainConfig
from ..models.rf import RFParams
from .experiment import ExperimentSpec, Resources, monolingual_matrix, crosslingual_matrix

log = logging.getLogger(__name__)

KNOWN_KEYS = {"seed", "corpora", "preprocess", "embeddings", "max_vocab", "maps", "dictionaries",
              "refine_rounds", "lexicons", "cnn", "rf", "experiments", "generate"}


def read_matrix(path) -> dict:
    """Load a matrix file and make every path in it absolute."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except OSError as exc:
        raise ExperimentError(f"{path}: cannot read matrix ({exc.strerror})") from exc
    except yaml.YAMLError as exc:
        raise ExperimentError(f"{path}: invalid YAML ({exc})") from exc
    if not isinstance(raw, dict):
        raise ExperimentError(f"{path}: matrix must be a mapping")
    return resolve_paths(raw, path.parent.resolve())


def resolve_paths(cfg: dict, base: Path) -> dict:
    cfg = copy.deepcopy(cfg)
    unknown = set(cfg) - KNOWN_KEYS
    if unknown:
        raise ExperimentError(f"unknown matrix keys {sorted(unknown)}")

    def absolute(p):
        return str((base / p).resolve()) if p is not None else None

    for lang, entry in (cfg.get("corpora") or {}).items():
        if isinstance(entry, str):
            cfg["corpora"][lang] = {"path": absolute(entry)}
        else:
            for k in ("train", "test", "path"):
                if k in entry:
                    entry[k] = absolute(entry[k])
    for key in ("embeddings", "maps", "dictionaries"):
        for k, v in (cfg.get(key) or {}).items():
            cfg[key][k] = absolute(v)
    if isinstance(cfg.get("preprocess"), str):
        cfg["preprocess"] = absolute(cfg["preprocess"])
    if cfg.get("lexicons"):
        cfg["lexicons"] = absolute(cfg["lexicons"])
    return cfg


def input_files(cfg: dict) -> list:
    files = []
    for entry in (cfg.get("corpora") or {}).values():
        files += [entry[k] for k in ("train", "test", "path") if k in entry]
    for key in ("embeddings", "maps", "dictionaries"):
        files += list((cfg.get(key) or {}).values())
    if isinstance(cfg.get("preprocess"), str):
        files.append(cfg["preprocess"])
    return sorted(files)


def _pair(key: str):
    try:
        src, tgt = key.split("-")
    except ValueError:
        raise ExperimentError(f"language-pair key {key!r} must look like 'ar-fr'") from None
    if src not in LANGS or tgt not in LANGS:
        raise ExperimentError(f"unknown language in pair {key!r}")
    return src, tgt


def build_specs(cfg: dict) -> list:
    seed = int(cfg.get("seed", 42))
    specs = [ExperimentSpec.from_dict(e, seed) for e in cfg.get("experiments") or []]
    for g in cfg.get("generate") or []:
        kind = g.get("matrix")
        if kind == "crosslingual":
            specs += crosslingual_matrix(g.get("families", ("cnn_crosslingual", "rf_surface")), seed)
        elif kind == "monolingual":
            specs += monolingual_matrix(g.get("families", ("rf_full", "cnn_mono")), seed)
        else:
            raise ExperimentError(f"generate: unknown matrix {kind!r} (use crosslingual or monolingual)")
    if not specs:
        raise ExperimentError("matrix defines no experiments")
    return specs


def build_resources(cfg: dict, specs) -> Resources:
    seed = int(cfg.get("seed", 42))
    needed = sorted({l for s in specs for l in s.train_langs + s.test_langs})
    pp = cfg.get("preprocess", True)
    pcfg = None
    if pp is True:
        pcfg = default_preprocess_config()
    elif isinstance(pp, str):
        pcfg = load_preprocess_config(pp)

    def prep(ds):
        return preprocess_dataset(ds, pcfg) if pcfg is not None else ds

    corpora = cfg.get("corpora") or {}
    splits = {}
    for lang in needed:
        entry = corpora.get(lang)
        if entry is None:
            raise ExperimentError(f"no corpus configured for {lang!r}")
        if "train" in entry:
            splits[lang] = Split(prep(load_corpus(entry["train"], lang)),
                                 prep(load_corpus(entry["test"], lang)), seed)
        else:
            ds = load_corpus(entry["path"], lang)
            if "n_train" in entry:
                s = split(ds, int(entry["n_train"]), int(entry["n_test"]), seed)
            else:
                n_test = round(len(ds) * float(entry.get("test_fraction", 0.1)))
                s = split(ds, len(ds) - n_test, n_test, seed)
            # split sizes follow the raw corpus; cleaning may then drop empty tweets
            splits[lang] = Split(prep(s.train), prep(s.test), seed)

    uses_cnn = any(s.family.startswith("cnn") for s in specs)
    tables = {}
    if uses_cnn:
        emb = cfg.get("embeddings") or {}
        for lang in needed:
            if lang not in emb:
                raise ExperimentError(f"no embeddings configured for {lang!r}")
            tables[lang] = load_embeddings(emb[lang], cfg.get("max_vocab"), lang=lang)

    maps = {}
    for key, p in (cfg.get("maps") or {}).items():
        src, tgt = _pair(key)
        maps[(src, tgt)] = load_map(p, src, tgt)
    rounds = int(cfg.get("refine_rounds", 0))
    needed_pairs = {(s_, t_) for s in specs if s.family == "cnn_crosslingual"
                    for s_ in s.train_langs for t_ in s.test_langs}
    for key, p in (cfg.get("dictionaries") or {}).items():
        pair = _pair(key)
        if pair in maps or pair not in needed_pairs:
            continue
        src, tgt = normalize(tables[pair[0]]), normalize(tables[pair[1]])
        m = fit_procrustes(src, tgt, load_dictionary(p), *pair)
        if rounds:
            m, _ = refine(src, tgt, m, rounds)
        maps[pair] = m

    lexicons = {}
    if cfg.get("lexicons"):
        lexicons = {l: load_lexicons(cfg["lexicons"], l) for l in needed}
    try:
        cnn_cfg = TrainConfig.from_dict({**(cfg.get("cnn") or {}), "seed": seed})
        rf_params = RFParams(**(cfg.get("rf") or {}))
    except TypeError as exc:
        raise ExperimentError(f"bad model options: {exc}") from exc
    return Resources(splits, tables, maps, lexicons, cnn_cfg, rf_params)


def load(cfg: Mapping):
    """(specs, resources) for a resolved matrix config."""
    specs = build_specs(dict(cfg))
    return specs, build_resources(dict(cfg), specs)
