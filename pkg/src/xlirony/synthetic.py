"""Synthetic three-language irony corpora built from one shared latent space.

Every language sees the same latent concept vectors through its own random
orthogonal rotation, so the true source -> target map is known. Ironic and
non-ironic tweets draw marker words from different concept groups and differ
in punctuation and emoticon habits, giving both model families a signal that
survives translation.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import LANGS
from .align import BilingualDictionary
from .corpus import Dataset, Tweet, save_corpus
from .embeddings import EmbeddingTable, save_embeddings

AR_LETTERS = "بتثجحخدذرزسشصضطظعغفقكلمنهوي"
LATIN = "bcdfghjklmnpqrstvwxz"
VOWELS = "aeiou"


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    return q * np.sign(np.diag(r))


def concept_word(lang: str, i: int) -> str:
    """A pronounceable, script-appropriate word for concept ``i``."""
    if lang == "ar":
        a, b = divmod(i, len(AR_LETTERS))
        return "ال" + AR_LETTERS[a % len(AR_LETTERS)] + AR_LETTERS[b] + "ا" + AR_LETTERS[(a + b) % len(AR_LETTERS)]
    a, b = divmod(i, len(LATIN))
    stem = LATIN[a % len(LATIN)] + VOWELS[b % 5] + LATIN[b] + VOWELS[a % 5]
    return ("le" if lang == "fr" else "the") + stem


@dataclass
class SyntheticWorld:
    latent: np.ndarray           # (n_concepts, dim)
    rotations: dict              # lang -> (dim, dim) orthogonal
    tables: dict                 # lang -> EmbeddingTable
    corpora: dict                # lang -> Dataset
    dictionaries: dict           # (src, tgt) -> BilingualDictionary
    groups: dict                 # "ironic" / "non_ironic" / "neutral" -> concept indices

    def true_map(self, src: str, tgt: str) -> np.ndarray:
        return self.rotations[tgt] @ self.rotations[src].T


def make_world(n_tweets: int = 600, dim: int = 20, n_concepts: int = 80, seed: int = 0,
               marker_rate: float = 0.4, marker_purity: float = 0.9, noise: float = 0.02,
               langs=LANGS) -> SyntheticWorld:
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(n_concepts, dim))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    quarter = n_concepts // 4
    groups = {"ironic": np.arange(quarter), "non_ironic": np.arange(quarter, 2 * quarter),
              "neutral": np.arange(2 * quarter, n_concepts)}
    rotations, tables, corpora = {}, {}, {}
    for lang in langs:
        Q = random_orthogonal(dim, rng)
        rotations[lang] = Q
        vecs = Z @ Q.T + noise * rng.normal(size=Z.shape)
        tables[lang] = EmbeddingTable(tuple(concept_word(lang, i) for i in range(n_concepts)), vecs, lang=lang)
        corpora[lang] = _tweets(lang, n_tweets, groups, marker_rate, marker_purity, rng)
    dictionaries = {}
    for s in langs:
        for t in langs:
            if s != t:
                dictionaries[(s, t)] = BilingualDictionary(
                    tuple((concept_word(s, i), concept_word(t, i)) for i in range(n_concepts)))
    return SyntheticWorld(Z, rotations, tables, corpora, dictionaries, groups)


def _tweets(lang, n, groups, rate, purity, rng) -> Dataset:
    tweets = []
    for k in range(n):
        ironic = bool(rng.random() < 0.5)
        own, other = ("ironic", "non_ironic") if ironic else ("non_ironic", "ironic")
        words = []
        for _ in range(int(rng.integers(6, 13))):
            u = rng.random()
            if u < rate:
                g = own if rng.random() < purity else other
                words.append(concept_word(lang, int(rng.choice(groups[g]))))
            else:
                words.append(concept_word(lang, int(rng.choice(groups["neutral"]))))
        if ironic:
            tail = rng.choice(["!!", "?!", " :)", "!", "."], p=[0.35, 0.2, 0.2, 0.15, 0.1])
        else:
            tail = rng.choice(["!!", "?!", " :)", "!", "."], p=[0.05, 0.05, 0.05, 0.15, 0.7])
        text = " ".join(words) + tail
        tweets.append(Tweet(f"{lang}{k:05d}", text, lang, "ironic" if ironic else "non_ironic"))
    return Dataset(tuple(tweets), lang)


def write_world(world: SyntheticWorld, out_dir, n_test: int = 150, cnn: dict = None,
                families=("cnn_crosslingual", "rf_surface"), seed: int = 42) -> Path:
    """Write corpora, embeddings, dictionaries and a cross-lingual matrix file; returns the matrix path."""
    out = Path(out_dir)
    for sub in ("corpora", "embeddings", "dictionaries"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    corpora = {}
    for lang, ds in world.corpora.items():
        save_corpus(ds, out / "corpora" / f"{lang}.csv")
        save_embeddings(world.tables[lang], out / "embeddings" / f"{lang}.vec")
        corpora[lang] = {"path": f"corpora/{lang}.csv", "n_train": len(ds) - n_test, "n_test": n_test}
    dicts = {}
    for (s, t), d in world.dictionaries.items():
        p = out / "dictionaries" / f"{s}-{t}.tsv"
        p.write_text("".join(f"{a}\t{b}\n" for a, b in d.pairs), encoding="utf-8")
        dicts[f"{s}-{t}"] = f"dictionaries/{s}-{t}.tsv"
    matrix = {
        "seed": seed,
        "corpora": corpora,
        "embeddings": {l: f"embeddings/{l}.vec" for l in world.tables},
        "dictionaries": dicts,
        "cnn": cnn if cnn is not None else SYNTHETIC_CNN,
        "rf": {"n_trees": 50},
        "generate": [{"matrix": "crosslingual", "families": list(families)}],
    }
    path = out / "matrix.yaml"
    path.write_text(yaml.safe_dump(matrix, sort_keys=True, allow_unicode=True), encoding="utf-8")
    return path


# small and fast; the learning rate is kept low because fine-tuning moves the
# training-language rows away from the test rows, which never receive gradient
SYNTHETIC_CNN = {"epochs": 20, "n_filters": 32, "widths": [1, 2, 3], "max_seq_len": 16,
                 "batch_size": 32, "learning_rate": 0.002, "dropout_rate": 0.5, "early_stop_patience": 5}
