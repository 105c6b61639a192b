"""Labeled tweet corpora: loading, cleaning, splitting and label statistics.

Corpus files are UTF-8 CSV with the header ``id,lang,label,text``.
"""

import csv
import logging
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import yaml

from . import LABELS, LANGS
from .errors import CorpusError, EmptyAfterPreprocess

log = logging.getLogger(__name__)

HEADER = ("id", "lang", "label", "text")
MIXED = "mixed"


@dataclass(frozen=True)
class Tweet:
    id: str
    text: str
    lang: str
    label: str

    def __post_init__(self):
        if not self.text.strip():
            raise CorpusError(f"tweet {self.id!r}: empty text")
        if self.lang not in LANGS:
            raise CorpusError(f"tweet {self.id!r}: unknown language {self.lang!r}")
        if self.label not in LABELS:
            raise CorpusError(f"tweet {self.id!r}: unknown label {self.label!r}")

    @property
    def ironic(self) -> bool:
        return self.label == "ironic"


@dataclass(frozen=True)
class Dataset:
    tweets: tuple
    lang: str

    def __post_init__(self):
        object.__setattr__(self, "tweets", tuple(self.tweets))
        if self.lang != MIXED and self.lang not in LANGS:
            raise CorpusError(f"unknown dataset language {self.lang!r}")
        seen = set()
        for t in self.tweets:
            if self.lang != MIXED and t.lang != self.lang:
                raise CorpusError(f"tweet {t.id!r} has lang {t.lang!r} in a {self.lang!r} dataset")
            if t.id in seen:
                raise CorpusError(f"duplicate tweet id {t.id!r}")
            seen.add(t.id)

    def __len__(self):
        return len(self.tweets)

    def __iter__(self):
        return iter(self.tweets)

    @property
    def labels(self) -> list:
        return [t.label for t in self.tweets]

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(tuple(self.tweets[i] for i in indices), self.lang)


def concat(datasets: Sequence[Dataset]) -> Dataset:
    """Concatenate datasets in order; the result is ``mixed`` when languages differ."""
    langs = {d.lang for d in datasets}
    lang = langs.pop() if len(langs) == 1 else MIXED
    return Dataset(tuple(t for d in datasets for t in d), lang)


@dataclass(frozen=True)
class Split:
    train: Dataset
    test: Dataset
    seed: int


@dataclass(frozen=True)
class CorpusStats:
    n_ironic: int
    n_non_ironic: int
    n_total: int
    per_lang: dict = field(default_factory=dict)


def load_corpus(path, expected_lang: Optional[str] = None) -> Dataset:
    """Read a corpus CSV. With ``expected_lang=None`` the language is taken from the rows."""
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise CorpusError(f"{path}: cannot read corpus ({exc.strerror})") from exc
    tweets = []
    ids = {}
    with fh:
        try:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != HEADER:
                raise CorpusError(f"{path}: expected header {','.join(HEADER)}, got {header}")
            for row in reader:
                rowno = reader.line_num
                if not row:
                    continue
                if len(row) != 4:
                    raise CorpusError(f"{path}:{rowno}: expected 4 columns, got {len(row)}")
                tid, lang, label, text = row
                if lang not in LANGS:
                    raise CorpusError(f"{path}:{rowno}: unknown language {lang!r}")
                if expected_lang is not None and lang != expected_lang:
                    raise CorpusError(f"{path}:{rowno}: language {lang!r}, expected {expected_lang!r}")
                if label not in LABELS:
                    raise CorpusError(f"{path}:{rowno}: unknown label {label!r}")
                if tid in ids:
                    raise CorpusError(f"{path}:{rowno}: duplicate id {tid!r} (first at row {ids[tid]})")
                if not text.strip():
                    raise CorpusError(f"{path}:{rowno}: empty text")
                ids[tid] = rowno
                tweets.append(Tweet(tid, text, lang, label))
        except UnicodeDecodeError as exc:
            raise CorpusError(f"{path}: not valid UTF-8 ({exc.reason})") from exc
    if not tweets:
        raise CorpusError(f"{path}: empty corpus")
    if expected_lang is not None:
        lang = expected_lang
    else:
        langs = {t.lang for t in tweets}
        lang = langs.pop() if len(langs) == 1 else MIXED
    return Dataset(tuple(tweets), lang)


def save_corpus(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for t in ds:
            w.writerow((t.id, t.lang, t.label, t.text))


# --- preprocessing -----------------------------------------------------------

@dataclass(frozen=True)
class PreprocessConfig:
    irony_hashtags: Mapping[str, frozenset]
    strip_mentions: bool = True
    strip_urls: bool = True
    strip_foreign_chars: bool = True
    lowercase_latin: bool = True

    def __post_init__(self):
        tags = {}
        for lang, words in self.irony_hashtags.items():
            norm = frozenset(_norm_tag(w) for w in words)
            if not norm:
                raise CorpusError(f"irony hashtag set for {lang!r} is empty")
            tags[lang] = norm
        object.__setattr__(self, "irony_hashtags", tags)


def _norm_tag(tag: str) -> str:
    return tag.strip().lstrip("#").casefold()


DEFAULT_IRONY_HASHTAGS = {
    "ar": ("#سخرية", "#مسخرة", "#تهكم", "#استهزاء"),
    "fr": ("#ironie", "#sarcasme"),
    "en": ("#sarcasm", "#irony", "#sarcastic", "#ironic"),
}


def default_preprocess_config() -> PreprocessConfig:
    return PreprocessConfig(irony_hashtags=DEFAULT_IRONY_HASHTAGS)


def load_preprocess_config(path) -> PreprocessConfig:
    """Read a YAML preprocessing config.

    Schema::

        irony_hashtags:        # required, one non-empty list per language
          en: ["#sarcasm", "#irony"]
        strip_mentions: true   # optional flags, all default true
        strip_urls: true
        strip_foreign_chars: true
        lowercase_latin: true
    """
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise CorpusError(f"{path}: cannot read config ({exc.strerror})") from exc
    if not isinstance(raw, dict) or "irony_hashtags" not in raw:
        raise CorpusError(f"{path}: missing 'irony_hashtags'")
    unknown = set(raw) - {"irony_hashtags", "strip_mentions", "strip_urls",
                          "strip_foreign_chars", "lowercase_latin"}
    if unknown:
        raise CorpusError(f"{path}: unknown keys {sorted(unknown)}")
    flags = {k: bool(v) for k, v in raw.items() if k != "irony_hashtags"}
    return PreprocessConfig(irony_hashtags=raw["irony_hashtags"], **flags)


_URL = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION = re.compile(r"@\w+")
_HASHTAG = re.compile(r"#+(\w+)")
# western emoticons are never treated as foreign tokens
_EMOTICON = re.compile(r"^(?:[:;=8xX][-o^']?[()\[\]dDpP/\\|*oO3@<>$]+|[()\[\]dD/\\|<>]+[-o^']?[:;=8])$")


def is_arabic(ch: str) -> bool:
    cp = ord(ch)
    return (0x0600 <= cp <= 0x06FF or 0x0750 <= cp <= 0x077F or 0x08A0 <= cp <= 0x08FF
            or 0xFB50 <= cp <= 0xFDFF or 0xFE70 <= cp <= 0xFEFF)


def is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return (0x3040 <= cp <= 0x30FF or 0x3400 <= cp <= 0x4DBF or 0x4E00 <= cp <= 0x9FFF
            or 0xAC00 <= cp <= 0xD7AF or 0xF900 <= cp <= 0xFAFF)


def is_latin_letter(ch: str) -> bool:
    return ch.isalpha() and "LATIN" in unicodedata.name(ch, "")


def _foreign(token: str, lang: str) -> bool:
    if _EMOTICON.match(token):
        return False
    if lang == "ar":
        return any(is_latin_letter(c) for c in token)
    return any(is_arabic(c) or is_cjk(c) for c in token)


def _clean_once(text: str, lang: str, cfg: PreprocessConfig) -> str:
    if cfg.strip_urls:
        text = _URL.sub(" ", text)
    if cfg.strip_mentions:
        text = _MENTION.sub(" ", text)
    irony = cfg.irony_hashtags[lang]
    text = _HASHTAG.sub(lambda m: " " if m.group(1).casefold() in irony else m.group(1), text)
    tokens = text.split()
    if cfg.strip_foreign_chars:
        tokens = [t for t in tokens if not _foreign(t, lang)]
    return " ".join(tokens)


def clean_text(text: str, lang: str, cfg: PreprocessConfig) -> str:
    # Iterate to a fixed point: one pass can expose a new match (e.g. "@#x" -> "@x").
    # Every pass that changes the text shortens it, so this terminates.
    if lang not in cfg.irony_hashtags:
        raise CorpusError(f"preprocess config has no hashtag set for {lang!r}")
    prev = None
    while text != prev:
        prev, text = text, _clean_once(text, lang, cfg)
    return text


def preprocess(tweet: Tweet, cfg: PreprocessConfig) -> Tweet:
    """Remove URLs, mentions, irony hashtags and foreign-script tokens.

    Other hashtags keep their text without ``#``. Raises ``EmptyAfterPreprocess``
    when nothing is left.
    """
    text = clean_text(tweet.text, tweet.lang, cfg)
    if not text:
        raise EmptyAfterPreprocess(tweet.id)
    if text == tweet.text:
        return tweet
    return Tweet(tweet.id, text, tweet.lang, tweet.label)


def preprocess_dataset(ds: Dataset, cfg: PreprocessConfig) -> Dataset:
    kept, dropped = [], 0
    for t in ds:
        try:
            kept.append(preprocess(t, cfg))
        except EmptyAfterPreprocess:
            dropped += 1
    if dropped:
        log.warning("dropped %d tweet(s) empty after preprocessing", dropped)
    return Dataset(tuple(kept), ds.lang)


# --- splitting and statistics ------------------------------------------------

def split(ds: Dataset, n_train: int, n_test: int, seed: int) -> Split:
    """Shuffle uniformly with ``seed`` and cut a train prefix and the following test block."""
    if n_train < 0 or n_test < 0:
        raise CorpusError("split sizes must be non-negative")
    if n_train + n_test > len(ds):
        raise CorpusError(f"n_train + n_test = {n_train + n_test} exceeds dataset size {len(ds)}")
    order = np.random.default_rng(seed).permutation(len(ds))
    return Split(ds.subset(order[:n_train]), ds.subset(order[n_train:n_train + n_test]), seed)


def stratified_holdout(labels: Sequence[str], fraction: float, seed: int):
    """Indices (keep, held_out) with ``round(fraction * n)`` held out, preserving label ratios."""
    n = len(labels)
    n_hold = int(round(fraction * n))
    rng = np.random.default_rng(seed)
    by_label = {}
    for i, lab in enumerate(labels):
        by_label.setdefault(lab, []).append(i)
    held = []
    quotas = {lab: fraction * len(ix) for lab, ix in sorted(by_label.items())}
    base = {lab: int(np.floor(q)) for lab, q in quotas.items()}
    short = n_hold - sum(base.values())
    # largest remainders get the leftover slots
    for lab in sorted(quotas, key=lambda l: (-(quotas[l] - base[l]), l))[:max(short, 0)]:
        base[lab] += 1
    for lab in sorted(by_label):
        ix = np.array(by_label[lab])
        held.extend(rng.permutation(ix)[:base[lab]].tolist())
    held_set = set(held)
    keep = [i for i in range(n) if i not in held_set]
    return keep, sorted(held)


def random_holdout(n: int, fraction: float, seed: int):
    order = np.random.default_rng(seed).permutation(n)
    n_hold = int(round(fraction * n))
    return sorted(order[n_hold:].tolist()), sorted(order[:n_hold].tolist())


def stats(ds: Dataset) -> CorpusStats:
    counts = Counter((t.lang, t.label) for t in ds)
    per_lang = {}
    for lang in LANGS:
        i, ni = counts[(lang, "ironic")], counts[(lang, "non_ironic")]
        if i or ni:
            per_lang[lang] = {"ironic": i, "non_ironic": ni, "total": i + ni}
    n_i = sum(v["ironic"] for v in per_lang.values())
    n_ni = sum(v["non_ironic"] for v in per_lang.values())
    return CorpusStats(n_i, n_ni, n_i + n_ni, per_lang)
