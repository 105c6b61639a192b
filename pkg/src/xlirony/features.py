"""Tokenization and surface/lexicon feature extraction.

Feature vectors have a fixed, versioned slot order (``SLOTS``). Models persist
the slot names they were trained on so a reordered vector is caught at load.
"""

import logging
import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from . import LANGS
from .errors import IronyError

log = logging.getLogger(__name__)

FEATURE_VERSION = 1

SURFACE_SLOTS = (
    "exclamation_count",
    "question_count",
    "ellipsis_count",
    "other_punct_count",
    "quotation_count",
    "pos_emoticon_count",
    "neg_emoticon_count",
    "personal_pronoun_count",
    "interjection_count",
    "length_tokens",
    "length_chars",
    "named_entity_count",
)
LEXICON_SLOTS = (
    "negation_count",
    "opinion_pos_count",
    "opinion_neg_count",
    "opposition_count",
)
SLOTS = SURFACE_SLOTS + LEXICON_SLOTS
# Slots a classifier sees in cross-lingual mode: the capitalization heuristic is
# always 0 for Arabic and would leak the language, so it is dropped.
CROSSLINGUAL_SLOTS = tuple(s for s in SURFACE_SLOTS if s != "named_entity_count")

LATIN_LANGS = ("fr", "en")

CATEGORY_FILES = {
    "negation_words": "negation.txt",
    "opinion_positive": "opinion_pos.txt",
    "opinion_negative": "opinion_neg.txt",
    "opposition_words": "opposition.txt",
    "personal_pronouns": "pronouns.txt",
    "interjections": "interjections.txt",
    "emoticons_positive": "emoticons_pos.txt",
    "emoticons_negative": "emoticons_neg.txt",
}


class Token(NamedTuple):
    text: str
    kind: str  # word | punctuation | emoticon | hashtag_residue | number


@dataclass(frozen=True)
class TokenList:
    tokens: tuple

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    @property
    def texts(self) -> list:
        return [t.text for t in self.tokens]

    @property
    def kinds(self) -> list:
        return [t.kind for t in self.tokens]


@dataclass(frozen=True)
class LexiconSet:
    lang: str
    negation_words: frozenset = frozenset()
    opinion_positive: frozenset = frozenset()
    opinion_negative: frozenset = frozenset()
    opposition_words: frozenset = frozenset()
    personal_pronouns: frozenset = frozenset()
    interjections: frozenset = frozenset()
    emoticons_positive: frozenset = frozenset()
    emoticons_negative: frozenset = frozenset()

    def __post_init__(self):
        for name in CATEGORY_FILES:
            words = getattr(self, name)
            if name.startswith("emoticons"):
                words = frozenset(words)
            else:
                words = frozenset(normalize_word(w, self.lang) for w in words)
            object.__setattr__(self, name, words)

    @property
    def emoticons(self) -> frozenset:
        return self.emoticons_positive | self.emoticons_negative


@dataclass(frozen=True)
class FeatureVector:
    values: tuple
    surface_only: bool
    slots: tuple = SLOTS

    def __getitem__(self, name: str):
        return self.values[self.slots.index(name)]

    def as_dict(self) -> dict:
        return dict(zip(self.slots, self.values))

    def select(self, slots: Sequence[str]) -> np.ndarray:
        idx = [self.slots.index(s) for s in slots]
        return np.array([self.values[i] for i in idx], dtype=float)


def normalize_word(word: str, lang: str) -> str:
    return word.lower() if lang in LATIN_LANGS else word


# --- tokenization ------------------------------------------------------------

def _is_emoji(ch: str) -> bool:
    cp = ord(ch)
    return (0x1F000 <= cp <= 0x1FAFF or 0x2600 <= cp <= 0x27BF
            or 0x2B00 <= cp <= 0x2BFF or cp in (0x2764, 0x2639, 0x263A))


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS" and not _is_emoji(ch)


_NUMBER = re.compile(r"[+-]?\d+(?:[.,:]\d+)*%?")
_VARIATION = "️‍"


@lru_cache(maxsize=None)
def _default_emoticons() -> frozenset:
    out = set()
    for lang in LANGS:
        lex = bundled_lexicons(lang)
        out |= lex.emoticons
    return frozenset(out)


def tokenize(text: str, lang: str, emoticons: Optional[Iterable[str]] = None) -> TokenList:
    """Split ``text`` into typed tokens.

    Whitespace separates chunks. Known emoticons are matched before punctuation is
    split off, so ``":)"`` stays a single token. Leading and trailing punctuation
    runs become one punctuation token each; ``#`` directly before a word marks a
    hashtag residue.
    """
    if not text or not text.strip():
        raise ValueError("tokenize: empty text")
    emo = _default_emoticons() if emoticons is None else frozenset(emoticons)
    ascii_emo = sorted((e for e in emo if len(e) >= 2), key=len, reverse=True)
    out = []
    for chunk in text.split():
        chunk = chunk.strip(_VARIATION)
        if not chunk:
            continue
        if chunk in emo:
            out.append(Token(chunk, "emoticon"))
            continue
        piece = []
        for ch in chunk:
            if _is_emoji(ch) or ch in emo:
                if piece:
                    _tokenize_piece("".join(piece), ascii_emo, out)
                    piece = []
                out.append(Token(ch, "emoticon"))
            elif ch not in _VARIATION:
                piece.append(ch)
        if piece:
            _tokenize_piece("".join(piece), ascii_emo, out)
    return TokenList(tuple(out))


def _tokenize_piece(piece: str, ascii_emo: Sequence[str], out: list) -> None:
    if piece in ascii_emo:
        out.append(Token(piece, "emoticon"))
        return
    # emoticon glued to the end or start of a word: "nice:)" / "(:nice"
    for e in ascii_emo:
        if (len(piece) > len(e) and not e[0].isalnum() and piece.endswith(e)
                and piece[-len(e) - 1].isalnum()):
            _tokenize_piece(piece[:-len(e)], ascii_emo, out)
            out.append(Token(e, "emoticon"))
            return
        if (len(piece) > len(e) and not e[-1].isalnum() and piece.startswith(e)
                and piece[len(e)].isalnum()):
            out.append(Token(e, "emoticon"))
            _tokenize_piece(piece[len(e):], ascii_emo, out)
            return
    i, j = 0, len(piece)
    while i < j and _is_punct(piece[i]):
        i += 1
    if i == j:
        out.append(Token(piece, "punctuation"))
        return
    while j > i and _is_punct(piece[j - 1]):
        j -= 1
    lead, core, trail = piece[:i], piece[i:j], piece[j:]
    hashtag = lead.endswith("#")
    if hashtag:
        lead = lead.rstrip("#")
    if lead:
        out.append(Token(lead, "punctuation"))
    if hashtag:
        out.append(Token(core, "hashtag_residue"))
    elif _NUMBER.fullmatch(core):
        out.append(Token(core, "number"))
    else:
        out.append(Token(core, "word"))
    if trail:
        out.append(Token(trail, "punctuation"))


# --- lexicons ----------------------------------------------------------------

def _read_wordlist(path: Path) -> set:
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}


def load_lexicons(directory, lang: str) -> LexiconSet:
    """Load the eight category word lists for ``lang``.

    ``directory`` may be the lexicon root (containing ``<lang>/``) or the
    language directory itself. A missing category file yields an empty set and
    a warning.
    """
    if lang not in LANGS:
        raise IronyError(f"unknown language {lang!r}")
    root = Path(directory)
    d = root / lang if (root / lang).is_dir() else root
    if not d.is_dir():
        raise IronyError(f"{directory}: lexicon directory not found")
    sets = {}
    for name, fname in CATEGORY_FILES.items():
        p = d / fname
        if not p.exists():
            log.warning("lexicon %s missing for %s; using an empty set", fname, lang)
            sets[name] = frozenset()
            continue
        try:
            sets[name] = frozenset(_read_wordlist(p))
        except (OSError, UnicodeDecodeError) as exc:
            raise IronyError(f"{p}: cannot read lexicon ({exc})") from exc
    return LexiconSet(lang=lang, **sets)


@lru_cache(maxsize=None)
def bundled_lexicons(lang: str) -> LexiconSet:
    root = resources.files("xlirony") / "data" / "lexicons"
    with resources.as_file(root) as path:
        return load_lexicons(path, lang)


def bundled_lexicon_dir() -> Path:
    return Path(str(resources.files("xlirony") / "data" / "lexicons"))


# --- extraction --------------------------------------------------------------

_QUOTE_PAIRS = {"«": "»", "“": "”", "‘": "’", "„": "“"}
_QUOTE_CLOSE = {v: k for k, v in _QUOTE_PAIRS.items()}
_QUOTE_TOGGLE = {'"', "'"}
_EXCLAIM = {"!", "¡"}
_QUESTION = {"?", "¿", "؟"}
_ELLIPSIS = re.compile(r"\.{3,}|…")
_SENTENCE_END = set(".!?؟…")


def _punct_counts(tokens: Sequence[Token]) -> dict:
    excl = quest = ellip = other = quotes = 0
    open_stack = []  # (char, position) of unmatched opening quotes
    toggles = {}
    unmatched = 0
    for tok in tokens:
        if tok.kind != "punctuation":
            continue
        text = tok.text
        ellip += len(_ELLIPSIS.findall(text))
        rest = _ELLIPSIS.sub("", text)
        for ch in rest:
            if ch in _EXCLAIM:
                excl += 1
            elif ch in _QUESTION:
                quest += 1
            elif ch in _QUOTE_TOGGLE:
                if toggles.get(ch):
                    toggles[ch] = False
                    quotes += 1
                else:
                    toggles[ch] = True
            elif ch in _QUOTE_PAIRS and not (ch == "“" and open_stack and open_stack[-1] == "„"):
                open_stack.append(ch)
            elif ch in _QUOTE_CLOSE:
                if open_stack and _QUOTE_PAIRS[open_stack[-1]] == ch:
                    open_stack.pop()
                    quotes += 1
                else:
                    unmatched += 1
            else:
                other += 1
    unmatched += len(open_stack) + sum(1 for v in toggles.values() if v)
    return {
        "exclamation_count": excl,
        "question_count": quest,
        "ellipsis_count": ellip,
        "other_punct_count": other + unmatched,
        "quotation_count": quotes,
    }


def _named_entities(tokens: Sequence[Token], lang: str, lex: LexiconSet) -> int:
    if lang not in LATIN_LANGS:
        return 0
    count = 0
    initial = True
    for tok in tokens:
        if tok.kind == "punctuation":
            if any(c in _SENTENCE_END for c in tok.text):
                initial = True
            continue
        if tok.kind != "word":
            continue
        w = tok.text
        if (not initial and w[0].isupper()
                and normalize_word(w, lang) not in lex.personal_pronouns
                and normalize_word(w, lang) not in lex.interjections):
            count += 1
        initial = False
    return count


def _words(tokens: Sequence[Token], lang: str) -> list:
    return [normalize_word(t.text, lang) for t in tokens if t.kind in ("word", "hashtag_residue")]


def _surface(text: str, lang: str, lex: LexiconSet, tokens: TokenList) -> dict:
    words = _words(tokens, lang)
    emos = [t.text for t in tokens if t.kind == "emoticon"]
    feats = _punct_counts(tokens)
    feats.update(
        pos_emoticon_count=sum(e in lex.emoticons_positive for e in emos),
        neg_emoticon_count=sum(e in lex.emoticons_negative for e in emos),
        personal_pronoun_count=sum(w in lex.personal_pronouns for w in words),
        interjection_count=sum(w in lex.interjections for w in words),
        length_tokens=len(tokens),
        length_chars=len(text),
        named_entity_count=_named_entities(tokens, lang, lex),
    )
    return feats


def _check_lang(tweet, lex: LexiconSet):
    if tweet.lang != lex.lang:
        raise IronyError(f"lexicon language {lex.lang!r} does not match tweet language {tweet.lang!r}")


def extract_surface(tweet, lex: LexiconSet) -> FeatureVector:
    """Language-independent slots only; lexicon slots stay 0."""
    _check_lang(tweet, lex)
    text = tweet.text.strip()
    tokens = tokenize(text, tweet.lang, lex.emoticons or None)
    feats = _surface(text, tweet.lang, lex, tokens)
    return FeatureVector(tuple(feats.get(s, 0) for s in SLOTS), surface_only=True)


def extract_full(tweet, lex: LexiconSet) -> FeatureVector:
    _check_lang(tweet, lex)
    text = tweet.text.strip()
    tokens = tokenize(text, tweet.lang, lex.emoticons or None)
    feats = _surface(text, tweet.lang, lex, tokens)
    words = _words(tokens, tweet.lang)
    feats.update(
        negation_count=sum(w in lex.negation_words for w in words),
        opinion_pos_count=sum(w in lex.opinion_positive for w in words),
        opinion_neg_count=sum(w in lex.opinion_negative for w in words),
        opposition_count=sum(w in lex.opposition_words for w in words),
    )
    return FeatureVector(tuple(feats[s] for s in SLOTS), surface_only=False)


def feature_matrix(tweets: Iterable, lexicons: Mapping[str, LexiconSet],
                   slots: Sequence[str] = SLOTS) -> np.ndarray:
    """Stack feature vectors for ``tweets``; surface extraction when no lexicon slot is requested."""
    full = any(s in LEXICON_SLOTS for s in slots)
    rows = []
    for t in tweets:
        lex = lexicons[t.lang]
        fv = extract_full(t, lex) if full else extract_surface(t, lex)
        rows.append(fv.select(slots))
    return np.array(rows, dtype=float).reshape(len(rows), len(slots))
