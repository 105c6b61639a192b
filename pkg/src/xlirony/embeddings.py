"""Pretrained word-embedding tables in the plain-text ``count dim`` format."""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import EmbeddingError
from .features import tokenize

log = logging.getLogger(__name__)

DEFAULT_DIM = 300
NORM_TOL = 1e-6
WORD_KINDS = ("word", "number", "hashtag_residue")


@dataclass(frozen=True)
class EmbeddingTable:
    words: tuple
    matrix: np.ndarray
    normalized: bool = False
    lang: Optional[str] = None
    vocab: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != len(self.words):
            raise EmbeddingError(f"matrix shape {m.shape} does not match {len(self.words)} words")
        if m.shape[1] <= 0:
            raise EmbeddingError("embedding dimension must be positive")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "vocab", {w: i for i, w in enumerate(self.words)})
        if len(self.vocab) != len(self.words):
            raise EmbeddingError("duplicate words in embedding table")
        if self.normalized:
            norms = np.linalg.norm(m, axis=1)
            bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOL)
            if bad.size:
                raise EmbeddingError(f"row {self.words[bad[0]]!r} is not unit length")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return self.index(word) is not None

    def index(self, word: str) -> Optional[int]:
        """Row of ``word``: exact match first, then the lowercased form."""
        i = self.vocab.get(word)
        if i is None:
            i = self.vocab.get(word.lower())
        return i

    def __eq__(self, other):
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return (self.words == other.words and self.normalized == other.normalized
                and np.array_equal(self.matrix, other.matrix))

    __hash__ = None


def lookup(table: EmbeddingTable, word: str) -> Optional[np.ndarray]:
    """Vector for ``word`` or ``None`` when out of vocabulary."""
    i = table.index(word)
    return None if i is None else table.matrix[i]


def load_embeddings(path, max_vocab: Optional[int] = None, lang: Optional[str] = None) -> EmbeddingTable:
    """Parse ``<count> <dim>`` followed by ``word v1 ... vdim`` lines.

    Repeated words keep their first vector. ``max_vocab`` keeps the first N
    rows, which in the usual distribution files are the most frequent words.
    """
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise EmbeddingError(f"{path}: cannot read embeddings ({exc.strerror})") from exc
    words, rows, seen = [], [], set()
    with fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingError(f"{path}:1: expected '<count> <dim>' header")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise EmbeddingError(f"{path}:1: non-integer header {header}") from None
        if dim <= 0:
            raise EmbeddingError(f"{path}:1: declared dimension {dim} must be positive")
        dups = 0
        for lineno, line in enumerate(fh, start=2):
            if max_vocab is not None and len(words) >= max_vocab:
                break
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.rstrip(" ").split(" ")
            word, vals = parts[0], parts[1:]
            if len(vals) != dim:
                raise EmbeddingError(f"{path}:{lineno}: word {word!r} has {len(vals)} components, expected {dim}")
            try:
                vec = [float(v) for v in vals]
            except ValueError:
                raise EmbeddingError(f"{path}:{lineno}: non-numeric component for {word!r}") from None
            if word in seen:
                dups += 1
                continue
            seen.add(word)
            words.append(word)
            rows.append(vec)
    if dups:
        log.warning("%s: %d repeated word(s) ignored, first occurrence kept", path, dups)
    if max_vocab is None and len(words) != count:
        log.warning("%s: header declares %d vectors, read %d", path, count, len(words))
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return EmbeddingTable(tuple(words), matrix, lang=lang)


def save_embeddings(table: EmbeddingTable, path) -> None:
    # repr() of a float round-trips exactly through float()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(table)} {table.dim}\n")
        for w, row in zip(table.words, table.matrix):
            fh.write(w + " " + " ".join(repr(float(x)) for x in row) + "\n")


def normalize(table: EmbeddingTable) -> EmbeddingTable:
    """Return a copy with unit-length rows."""
    norms = np.linalg.norm(table.matrix, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise EmbeddingError(f"zero-norm vector for {table.words[zero[0]]!r}")
    if table.normalized:
        return table
    return EmbeddingTable(table.words, table.matrix / norms[:, None], normalized=True, lang=table.lang)


@dataclass(frozen=True)
class CoverageReport:
    token_coverage: float
    type_coverage: float
    oov_types: list
    n_tokens: int
    n_types: int


def coverage(ds, table: EmbeddingTable) -> CoverageReport:
    """In-vocabulary share of word tokens and word types (punctuation and emoticons excluded)."""
    if len(ds) == 0:
        raise EmbeddingError("coverage of an empty dataset")
    counts = Counter()
    forms = {}
    for t in ds:
        for tok in tokenize(t.text, t.lang):
            if tok.kind in WORD_KINDS:
                key = tok.text.lower() if t.lang != "ar" else tok.text
                counts[key] += 1
                forms.setdefault(key, set()).add(tok.text)
    n_tokens = sum(counts.values())
    n_types = len(counts)
    if n_tokens == 0:
        return CoverageReport(0.0, 0.0, [], 0, 0)
    known = {k for k, fs in forms.items() if any(table.index(f) is not None for f in fs)}
    oov = sorted(((w, c) for w, c in counts.items() if w not in known), key=lambda p: (-p[1], p[0]))
    return CoverageReport(
        token_coverage=sum(counts[w] for w in known) / n_tokens,
        type_coverage=len(known) / n_types,
        oov_types=oov,
        n_tokens=n_tokens,
        n_types=n_types,
    )
