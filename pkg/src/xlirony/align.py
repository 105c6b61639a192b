"""Supervised orthogonal mapping between two embedding spaces, with CSLS retrieval.

A ``LinearMap`` W sends a source vector x to W @ x in the target space. W is
the orthogonal Procrustes solution fitted on dictionary pairs and can be
refined by re-inducing a dictionary from mutual CSLS nearest neighbours.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .embeddings import EmbeddingTable, normalize
from .errors import AlignmentError

log = logging.getLogger(__name__)

ORTHO_TOL = 1e-8
RANK_DECIMALS = 10  # scores equal to this many decimals are ties, broken by word


@dataclass(frozen=True)
class BilingualDictionary:
    pairs: tuple
    unique_source: bool = False

    def __post_init__(self):
        pairs = tuple((str(s), str(t)) for s, t in self.pairs)
        for s, t in pairs:
            if not s or not t:
                raise AlignmentError(f"empty word in dictionary pair ({s!r}, {t!r})")
        if self.unique_source:
            seen, kept = set(), []
            for s, t in pairs:
                if s not in seen:
                    seen.add(s)
                    kept.append((s, t))
            pairs = tuple(kept)
        object.__setattr__(self, "pairs", pairs)

    def __len__(self):
        return len(self.pairs)


def load_dictionary(path, unique_source: bool = False) -> BilingualDictionary:
    """One ``source<TAB>target`` pair per line; blank lines are skipped."""
    pairs = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n").rstrip("\r")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise AlignmentError(f"{path}:{lineno}: expected 'source<TAB>target'")
                pairs.append((parts[0].strip(), parts[1].strip()))
    except OSError as exc:
        raise AlignmentError(f"{path}: cannot read dictionary ({exc.strerror})") from exc
    return BilingualDictionary(tuple(pairs), unique_source)


@dataclass(frozen=True)
class LinearMap:
    W: np.ndarray
    src_lang: Optional[str] = None
    tgt_lang: Optional[str] = None
    n_pairs: int = 0
    residual: float = 0.0

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise AlignmentError(f"map must be square, got shape {W.shape}")
        err = orthogonality_error(W)
        if err > ORTHO_TOL:
            raise AlignmentError(f"map is not orthogonal: ||W W^T - I||_F = {err:.3g}")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        """Map row vectors."""
        return np.asarray(vectors) @ self.W.T


def orthogonality_error(W: np.ndarray) -> float:
    return float(np.linalg.norm(W @ W.T - np.eye(W.shape[0])))


def procrustes(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Orthogonal W minimizing ||X W^T - Y||_F for row-stacked X, Y."""
    # rows here, so Y.T @ X is the column-stacked cross-covariance Y X^T
    U, _, Vt = np.linalg.svd(Y.T @ X)
    return U @ Vt


def _pair_rows(src: EmbeddingTable, tgt: EmbeddingTable, dictionary: BilingualDictionary):
    si, ti = [], []
    for s, t in dictionary.pairs:
        a, b = src.index(s), tgt.index(t)
        if a is not None and b is not None:
            si.append(a)
            ti.append(b)
    return np.array(si, dtype=int), np.array(ti, dtype=int)


def center(table: EmbeddingTable) -> EmbeddingTable:
    """Mean-center then re-normalize rows."""
    m = table.matrix - table.matrix.mean(axis=0)
    return normalize(EmbeddingTable(table.words, m, lang=table.lang))


def fit_procrustes(src: EmbeddingTable, tgt: EmbeddingTable, dictionary: BilingualDictionary,
                   src_lang: Optional[str] = None, tgt_lang: Optional[str] = None) -> LinearMap:
    if src.dim != tgt.dim:
        raise AlignmentError(f"dimension mismatch: source {src.dim}, target {tgt.dim}")
    if not (src.normalized and tgt.normalized):
        raise AlignmentError("both embedding tables must be normalized before fitting")
    si, ti = _pair_rows(src, tgt, dictionary)
    dropped = len(dictionary) - len(si)
    if dropped:
        log.info("%d dictionary pair(s) dropped: word missing from an embedding table", dropped)
    if len(si) == 0:
        raise AlignmentError("no usable dictionary pairs")
    if len(si) < src.dim:
        log.warning("only %d usable pairs for dimension %d; the map is underdetermined", len(si), src.dim)
    X, Y = src.matrix[si], tgt.matrix[ti]
    W = procrustes(X, Y)
    resid = float(np.linalg.norm(X @ W.T - Y))
    return LinearMap(W, src_lang or src.lang, tgt_lang or tgt.lang, len(si), resid)


def map_table(src: EmbeddingTable, m: LinearMap) -> EmbeddingTable:
    """Apply ``m`` to every row; the result is re-normalized."""
    if src.dim != m.dim:
        raise AlignmentError(f"dimension mismatch: table {src.dim}, map {m.dim}")
    mapped = m.apply(src.matrix)
    return normalize(EmbeddingTable(src.words, mapped, lang=m.tgt_lang or src.lang))


# --- CSLS --------------------------------------------------------------------

@dataclass(frozen=True)
class CslsConfig:
    k: int = 10
    source_sample: int = 50_000

    def __post_init__(self):
        if self.k < 1:
            raise AlignmentError("CSLS k must be >= 1")


def _clamp_k(k: int, n: int, what: str) -> int:
    if k > n:
        log.warning("CSLS k=%d exceeds %s size %d; clamped", k, what, n)
        return n
    return k


def mean_topk(sims: np.ndarray, k: int) -> np.ndarray:
    """Row-wise mean of the k largest entries."""
    if k >= sims.shape[1]:
        return sims.mean(axis=1)
    top = np.partition(sims, sims.shape[1] - k, axis=1)[:, -k:]
    return top.mean(axis=1)


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise AlignmentError("zero query vector")
    return v / n


class CslsIndex:
    """Target table plus precomputed target-side penalties.

    ``source`` holds mapped source vectors (rows); the penalty of target word y
    is the mean cosine to its k nearest rows of ``source``.
    """

    def __init__(self, tgt: EmbeddingTable, source: np.ndarray, cfg: CslsConfig = CslsConfig()):
        if len(tgt) == 0:
            raise AlignmentError("empty target table")
        source = np.asarray(source, dtype=np.float64)[: cfg.source_sample]
        if source.shape[0] == 0:
            raise AlignmentError("empty source sample")
        self.tgt = tgt
        self.T = _unit(tgt.matrix)
        self.k_t = _clamp_k(cfg.k, len(tgt), "target vocabulary")
        k_s = _clamp_k(cfg.k, source.shape[0], "source sample")
        self.r_src = mean_topk(self.T @ _unit(source).T, k_s)

    def scores(self, queries: np.ndarray) -> np.ndarray:
        q = _unit(np.atleast_2d(np.asarray(queries, dtype=np.float64)))
        cos = q @ self.T.T
        r_tgt = mean_topk(cos, self.k_t)
        return 2 * cos - r_tgt[:, None] - self.r_src[None, :]

    def neighbors(self, query: np.ndarray, topn: Optional[int] = None) -> list:
        s = self.scores(query)[0]
        return rank(self.tgt.words, s, topn)


def rank(words: Sequence[str], scores: np.ndarray, topn: Optional[int] = None) -> list:
    """Sort by descending score; ties (to ``RANK_DECIMALS``) broken by word."""
    order = sorted(range(len(words)), key=lambda i: (-round(float(scores[i]), RANK_DECIMALS), words[i]))
    if topn is not None:
        order = order[:topn]
    return [(words[i], float(scores[i])) for i in order]


def csls_neighbors(query: np.ndarray, tgt: EmbeddingTable, cfg: CslsConfig = CslsConfig(),
                   source=None, topn: Optional[int] = None) -> list:
    """Rank target words for ``query`` by 2cos(x, y) - r_T(x) - r_S(y).

    ``source`` is the mapped source table (or a matrix of mapped source rows)
    used for r_S; its first ``cfg.source_sample`` rows are the sample.
    """
    if source is None:
        raise AlignmentError("csls_neighbors needs the mapped source vectors for r_S")
    mat = source.matrix if isinstance(source, EmbeddingTable) else source
    return CslsIndex(tgt, mat, cfg).neighbors(query, topn)


# --- refinement --------------------------------------------------------------

def mutual_csls_pairs(S: np.ndarray, T: np.ndarray, k: int):
    """Index pairs (i, j) where S[i] and T[j] are each other's CSLS nearest neighbour."""
    cos = _unit(S) @ _unit(T).T
    r_s = mean_topk(cos, _clamp_k(k, T.shape[0], "target slice"))
    r_t = mean_topk(cos.T, _clamp_k(k, S.shape[0], "source slice"))
    csls = 2 * cos - r_s[:, None] - r_t[None, :]
    fwd = csls.argmax(axis=1)
    bwd = csls.argmax(axis=0)
    i = np.flatnonzero(bwd[fwd] == np.arange(S.shape[0]))
    return i, fwd[i]


def refine(src: EmbeddingTable, tgt: EmbeddingTable, m: LinearMap, rounds: int,
           cfg: CslsConfig = CslsConfig(), max_rank: int = 15_000):
    """Re-induce a dictionary from mutual CSLS neighbours and refit, ``rounds`` times.

    Only the first ``max_rank`` rows of each table (the most frequent words in
    the usual file order) take part. Returns ``(map, residuals)``.
    """
    if rounds < 1:
        raise AlignmentError("refine needs rounds >= 1")
    if not (src.normalized and tgt.normalized):
        raise AlignmentError("both embedding tables must be normalized before refining")
    S, T = src.matrix[:max_rank], tgt.matrix[:max_rank]
    residuals = []
    for r in range(rounds):
        si, ti = mutual_csls_pairs(m.apply(S), T, cfg.k)
        if len(si) == 0:
            log.warning("round %d induced an empty dictionary; keeping the previous map", r + 1)
            break
        X, Y = S[si], T[ti]
        W = procrustes(X, Y)
        resid = float(np.linalg.norm(X @ W.T - Y))
        m = LinearMap(W, m.src_lang, m.tgt_lang, len(si), resid)
        residuals.append(resid)
    return m, residuals


# --- persistence -------------------------------------------------------------

def save_map(m: LinearMap, path) -> None:
    """Line 1: dim; then dim rows of dim floats (tab separated)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{m.dim}\n")
        for row in m.W:
            fh.write("\t".join(repr(float(x)) for x in row) + "\n")


def load_map(path, src_lang: Optional[str] = None, tgt_lang: Optional[str] = None) -> LinearMap:
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    except OSError as exc:
        raise AlignmentError(f"{path}: cannot read map ({exc.strerror})") from exc
    try:
        dim = int(lines[0])
        rows = [[float(x) for x in ln.split()] for ln in lines[1:]]
    except (IndexError, ValueError) as exc:
        raise AlignmentError(f"{path}: malformed map file") from exc
    if len(rows) != dim or any(len(r) != dim for r in rows):
        raise AlignmentError(f"{path}: expected {dim} rows of {dim} values")
    return LinearMap(np.array(rows), src_lang, tgt_lang)
