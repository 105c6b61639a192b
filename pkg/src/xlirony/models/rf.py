"""Random forest of Gini CART trees, grown from scratch on numpy arrays."""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import ModelError
from ..features import FeatureVector
from .. import LABELS

log = logging.getLogger(__name__)

FORMAT = "xlirony-rf"
FORMAT_VERSION = 1
TIE_LABEL = "non_ironic"


@dataclass(frozen=True)
class RFParams:
    n_trees: int = 200
    max_depth: Optional[int] = None
    min_leaf: int = 1
    max_features: Optional[int] = None  # None: ceil(sqrt(d))

    def __post_init__(self):
        if self.n_trees < 1 or self.min_leaf < 1:
            raise ModelError("n_trees and min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ModelError("max_depth must be >= 0")


@dataclass
class Tree:
    feature: np.ndarray    # -1 at leaves
    threshold: np.ndarray  # go left when x <= threshold
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray     # (n_nodes, n_classes)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index for every row of X."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            n = node[active]
            go_left = X[active, self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def __eq__(self, other):
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("feature", "threshold", "left", "right", "counts"))


@dataclass
class RandomForestModel:
    trees: list
    classes: tuple
    slots: tuple
    params: RFParams
    seed: int
    tie_label: str = TIE_LABEL
    n_features: int = field(init=False)

    def __post_init__(self):
        self.n_features = len(self.slots)
        for t in self.trees:
            internal = t.feature >= 0
            if np.any(t.feature[internal] >= self.n_features):
                raise ModelError("tree references a feature beyond the vector dimension")
            if np.any(t.counts[~internal].sum(axis=1) <= 0):
                raise ModelError("empty leaf")


def _gini_best_split(x: np.ndarray, y1h: np.ndarray, min_leaf: int):
    """Best threshold on one feature: (weighted gini, threshold) or None."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    n = xs.shape[0]
    left = np.cumsum(y1h[order], axis=0)[:-1]       # counts left of cut i (cut after position i)
    total = left[-1] + y1h[order[-1]]
    right = total - left
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    valid = (xs[1:] != xs[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    gini_l = 1.0 - ((left / n_left[:, None]) ** 2).sum(axis=1)
    gini_r = 1.0 - ((right / n_right[:, None]) ** 2).sum(axis=1)
    score = (n_left * gini_l + n_right * gini_r) / n
    score[~valid] = np.inf
    i = int(np.argmin(score))
    return float(score[i]), float((xs[i] + xs[i + 1]) / 2.0)


def _grow_tree(X: np.ndarray, y: np.ndarray, n_classes: int, params: RFParams,
               n_sub: int, rng: np.random.Generator) -> Tree:
    y1h = np.eye(n_classes, dtype=np.float64)[y]
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y[idx], minlength=n_classes))
        return len(feature) - 1

    root = new_node(np.arange(X.shape[0]))
    stack = [(root, np.arange(X.shape[0]), 0)]
    d = X.shape[1]
    while stack:
        node, idx, depth = stack.pop()
        c = counts[node]
        if (np.count_nonzero(c) <= 1 or len(idx) < 2 * params.min_leaf
                or (params.max_depth is not None and depth >= params.max_depth)):
            continue
        perm = rng.permutation(d)
        best = None
        # like CART: if no sampled feature admits a split, keep drawing features
        for start in range(0, d, n_sub):
            for f in perm[start:start + n_sub]:
                res = _gini_best_split(X[idx, f], y1h[idx], params.min_leaf)
                if res is not None and (best is None or res[0] < best[0]):
                    best = (res[0], res[1], int(f))
            if best is not None:
                break
        if best is None:
            continue
        _, thr, f = best
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                np.array(counts, dtype=np.int64))


def _as_matrix(X, slots: Optional[Sequence[str]]):
    if len(X) and isinstance(X[0], FeatureVector):
        slots = tuple(slots) if slots is not None else X[0].slots
        return np.array([fv.select(slots) for fv in X], dtype=np.float64), tuple(slots)
    M = np.asarray(X, dtype=np.float64)
    if M.ndim != 2:
        raise ModelError(f"expected a 2-d feature matrix, got shape {M.shape}")
    if slots is None:
        slots = tuple(f"f{i}" for i in range(M.shape[1]))
    if len(slots) != M.shape[1]:
        raise ModelError(f"{len(slots)} slot names for {M.shape[1]} columns")
    return M, tuple(slots)


def rf_train(X, y: Sequence[str], params: RFParams = RFParams(), seed: int = 42,
             slots: Optional[Sequence[str]] = None) -> RandomForestModel:
    """Fit ``params.n_trees`` trees, tree i on a bootstrap drawn with seed ``seed + i``."""
    if len(X) == 0 or len(X) != len(y):
        raise ModelError(f"need equal, non-zero numbers of rows and labels (got {len(X)}, {len(y)})")
    M, slots = _as_matrix(X, slots)
    labels = list(y)
    classes = LABELS if set(labels) <= set(LABELS) else tuple(sorted(set(labels)))
    if len(set(labels)) == 1:
        log.warning("training data has a single class %r; the forest is a constant predictor", labels[0])
    cidx = {c: i for i, c in enumerate(classes)}
    yi = np.array([cidx[l] for l in labels], dtype=np.int64)
    d = M.shape[1]
    n_sub = params.max_features or max(1, math.ceil(math.sqrt(d)))
    n_sub = min(n_sub, d)
    trees = []
    for i in range(params.n_trees):
        rng = np.random.default_rng(seed + i)
        boot = rng.integers(0, M.shape[0], size=M.shape[0])
        trees.append(_grow_tree(M[boot], yi[boot], len(classes), params, n_sub, rng))
    tie = TIE_LABEL if TIE_LABEL in classes else classes[0]
    return RandomForestModel(trees, tuple(classes), slots, params, seed, tie)


def _argmax_with_tie(scores: np.ndarray, tie_idx: int) -> np.ndarray:
    best = scores.max(axis=1, keepdims=True)
    is_max = scores == best
    pred = np.argmax(is_max, axis=1)
    pred[is_max[:, tie_idx]] = tie_idx
    return pred


def rf_predict(model: RandomForestModel, X, slots: Optional[Sequence[str]] = None):
    """Majority vote. Returns (labels, probabilities) with one probability column per class.

    Vote ties go to ``model.tie_label``.
    """
    if len(X) and isinstance(X[0], FeatureVector):
        missing = [s for s in model.slots if s not in X[0].slots]
        if missing:
            raise ModelError(f"feature vectors lack model slots {missing}")
        M, _ = _as_matrix(X, model.slots)
    else:
        M = np.asarray(X, dtype=np.float64)
        if M.ndim == 1:
            M = M[None, :]
        if M.ndim != 2 or M.shape[1] != model.n_features:
            raise ModelError(f"expected {model.n_features} features, got shape {M.shape}")
        if slots is not None and tuple(slots) != model.slots:
            raise ModelError(f"feature slot mismatch: model {model.slots}, input {tuple(slots)}")
    n_classes = len(model.classes)
    tie_idx = model.classes.index(model.tie_label)
    votes = np.zeros((M.shape[0], n_classes))
    for t in model.trees:
        leaf_counts = t.counts[t.apply(M)]
        votes[np.arange(M.shape[0]), _argmax_with_tie(leaf_counts, tie_idx)] += 1
    proba = votes / len(model.trees)
    pred = _argmax_with_tie(votes, tie_idx)
    return [model.classes[i] for i in pred], proba


# --- serialization -----------------------------------------------------------

def dumps(model: RandomForestModel) -> str:
    """Versioned text form. Line grammar::

        xlirony-rf <version>
        classes <TAB-separated labels>
        slots <TAB-separated slot names>
        params <json>
        tree <index> <n_nodes>
        <feature> <threshold> <left> <right> <comma-separated class counts>   (one per node)
    """
    lines = [f"{FORMAT} {FORMAT_VERSION}",
             "classes\t" + "\t".join(model.classes),
             "slots\t" + "\t".join(model.slots),
             "params\t" + json.dumps({**asdict(model.params), "seed": model.seed,
                                      "tie_label": model.tie_label}, sort_keys=True)]
    for i, t in enumerate(model.trees):
        lines.append(f"tree\t{i}\t{len(t.feature)}")
        for k in range(len(t.feature)):
            lines.append(f"{t.feature[k]}\t{float(t.threshold[k])!r}\t{t.left[k]}\t{t.right[k]}\t"
                         + ",".join(str(int(c)) for c in t.counts[k]))
    return "\n".join(lines) + "\n"


def loads(text: str) -> RandomForestModel:
    lines = text.splitlines()
    try:
        magic, version = lines[0].split()
        if magic != FORMAT:
            raise ModelError(f"not a random forest model file (header {lines[0]!r})")
        if int(version) != FORMAT_VERSION:
            raise ModelError(f"unsupported random forest format version {version}")
        classes = tuple(lines[1].split("\t")[1:])
        slots = tuple(lines[2].split("\t")[1:])
        meta = json.loads(lines[3].split("\t", 1)[1])
        seed, tie = meta.pop("seed"), meta.pop("tie_label")
        params = RFParams(**meta)
        trees, pos = [], 4
        while pos < len(lines):
            tag, _, n_nodes = lines[pos].split("\t")
            if tag != "tree":
                raise ModelError(f"line {pos + 1}: expected a tree header")
            n_nodes = int(n_nodes)
            rows = [ln.split("\t") for ln in lines[pos + 1:pos + 1 + n_nodes]]
            trees.append(Tree(
                np.array([int(r[0]) for r in rows], dtype=np.int64),
                np.array([float(r[1]) for r in rows], dtype=np.float64),
                np.array([int(r[2]) for r in rows], dtype=np.int64),
                np.array([int(r[3]) for r in rows], dtype=np.int64),
                np.array([[int(c) for c in r[4].split(",")] for r in rows], dtype=np.int64).reshape(n_nodes, len(classes)),
            ))
            pos += 1 + n_nodes
    except (IndexError, ValueError, KeyError, TypeError) as exc:
        raise ModelError(f"malformed random forest model: {exc}") from exc
    return RandomForestModel(trees, classes, slots, params, seed, tie)
