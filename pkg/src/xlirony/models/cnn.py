"""Convolutional sentence classifier over word embeddings, in numpy (float64).

Architecture: embedding lookup -> one valid convolution per filter width ->
ReLU -> max over time -> concatenate -> dropout (training only) -> affine ->
2-way softmax. Embeddings are fine-tuned; row 0 is padding (fixed zero) and
row 1 the shared unknown-word vector.
"""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .. import LABELS
from ..corpus import Dataset, random_holdout, stratified_holdout
from ..errors import DivergenceError, ModelError
from ..features import tokenize

log = logging.getLogger(__name__)

FORMAT = "xlirony-cnn"
FORMAT_VERSION = 1
PAD, UNK = 0, 1
ADAM_BETA1, ADAM_BETA2, ADAM_EPS = 0.9, 0.999, 1e-8


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    dropout_rate: float = 0.5
    widths: tuple = (3, 4, 5)
    n_filters: int = 100
    max_seq_len: int = 40
    early_stop_patience: Optional[int] = 5  # None trains for all epochs
    val_fraction: float = 0.2               # 0 disables validation and early stopping
    stratify_val: bool = True
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if not 0.0 <= self.val_fraction < 1.0:
            raise ModelError("val_fraction must be in [0, 1)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ModelError("dropout_rate must be in [0, 1)")
        for name in ("epochs", "batch_size", "n_filters", "max_seq_len"):
            if getattr(self, name) < 1:
                raise ModelError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ModelError("learning_rate must be positive")
        if not self.widths or min(self.widths) < 1:
            raise ModelError("widths must be positive")
        if max(self.widths) > self.max_seq_len:
            raise ModelError("filter width exceeds max_seq_len")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ModelError("early_stop_patience must be positive or None")

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ModelError(f"unknown training options {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d


def vocab_key(lang: str, word: str) -> str:
    return f"{lang}:{word}"


@dataclass
class CnnModel:
    keys: tuple                 # vocabulary keys for rows 2.. ("lang:word")
    params: dict                # name -> float64 array
    config: TrainConfig
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.keys = tuple(self.keys)
        self.index = {k: i + 2 for i, k in enumerate(self.keys)}
        E = self.params["embedding"]
        if E.shape[0] != len(self.keys) + 2:
            raise ModelError(f"embedding has {E.shape[0]} rows for {len(self.keys)} words + pad + unk")

    @property
    def dim(self) -> int:
        return self.params["embedding"].shape[1]

    @property
    def vocab_hash(self) -> str:
        return hashlib.sha256("\n".join(self.keys).encode("utf-8")).hexdigest()

    def row(self, lang: str, token: str) -> int:
        i = self.index.get(vocab_key(lang, token))
        if i is None:
            i = self.index.get(vocab_key(lang, token.lower()), UNK)
        return i

    def encode(self, tweet) -> np.ndarray:
        """Token rows padded or truncated to ``max_seq_len``."""
        L = self.config.max_seq_len
        out = np.zeros(L, dtype=np.int64)
        rows = [self.row(tweet.lang, tok.text) for tok in tokenize(tweet.text, tweet.lang)][:L]
        out[:len(rows)] = rows
        return out

    def encode_all(self, tweets) -> np.ndarray:
        seqs = [self.encode(t) for t in tweets]
        if not seqs:
            return np.zeros((0, self.config.max_seq_len), dtype=np.int64)
        return np.stack(seqs)


def param_names(widths: Sequence[int]) -> list:
    names = ["embedding"]
    for w in widths:
        names += [f"conv{w}.weight", f"conv{w}.bias"]
    return names + ["dense.weight", "dense.bias"]


def init_model(tables: Mapping[str, object], cfg: TrainConfig, rng: np.random.Generator) -> CnnModel:
    """Build the vocabulary from ``tables`` (lang -> EmbeddingTable) and initialize weights.

    The unknown-word row starts at the mean of all pretrained vectors.
    """
    keys, rows = [], []
    dims = {t.dim for t in tables.values()}
    if len(dims) != 1:
        raise ModelError(f"embedding tables disagree on dimension: {sorted(dims)}")
    dim = dims.pop()
    for lang in sorted(tables):
        t = tables[lang]
        keys.extend(vocab_key(lang, w) for w in t.words)
        rows.append(t.matrix)
    pre = np.concatenate(rows, axis=0) if rows else np.zeros((0, dim))
    unk = pre.mean(axis=0) if len(pre) else np.zeros(dim)
    E = np.concatenate([np.zeros((1, dim)), unk[None, :], pre], axis=0)
    params = {"embedding": E}
    for w in cfg.widths:
        fan_in = w * dim
        params[f"conv{w}.weight"] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(cfg.n_filters, w, dim))
        params[f"conv{w}.bias"] = np.zeros(cfg.n_filters)
    n_hidden = cfg.n_filters * len(cfg.widths)
    limit = np.sqrt(6.0 / (n_hidden + 2))
    params["dense.weight"] = rng.uniform(-limit, limit, size=(n_hidden, 2))
    params["dense.bias"] = np.zeros(2)
    return CnnModel(tuple(keys), params, cfg)


# --- forward / backward ------------------------------------------------------

def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cnn_forward(model: CnnModel, X: np.ndarray, train: bool = False,
                rng: Optional[np.random.Generator] = None, mask: Optional[np.ndarray] = None):
    """Class probabilities (columns: non_ironic, ironic) for index batch X of shape (B, L).

    In training mode a dropout mask is drawn from ``rng`` unless ``mask`` is given.
    Returns ``(probs, cache)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.int64))
    p = model.params
    E = p["embedding"]
    if X.size and (X.min() < 0 or X.max() >= E.shape[0]):
        raise ModelError("token index out of range")
    if not np.any(X != PAD):
        log.warning("all-padding input; predicting from the biases alone")
    emb = E[X]                                   # (B, L, D)
    B, L, D = emb.shape
    cache = {"X": X, "cols": {}, "arg": {}, "active": {}}
    pooled = []
    for w in model.config.widths:
        T = L - w + 1
        cols = np.concatenate([emb[:, j:j + T, :] for j in range(w)], axis=2)  # (B, T, w*D)
        Wf = p[f"conv{w}.weight"].reshape(-1, w * D)
        conv = cols @ Wf.T + p[f"conv{w}.bias"]                                # (B, T, F)
        arg = conv.argmax(axis=1)                                              # (B, F)
        top = np.take_along_axis(conv, arg[:, None, :], axis=1)[:, 0, :]
        active = top > 0
        pooled.append(np.where(active, top, 0.0))
        cache["cols"][w], cache["arg"][w], cache["active"][w] = cols, arg, active
    h = np.concatenate(pooled, axis=1)
    if train and model.config.dropout_rate > 0:
        if mask is None:
            if rng is None:
                raise ModelError("training-mode forward needs an rng or a dropout mask")
            keep = 1.0 - model.config.dropout_rate
            mask = (rng.random(h.shape) < keep) / keep
        h_drop = h * mask
    else:
        mask = None
        h_drop = h
    logits = h_drop @ p["dense.weight"] + p["dense.bias"]
    probs = _softmax(logits)
    cache.update(h=h, h_drop=h_drop, mask=mask, probs=probs)
    return probs, cache


def cross_entropy(probs: np.ndarray, y: np.ndarray) -> float:
    return float(-np.mean(np.log(probs[np.arange(len(y)), y])))


def cnn_backward(model: CnnModel, cache: dict, y: np.ndarray) -> dict:
    """Gradients of the mean cross-entropy.

    The embedding gradient is sparse: ``grads["embedding_rows"]`` lists the rows
    present in the batch (padding excluded) and ``grads["embedding"]`` their
    gradients in the same order.
    """
    p = model.params
    X, probs = cache["X"], cache["probs"]
    B = X.shape[0]
    D = model.dim
    y = np.asarray(y, dtype=np.int64)
    dlogits = probs.copy()
    dlogits[np.arange(B), y] -= 1.0
    dlogits /= B
    grads = {"dense.weight": cache["h_drop"].T @ dlogits, "dense.bias": dlogits.sum(axis=0)}
    dh = dlogits @ p["dense.weight"].T
    if cache["mask"] is not None:
        dh = dh * cache["mask"]
    demb = np.zeros((B, X.shape[1], D))
    F = model.config.n_filters
    for k, w in enumerate(model.config.widths):
        dpool = dh[:, k * F:(k + 1) * F] * cache["active"][w]
        cols = cache["cols"][w]
        T = cols.shape[1]
        dconv = np.zeros((B, T, F))
        np.put_along_axis(dconv, cache["arg"][w][:, None, :], dpool[:, None, :], axis=1)
        Wf = p[f"conv{w}.weight"].reshape(F, w * D)
        grads[f"conv{w}.weight"] = (dconv.reshape(-1, F).T @ cols.reshape(-1, w * D)).reshape(F, w, D)
        grads[f"conv{w}.bias"] = dconv.sum(axis=(0, 1))
        dcols = dconv @ Wf                                         # (B, T, w*D)
        for j in range(w):
            demb[:, j:j + T, :] += dcols[:, :, j * D:(j + 1) * D]
    rows, inv = np.unique(X, return_inverse=True)
    g = np.zeros((len(rows), D))
    np.add.at(g, inv.reshape(-1), demb.reshape(-1, D))
    keep = rows != PAD
    grads["embedding_rows"], grads["embedding"] = rows[keep], g[keep]
    for name, arr in grads.items():
        if name != "embedding_rows" and not np.all(np.isfinite(arr)):
            raise DivergenceError(f"non-finite gradient for {name}")
    return grads


def dense_embedding_grad(model: CnnModel, grads: dict) -> np.ndarray:
    out = np.zeros_like(model.params["embedding"])
    out[grads["embedding_rows"]] = grads["embedding"]
    return out


# --- optimizer ---------------------------------------------------------------

class Adam:
    """Adam over all parameters; embedding state is kept only for trainable rows.

    Rows outside ``train_rows`` never receive a gradient, so their Adam moments
    stay zero and a dense update would leave them untouched anyway.
    """

    def __init__(self, model: CnnModel, train_rows: np.ndarray, lr: float):
        self.lr = lr
        self.t = 0
        self.rows = np.asarray(train_rows, dtype=np.int64)
        self.m, self.v = {}, {}
        for name, arr in model.params.items():
            shape = (len(self.rows), arr.shape[1]) if name == "embedding" else arr.shape
            self.m[name] = np.zeros(shape)
            self.v[name] = np.zeros(shape)

    def step(self, model: CnnModel, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - ADAM_BETA1 ** self.t
        c2 = 1.0 - ADAM_BETA2 ** self.t
        for name, param in model.params.items():
            if name == "embedding":
                g = np.zeros_like(self.m[name])
                pos = np.searchsorted(self.rows, grads["embedding_rows"])
                g[pos] = grads["embedding"]
            else:
                g = grads[name]
            m, v = self.m[name], self.v[name]
            m *= ADAM_BETA1
            m += (1 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1 - ADAM_BETA2) * g * g
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
            if name == "embedding":
                param[self.rows] -= update
            else:
                param -= update
            if not np.all(np.isfinite(param)):
                raise DivergenceError(f"non-finite value in {name} after update")


# --- training ----------------------------------------------------------------

def _labels(ds) -> np.ndarray:
    return np.array([LABELS.index(t.label) for t in ds], dtype=np.int64)


def _macro_f1(y: np.ndarray, pred: np.ndarray) -> float:
    from ..eval import confusion_from_arrays, metrics
    if len(y) == 0:
        return 0.0
    return metrics(confusion_from_arrays(y, pred)).macro_f1


def predict_proba(model: CnnModel, X: np.ndarray, batch_size: int = 256) -> np.ndarray:
    out = [cnn_forward(model, X[i:i + batch_size])[0] for i in range(0, len(X), batch_size)]
    return np.concatenate(out, axis=0) if out else np.zeros((0, 2))


def decide(probs: np.ndarray) -> np.ndarray:
    """Ironic only when strictly more probable; exact ties go to non_ironic."""
    return (probs[:, 1] > probs[:, 0]).astype(np.int64)


@dataclass
class TrainResult:
    model: CnnModel
    log: list
    best_epoch: int
    best_val_macro_f1: Optional[float]


def cnn_train(ds: Dataset, tables: Mapping[str, object], cfg: TrainConfig = TrainConfig()) -> TrainResult:
    """Mini-batch Adam training with seeded validation hold-out and early stopping on validation macro-F.

    ``tables`` maps language -> embedding table whose words form the model vocabulary.
    The returned model is the best-validation checkpoint (the last epoch without validation).
    """
    if len(ds) == 0:
        raise ModelError("empty training set")
    rng = np.random.default_rng(cfg.seed)
    labels = [t.label for t in ds]
    if cfg.val_fraction > 0:
        if cfg.stratify_val:
            tr_idx, va_idx = stratified_holdout(labels, cfg.val_fraction, cfg.seed)
        else:
            tr_idx, va_idx = random_holdout(len(labels), cfg.val_fraction, cfg.seed)
    else:
        tr_idx, va_idx = list(range(len(ds))), []
    model = init_model(tables, cfg, rng)
    Xtr = model.encode_all(ds.tweets[i] for i in tr_idx)
    ytr = _labels(ds.tweets[i] for i in tr_idx)
    Xva = model.encode_all(ds.tweets[i] for i in va_idx)
    yva = _labels(ds.tweets[i] for i in va_idx)
    train_rows = np.union1d(np.unique(Xtr), [UNK])
    train_rows = train_rows[train_rows != PAD]
    opt = Adam(model, train_rows, cfg.learning_rate)

    history = []
    best_f, best_epoch, best_params, bad = -1.0, 0, None, 0
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(len(Xtr))
        total = 0.0
        try:
            for s in range(0, len(perm), cfg.batch_size):
                b = perm[s:s + cfg.batch_size]
                probs, cache = cnn_forward(model, Xtr[b], train=True, rng=rng)
                loss = cross_entropy(probs, ytr[b])
                if not np.isfinite(loss):
                    raise DivergenceError("loss is not finite")
                total += loss * len(b)
                opt.step(model, cnn_backward(model, cache, ytr[b]))
        except DivergenceError as exc:
            raise DivergenceError(f"training diverged in epoch {epoch} ({exc}); "
                                  f"last stable epoch {epoch - 1}") from exc
        entry = {"epoch": epoch, "train_loss": total / len(perm),
                 "train_acc": float(np.mean(decide(predict_proba(model, Xtr)) == ytr))}
        if len(Xva):
            pva = predict_proba(model, Xva)
            entry["val_loss"] = cross_entropy(pva, yva)
            entry["val_macro_f1"] = _macro_f1(yva, decide(pva))
        history.append(entry)
        log.debug("epoch %d %s", epoch, entry)
        if len(Xva):
            if entry["val_macro_f1"] > best_f:
                best_f, best_epoch, bad = entry["val_macro_f1"], epoch, 0
                best_params = {k: v.copy() for k, v in model.params.items()}
            else:
                bad += 1
                if cfg.early_stop_patience is not None and bad >= cfg.early_stop_patience:
                    break
    if best_params is not None:
        model.params = best_params
        return TrainResult(model, history, best_epoch, best_f)
    return TrainResult(model, history, len(history), None)


def cnn_predict(model: CnnModel, tweets) -> tuple:
    """(labels, p_ironic) for an iterable of tweets."""
    probs = predict_proba(model, model.encode_all(tweets))
    return [LABELS[i] for i in decide(probs)], probs[:, 1]


# --- serialization -----------------------------------------------------------

def dumps(model: CnnModel) -> str:
    """Versioned text form::

        xlirony-cnn <version>
        config <json>
        vocab_hash <sha256 of the newline-joined keys>
        vocab <n>
        <key>                                  (n lines, rows 2.. of the embedding)
        param <name> <comma-separated shape>
        <values, one flattened row per line>   (shape[0] lines)
    """
    out = [f"{FORMAT} {FORMAT_VERSION}",
           "config\t" + json.dumps(model.config.to_dict(), sort_keys=True),
           f"vocab_hash\t{model.vocab_hash}",
           f"vocab\t{len(model.keys)}"]
    out.extend(model.keys)
    for name in param_names(model.config.widths):
        arr = model.params[name]
        out.append(f"param\t{name}\t{','.join(str(s) for s in arr.shape)}")
        flat = arr.reshape(arr.shape[0], -1) if arr.ndim > 1 else arr[:, None]
        out.extend("\t".join("%.17g" % x for x in row) for row in flat)
    return "\n".join(out) + "\n"


def loads(text: str) -> CnnModel:
    lines = text.split("\n")
    try:
        magic, version = lines[0].split()
        if magic != FORMAT:
            raise ModelError(f"not a CNN model file (header {lines[0]!r})")
        if int(version) != FORMAT_VERSION:
            raise ModelError(f"unsupported CNN format version {version}")
        cfg = TrainConfig.from_dict(json.loads(lines[1].split("\t", 1)[1]))
        vhash = lines[2].split("\t")[1]
        n = int(lines[3].split("\t")[1])
        keys = tuple(lines[4:4 + n])
        pos = 4 + n
        params = {}
        for name in param_names(cfg.widths):
            tag, pname, shape = lines[pos].split("\t")
            if tag != "param" or pname != name:
                raise ModelError(f"expected parameter {name}, found {lines[pos]!r}")
            shape = tuple(int(s) for s in shape.split(","))
            rows = lines[pos + 1:pos + 1 + shape[0]]
            arr = np.array([[float(x) for x in r.split("\t")] for r in rows], dtype=np.float64)
            params[name] = arr.reshape(shape)
            pos += 1 + shape[0]
    except (IndexError, ValueError, KeyError) as exc:
        raise ModelError(f"malformed CNN model: {exc}") from exc
    model = CnnModel(keys, params, cfg)
    if model.vocab_hash != vhash:
        raise ModelError("vocabulary hash mismatch: model file is corrupt")
    return model
