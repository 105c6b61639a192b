"""Confusion matrices and A/P/R/F metrics with ``ironic`` as the positive class."""

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..errors import IronyError

POSITIVE = "ironic"


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise IronyError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self) -> "ConfusionMatrix":
        """The same counts with the other class taken as positive."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)

    def __add__(self, other):
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)


@dataclass(frozen=True)
class Metrics:
    """All values are percentages."""
    accuracy: float
    precision_pos: float
    recall_pos: float
    f1_pos: float
    precision_neg: float
    recall_neg: float
    f1_neg: float
    macro_precision: float
    macro_recall: float
    macro_f1: float

    def as_dict(self) -> dict:
        return asdict(self)


def confusion(gold: Sequence[str], pred: Sequence[str]) -> ConfusionMatrix:
    if len(gold) != len(pred):
        raise IronyError(f"gold has {len(gold)} labels, predictions {len(pred)}")
    if len(gold) == 0:
        raise IronyError("cannot score an empty prediction set")
    tp = fp = fn = tn = 0
    for g, p in zip(gold, pred):
        if p == POSITIVE:
            if g == POSITIVE:
                tp += 1
            else:
                fp += 1
        elif g == POSITIVE:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, fn, tn)


def confusion_from_arrays(gold: np.ndarray, pred: np.ndarray) -> ConfusionMatrix:
    """Same as ``confusion`` for 0/1 arrays where 1 is ironic."""
    gold, pred = np.asarray(gold), np.asarray(pred)
    if gold.shape != pred.shape:
        raise IronyError("gold and prediction arrays differ in shape")
    return ConfusionMatrix(int(np.sum((gold == 1) & (pred == 1))), int(np.sum((gold == 0) & (pred == 1))),
                           int(np.sum((gold == 1) & (pred == 0))), int(np.sum((gold == 0) & (pred == 0))))


def _ratio(num: int, den: int) -> float:
    # zero denominator -> 0 by convention
    return 100.0 * num / den if den else 0.0


def _f1(tp: int, fp: int, fn: int) -> float:
    return _ratio(2 * tp, 2 * tp + fp + fn)


def metrics(cm: ConfusionMatrix) -> Metrics:
    if cm.total == 0:
        raise IronyError("metrics of an empty confusion matrix")
    p_pos, r_pos, f_pos = _ratio(cm.tp, cm.tp + cm.fp), _ratio(cm.tp, cm.tp + cm.fn), _f1(cm.tp, cm.fp, cm.fn)
    p_neg, r_neg, f_neg = _ratio(cm.tn, cm.tn + cm.fn), _ratio(cm.tn, cm.tn + cm.fp), _f1(cm.tn, cm.fn, cm.fp)
    return Metrics(
        accuracy=_ratio(cm.tp + cm.tn, cm.total),
        precision_pos=p_pos, recall_pos=r_pos, f1_pos=f_pos,
        precision_neg=p_neg, recall_neg=r_neg, f1_neg=f_neg,
        macro_precision=(p_pos + p_neg) / 2,
        macro_recall=(r_pos + r_neg) / 2,
        macro_f1=(f_pos + f_neg) / 2,
    )
