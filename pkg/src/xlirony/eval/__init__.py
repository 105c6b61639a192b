"""Metrics, the experiment runner and report rendering."""

from .metrics import ConfusionMatrix, Metrics, confusion, confusion_from_arrays, metrics

__all__ = ["ConfusionMatrix", "Metrics", "confusion", "confusion_from_arrays", "metrics"]
