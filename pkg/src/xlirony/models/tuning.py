"""Seeded random search over CNN training options."""

import logging
from dataclasses import replace
from typing import Mapping, Sequence

import numpy as np

from ..errors import DivergenceError, ModelError
from .cnn import TrainConfig, cnn_train

log = logging.getLogger(__name__)

DEFAULT_SPACE = {
    "learning_rate": [1e-3, 5e-4, 2e-3],
    "dropout_rate": [0.3, 0.5],
    "n_filters": [50, 100],
    "widths": [[3, 4, 5], [2, 3, 4], [1, 2, 3]],
    "batch_size": [32, 64],
}


def draw(space: Mapping[str, Sequence], rng: np.random.Generator) -> dict:
    """One uniform choice per option, options visited in sorted order."""
    out = {}
    for key in sorted(space):
        choices = list(space[key])
        if not choices:
            raise ModelError(f"search space option {key!r} has no choices")
        out[key] = choices[int(rng.integers(len(choices)))]
    return out


def tune_random_search(ds, tables, space: Mapping[str, Sequence] = DEFAULT_SPACE, budget: int = 10,
                       seed: int = 42, base: TrainConfig = TrainConfig()):
    """Train ``budget`` sampled configurations and keep the best validation macro-F.

    Returns ``(best_config, trials)``; each trial records the drawn options, its
    score and status. Ties keep the earlier trial.
    """
    if budget < 1:
        raise ModelError("budget must be >= 1")
    if base.val_fraction <= 0:
        raise ModelError("tuning needs a validation fraction > 0")
    unknown = set(space) - set(TrainConfig.__dataclass_fields__)
    if unknown:
        raise ModelError(f"unknown search options {sorted(unknown)}")
    rng = np.random.default_rng(seed)
    trials = []
    best_cfg, best_score = None, -np.inf
    for i in range(budget):
        drawn = draw(space, rng)
        cfg = replace(base, **drawn)
        trial = {"trial": i, "params": cfg.to_dict()}
        try:
            res = cnn_train(ds, tables, cfg)
        except DivergenceError as exc:
            log.warning("trial %d diverged: %s", i, exc)
            trial.update(status="diverged", val_macro_f1=None, error=str(exc))
            trials.append(trial)
            continue
        trial.update(status="ok", val_macro_f1=res.best_val_macro_f1, best_epoch=res.best_epoch)
        trials.append(trial)
        if res.best_val_macro_f1 > best_score:
            best_cfg, best_score = cfg, res.best_val_macro_f1
    if best_cfg is None:
        raise ModelError(f"all {budget} tuning trials diverged")
    return best_cfg, trials
