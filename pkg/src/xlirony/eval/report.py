"""Tables in the layout of the monolingual and cross-lingual result grids.

The plain-text tables print accuracy, positive-class (ironic) precision and
recall, and macro F1. The CSV carries every per-class value as well.
"""

import csv
import io
import json
from pathlib import Path
from typing import Sequence

from ..errors import ExperimentError
from .experiment import MONOLINGUAL_LANGS, CROSSLINGUAL_ROWS, ExperimentSpec
from .metrics import ConfusionMatrix, Metrics

FAMILY_ORDER = ("rf_full", "rf_surface", "cnn_mono", "cnn_crosslingual")
TXT_COLUMNS = (("A", "accuracy"), ("P", "precision_pos"), ("R", "recall_pos"), ("F", "macro_f1"))
CSV_METRICS = ("accuracy", "precision_pos", "recall_pos", "f1_pos", "precision_neg", "recall_neg",
               "f1_neg", "macro_precision", "macro_recall", "macro_f1")


def _row_key(spec: ExperimentSpec):
    pair = (spec.train_langs, spec.test_langs)
    if spec.monolingual:
        return (0, MONOLINGUAL_LANGS.index(spec.test_langs[0]), FAMILY_ORDER.index(spec.family), "")
    if pair in CROSSLINGUAL_ROWS:
        return (1, CROSSLINGUAL_ROWS.index(pair), 0, "")
    return (2, 0, 0, spec.label)


def order(results: Sequence) -> list:
    """Monolingual rows first (by language), then cross-lingual rows in the standard order."""
    return sorted(results, key=lambda r: (_row_key(r[0]), FAMILY_ORDER.index(r[0].family)))


def load_results(in_dir) -> list:
    """(spec, metrics, confusion) triples from ``<in_dir>/metrics/*.json``."""
    out = []
    for p in sorted(Path(in_dir, "metrics").glob("*.json")):
        raw = json.loads(p.read_text(encoding="utf-8"))
        out.append((ExperimentSpec.from_dict(raw["spec"]), Metrics(**raw["metrics"]),
                    ConfusionMatrix(**raw["confusion"])))
    if not out:
        raise ExperimentError(f"no metrics files under {Path(in_dir, 'metrics')}")
    return out


def to_csv(results: Sequence) -> str:
    if not results:
        raise ExperimentError("nothing to report")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("experiment", "train", "test", "family") + CSV_METRICS + ("tp", "fp", "fn", "tn"))
    for spec, m, *rest in order(results):
        cm = rest[0] if rest else None
        counts = (cm.tp, cm.fp, cm.fn, cm.tn) if cm else ("",) * 4
        w.writerow((spec.label, "+".join(spec.train_langs), "+".join(spec.test_langs), spec.family)
                   + tuple(f"{getattr(m, k):.1f}" for k in CSV_METRICS) + counts)
    return buf.getvalue()


def _grid(title: str, row_labels, groups, cell) -> str:
    """Aligned text grid: one row per label, four metric columns per group."""
    head1 = [""] + [g for g in groups for _ in TXT_COLUMNS]
    head2 = [title] + [c for _ in groups for c, _ in TXT_COLUMNS]
    body = [[r] + [cell(r, g, k) for g in groups for _, k in TXT_COLUMNS] for r in row_labels]
    rows = [head1, head2] + body
    widths = [max(len(str(row[i])) for row in rows) for i in range(len(head1))]
    lines = []
    for n, row in enumerate(rows):
        cells = [str(row[0]).ljust(widths[0])] + [str(c).rjust(widths[i + 1]) for i, c in enumerate(row[1:])]
        # group names are printed once, over the first column of their block
        if n == 0:
            cells = [cells[0]] + [c if (i % len(TXT_COLUMNS) == 0) else " " * len(c)
                                  for i, c in enumerate(cells[1:])]
        lines.append("  ".join(cells).rstrip())
        if n == 1:
            lines.append("-" * len(lines[-1]))
    return "\n".join(lines)


def to_text(results: Sequence) -> str:
    if not results:
        raise ExperimentError("nothing to report")
    ordered = order(results)
    mono = [r for r in ordered if r[0].monolingual]
    cross = [r for r in ordered if not r[0].monolingual]
    parts = []
    if mono:
        langs = [l for l in MONOLINGUAL_LANGS if any(r[0].test_langs[0] == l for r in mono)]
        fams = [f for f in FAMILY_ORDER if any(r[0].family == f for r in mono)]
        index = {(r[0].family, r[0].test_langs[0]): r[1] for r in mono}
        parts.append(_grid(
            "Model", fams, langs,
            lambda f, l, k: f"{getattr(index[(f, l)], k):.1f}" if (f, l) in index else "-"))
    if cross:
        labels = list(dict.fromkeys(r[0].label for r in cross))
        fams = [f for f in FAMILY_ORDER if any(r[0].family == f for r in cross)]
        index = {(r[0].label, r[0].family): r[1] for r in cross}
        parts.append(_grid(
            "Train->Test", labels, fams,
            lambda l, f, k: f"{getattr(index[(l, f)], k):.1f}" if (l, f) in index else "-"))
    note = "A: accuracy, P/R: ironic-class precision/recall, F: macro F1 (percent)"
    return "\n\n".join(parts) + "\n\n" + note + "\n"


