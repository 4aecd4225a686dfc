"""Gold standards, confusion matrices and precision/recall/F1.

The positive class is *changed*. Metrics are micro-averaged: one pooled
confusion matrix over all evaluated lemmas.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

from .errors import InputError

REPORT_FORMAT = "gasc.report"
REPORT_VERSION = 1


@dataclass(frozen=True)
class GoldStandard:
    entries: dict[str, bool]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.entries:
            raise InputError("gold standard has no entries")

    @property
    def n_changed(self) -> int:
        return sum(self.entries.values())


def load_gold(path, metadata: dict | None = None) -> GoldStandard:
    """Read ``lemma<TAB>label`` lines with labels 0 or 1.

    Blank lines and lines starting with ``#`` are skipped.
    """
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected lemma<TAB>label")
            lemma, label = parts[0].strip(), parts[1].strip()
            if label not in ("0", "1"):
                raise InputError(f"{path}:{lineno}: unknown label {label!r} (expected 0 or 1)")
            if lemma in entries:
                raise InputError(f"{path}:{lineno}: duplicate lemma {lemma!r}")
            entries[lemma] = label == "1"
    if not entries:
        raise InputError(f"{path}: empty gold standard")
    return GoldStandard(entries, dict(metadata or {}))


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def transpose(self) -> "ConfusionMatrix":
        """The same matrix with *unchanged* as the positive class."""
        return ConfusionMatrix(tp=self.tn, tn=self.tp, fp=self.fn, fn=self.fp)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


def confusion(predictions: Mapping[str, bool], gold: GoldStandard) -> ConfusionMatrix:
    missing = sorted(set(gold.entries) - set(predictions))
    if missing:
        raise InputError(f"no prediction for gold lemmas: {', '.join(missing)}")
    extra = sorted(set(predictions) - set(gold.entries))
    if extra:
        warnings.warn(f"ignoring predictions for lemmas not in the gold standard: {', '.join(extra)}",
                      stacklevel=2)
    tp = tn = fp = fn = 0
    for lemma, truth in gold.entries.items():
        pred = bool(predictions[lemma])
        if pred and truth:
            tp += 1
        elif pred:
            fp += 1
        elif truth:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, tn, fp, fn)


def _ratio(num, den):
    return (num / den, False) if den else (0.0, True)


def prf(m: ConfusionMatrix) -> PRF:
    """Precision, recall and F1; any 0/0 is 0 and sets ``degenerate``."""
    p, dp = _ratio(m.tp, m.tp + m.fp)
    r, dr = _ratio(m.tp, m.tp + m.fn)
    f, df = _ratio(2 * p * r, p + r)
    return PRF(p, r, f, dp or dr or df)


def report(m: ConfusionMatrix, scores: PRF, metadata: dict | None = None) -> tuple[str, dict]:
    """Render ``(text, json_dict)``; text rounds to 3 decimals."""
    metadata = dict(metadata or {})
    lines = [f"{k}: {v}" for k, v in sorted(metadata.items())]
    lines += [
        f"TP {m.tp}  TN {m.tn}  FP {m.fp}  FN {m.fn}",
        f"P {scores.precision:.3f}  R {scores.recall:.3f}  F1 {scores.f1:.3f}",
    ]
    if scores.degenerate:
        lines.append("note: at least one metric is 0/0 and reported as 0")
    doc = {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "metadata": metadata,
        "confusion": asdict(m),
        "metrics": asdict(scores),
    }
    return "\n".join(lines) + "\n", doc


def report_schema() -> dict:
    return json.loads(resources.files("gasc").joinpath("report.schema.json").read_text(encoding="utf-8"))


def load_report(source) -> tuple[ConfusionMatrix, PRF, dict]:
    """Inverse of :func:`report`'s JSON half (accepts a dict, str or path)."""
    if isinstance(source, dict):
        doc = source
    elif isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        doc = json.loads(source)
    if doc.get("format") != REPORT_FORMAT or doc.get("version") != REPORT_VERSION:
        raise InputError("not a gasc report (format/version mismatch)")
    try:
        return ConfusionMatrix(**doc["confusion"]), PRF(**doc["metrics"]), dict(doc["metadata"])
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed report: {exc}") from None
