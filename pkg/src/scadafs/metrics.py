"""Confusion-matrix metrics for the fault (positive) class and false-alarm duration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

# Stands in for 0/0 metrics; never silently 0 or 1.
UNDEFINED = None

REPORT_FIELDS = ("accuracy", "specificity", "recall", "precision", "f_score", "false_alarm_minutes")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ConfigError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: ConfusionMatrix) -> ConfusionMatrix:
        return ConfusionMatrix(self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float | None
    specificity: float | None
    recall: float | None
    precision: float | None
    f_score: float | None
    false_alarm_minutes: int

    def lines(self) -> list[str]:
        return [f"{name}\t{format_metric(getattr(self, name))}" for name in REPORT_FIELDS]


def format_metric(value) -> str:
    if value is UNDEFINED:
        return "undefined"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{value:.6f}"


def confusion(pred, truth) -> ConfusionMatrix:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ConfigError(f"length mismatch: {pred.shape} predictions vs {truth.shape} labels")
    for name, a in (("predictions", pred), ("labels", truth)):
        if a.size and not np.isin(a, (0, 1)).all():
            raise ConfigError(f"{name} must be 0 or 1")
    p, t = pred == 1, truth == 1
    return ConfusionMatrix(
        tp=int((p & t).sum()),
        tn=int((~p & ~t).sum()),
        fp=int((p & ~t).sum()),
        fn=int((~p & t).sum()),
    )


def _ratio(num, den):
    return UNDEFINED if den == 0 else num / den


def f_score(cm: ConfusionMatrix) -> float | None:
    return _ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn)


def compute_metrics(cm: ConfusionMatrix, sample_period_minutes: int = 10) -> MetricsReport:
    if cm.total == 0:
        raise ConfigError("no instances to evaluate")
    if sample_period_minutes <= 0:
        raise ConfigError("sample period must be positive")
    return MetricsReport(
        accuracy=_ratio(cm.tp + cm.tn, cm.total),
        specificity=_ratio(cm.tn, cm.fp + cm.tn),
        recall=_ratio(cm.tp, cm.tp + cm.fn),
        precision=_ratio(cm.tp, cm.tp + cm.fp),
        f_score=f_score(cm),
        false_alarm_minutes=cm.fp * sample_period_minutes,
    )


def harmonic_f_score(precision, recall):
    """Right-hand form of the F-score; undefined unless both inputs are defined and not both 0."""
    if precision is UNDEFINED or recall is UNDEFINED or precision + recall == 0:
        return UNDEFINED
    return 2 * precision * recall / (precision + recall)


def write_report(report: MetricsReport, path, comment: str | None = None, extra: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for line in report.lines():
            fh.write(line + "\n")
        for k, v in (extra or {}).items():
            fh.write(f"{k}\t{v}\n")
