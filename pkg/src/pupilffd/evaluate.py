"""Confusion matrices, per-class metrics, fit/unfit grouping and reports.

Per-class metrics use the one-vs-rest reduction of a confusion matrix:

    sensitivity = TP / (TP + FN)        specificity = TN / (TN + FP)
    f1 = TP / (TP + (FP + FN) / 2)      accuracy = (TP + TN) / total

0/0 cases are reported as 0 with a diagnostics note. The fit/unfit view
groups alcohol, drug and sleep into a single unfit class by summing the
corresponding blocks of the four-class matrix; no re-prediction happens.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pupilffd.core import (
    CONDITION_ORDER,
    Condition,
    EyeSequence,
    TimeSeries,
    UnusableSequenceError,
    frame_series,
    grand_mean,
    interpolate_gaps,
    resample,
)
from pupilffd.features import RepresentativeCurve, preprocess_ratios

logger = logging.getLogger(__name__)

REPORT_FORMAT = "ffd-report/1"
FIT_CLASSES = ("fit", "unfit")


@dataclass
class ConfusionMatrix:
    """Counts with rows = true class, columns = predicted class."""

    classes: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.classes)
        if self.counts.shape != (k, k):
            raise ValueError(f"counts must be {k}x{k}, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("counts must be >= 0")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def overall_accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total)

    def per_class_recall(self) -> dict[str, float]:
        recalls = {}
        for i, name in enumerate(self.classes):
            row = int(self.counts[i].sum())
            recalls[name] = float(self.counts[i, i] / row) if row else 0.0
        return recalls


@dataclass(frozen=True)
class ClassMetrics:
    sensitivity: float
    specificity: float
    f1: float
    accuracy: float

    def __post_init__(self) -> None:
        for name in ("sensitivity", "specificity", "f1", "accuracy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


def confusion_matrix(pairs: list[tuple[Condition, Condition]]) -> ConfusionMatrix:
    """Count (true, predicted) pairs over the fixed condition order."""
    if not pairs:
        raise ValueError("confusion_matrix needs at least one pair")
    index = {c: i for i, c in enumerate(CONDITION_ORDER)}
    counts = np.zeros((4, 4), dtype=np.int64)
    for truth, pred in pairs:
        counts[index[truth], index[pred]] += 1
    return ConfusionMatrix(classes=tuple(c.value for c in CONDITION_ORDER), counts=counts)


def _safe_div(num, den, what: str) -> float:
    if den == 0:
        logger.debug("class_metrics: %s is 0/0, reported as 0", what)
        return 0.0
    return float(num / den)


def class_metrics(cm: ConfusionMatrix, target: str) -> ClassMetrics:
    """One-vs-rest metrics of ``target`` within the matrix."""
    if target not in cm.classes:
        raise ValueError(f"class {target!r} not in matrix classes {cm.classes}")
    i = cm.classes.index(target)
    tp = int(cm.counts[i, i])
    fn = int(cm.counts[i].sum() - tp)
    fp = int(cm.counts[:, i].sum() - tp)
    tn = int(cm.total - tp - fn - fp)
    return ClassMetrics(
        sensitivity=_safe_div(tp, tp + fn, f"{target} sensitivity"),
        specificity=_safe_div(tn, tn + fp, f"{target} specificity"),
        f1=_safe_div(tp, tp + 0.5 * (fp + fn), f"{target} f1"),
        accuracy=_safe_div(tp + tn, tp + fp + fn + tn, f"{target} accuracy"),
    )


def group_fit_unfit(cm4: ConfusionMatrix) -> ConfusionMatrix:
    """Collapse the four-class matrix into fit (control) vs unfit (rest).

    Each 2x2 cell sums the corresponding block of the four-class
    counts, so the total is preserved exactly and unfit-to-unfit
    confusions count as correct at the group level.
    """
    expected = tuple(c.value for c in CONDITION_ORDER)
    if cm4.classes != expected:
        raise ValueError(f"expected classes {expected}, got {cm4.classes}")
    fit = [0]           # control
    unfit = [1, 2, 3]   # alcohol, drug, sleep
    counts = np.array([
        [cm4.counts[np.ix_(fit, fit)].sum(), cm4.counts[np.ix_(fit, unfit)].sum()],
        [cm4.counts[np.ix_(unfit, fit)].sum(), cm4.counts[np.ix_(unfit, unfit)].sum()],
    ], dtype=np.int64)
    return ConfusionMatrix(classes=FIT_CLASSES, counts=counts)


# ---------------------------------------------------------------------------
# behavioural plot data

def _centre_distance_series(seq: EyeSequence, which: str) -> TimeSeries:
    """Euclidean distance of the pupil or iris centre to the image origin."""
    cx = frame_series(seq, f"{which}_cx")
    cy = frame_series(seq, f"{which}_cy")
    return TimeSeries(t0=cx.t0, dt=cx.dt, values=np.hypot(cx.values, cy.values),
                      mask=cx.mask & cy.mask)


def _collect_grand_means(per_condition: dict[Condition, list[TimeSeries]],
                         ) -> dict[Condition, TimeSeries]:
    return {c: grand_mean(series) for c, series in per_condition.items() if series}


def _write_curve_csv(path: Path, curves: dict[Condition, TimeSeries]) -> None:
    """Plot-data CSV: time column plus one column per condition."""
    present = [c for c in CONDITION_ORDER if c in curves]
    if not present:
        raise ValueError(f"{path.name}: no class has any usable sequences")
    length = len(curves[present[0]])
    times = curves[present[0]].times
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time"] + [c.value for c in present])
        for i in range(length):
            row = [f"{times[i]:.6f}"]
            for c in present:
                row.append(f"{curves[c].values[i]:.8f}" if curves[c].mask[i] else "")
            writer.writerow(row)


def behavioural_report(sequences: list[EyeSequence],
                       baselines: dict[Condition, RepresentativeCurve] | None,
                       out_dir: str | Path, *, target_len: int = 150,
                       max_gap: int = 7) -> list[Path]:
    """Write per-condition grand-mean curves as plot-data CSV files.

    Produces one file per signal: pupil radius (x/y), iris
    radius (x/y), pupil-iris ratio (x/y), centre distance to the image
    origin (pupil/iris) and centre position traces (x/y). When baselines
    are given, their regression lines go into
    ``representative_lines.csv``.
    """
    if not sequences:
        raise ValueError("behavioural_report needs at least one sequence")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    signals: dict[str, dict[Condition, list[TimeSeries]]] = {
        name: {c: [] for c in CONDITION_ORDER}
        for name in ("pupil_radius_x", "pupil_radius_y", "iris_radius_x", "iris_radius_y",
                     "ratio_x", "ratio_y", "centre_distance_pupil", "centre_distance_iris",
                     "centre_position_x", "centre_position_y")
    }
    n_skipped = 0
    for seq in sequences:
        try:
            rx, ry = preprocess_ratios(seq, target_len=target_len, max_gap=max_gap)
            prepared = {"ratio_x": rx, "ratio_y": ry}
            raw = {
                "pupil_radius_x": frame_series(seq, "pupil_rx"),
                "pupil_radius_y": frame_series(seq, "pupil_ry"),
                "iris_radius_x": frame_series(seq, "iris_rx"),
                "iris_radius_y": frame_series(seq, "iris_ry"),
                "centre_distance_pupil": _centre_distance_series(seq, "pupil"),
                "centre_distance_iris": _centre_distance_series(seq, "iris"),
                "centre_position_x": frame_series(seq, "pupil_cx"),
                "centre_position_y": frame_series(seq, "pupil_cy"),
            }
            for name, series in raw.items():
                prepared[name] = resample(interpolate_gaps(series, max_gap=max_gap),
                                          target_len=target_len)
        except UnusableSequenceError:
            n_skipped += 1
            continue
        for name, series in prepared.items():
            signals[name][seq.condition].append(series)
    if n_skipped:
        logger.warning("behavioural_report: skipped %d unusable sequence(s)", n_skipped)
    empty = [c.value for c in CONDITION_ORDER
             if not signals["ratio_x"][c]]
    if empty:
        raise ValueError("no usable sequences for condition(s): " + ", ".join(empty))

    paths = []
    for name, per_condition in signals.items():
        path = out_dir / f"{name}.csv"
        _write_curve_csv(path, _collect_grand_means(per_condition))
        paths.append(path)

    if baselines is not None:
        path = out_dir / "representative_lines.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["condition", "m_x", "b_x", "m_y", "b_y", "mu", "sigma"])
            for c in CONDITION_ORDER:
                curve = baselines[c]
                writer.writerow([
                    c.value,
                    f"{curve.line.direction[1]:.10f}", f"{curve.line.point[1]:.10f}",
                    f"{curve.line.direction[2]:.10f}", f"{curve.line.point[2]:.10f}",
                    f"{curve.mu:.10f}", f"{curve.sigma:.10f}",
                ])
        paths.append(path)
    return paths


def centre_dispersion(sequences: list[EyeSequence]) -> dict[Condition, float]:
    """Mean per-sequence spread of the pupil centre around its own mean.

    A small value means the subject held a steady position in front of
    the capture device.
    """
    spread: dict[Condition, list[float]] = {c: [] for c in CONDITION_ORDER}
    for seq in sequences:
        cx = np.array([f.pupil_cx for f in seq.frames if f.valid])
        cy = np.array([f.pupil_cy for f in seq.frames if f.valid])
        if len(cx) < 2:
            continue
        spread[seq.condition].append(float(np.sqrt(cx.var() + cy.var())))
    return {c: float(np.mean(v)) for c, v in spread.items() if v}


# ---------------------------------------------------------------------------
# report rendering

def _metrics_to_json(metrics: dict[str, ClassMetrics]) -> dict:
    return {
        name: {
            "sensitivity": m.sensitivity,
            "specificity": m.specificity,
            "f1": m.f1,
            "accuracy": m.accuracy,
        }
        for name, m in metrics.items()
    }


def build_report(cm4: ConfusionMatrix, cm2: ConfusionMatrix,
                 metadata: dict | None = None) -> dict:
    """Assemble the JSON-ready report structure."""
    four_metrics = {name: class_metrics(cm4, name) for name in cm4.classes}
    two_metrics = {name: class_metrics(cm2, name) for name in cm2.classes}
    recalls = cm2.per_class_recall()
    return {
        "format": REPORT_FORMAT,
        "metadata": metadata or {},
        "four_class": {
            "classes": list(cm4.classes),
            "matrix": cm4.counts.tolist(),
            "metrics": _metrics_to_json(four_metrics),
            "overall_accuracy": cm4.overall_accuracy(),
        },
        "fit_unfit": {
            "classes": list(cm2.classes),
            "matrix": cm2.counts.tolist(),
            "metrics": _metrics_to_json(two_metrics),
            "overall_accuracy": cm2.overall_accuracy(),
            "per_class_mean_accuracy": float(np.mean(list(recalls.values()))),
        },
    }


def _pct(x: float) -> str:
    return f"{100.0 * x:.1f}%"


def report_table(report: dict) -> str:
    """Aligned plain-text table: four condition rows plus two group rows."""
    header = f"{'class':<10}{'sensitivity':>13}{'specificity':>13}{'f1-score':>11}{'accuracy':>11}"
    lines = [header, "-" * len(header)]
    for section in ("four_class", "fit_unfit"):
        block = report[section]
        for name in block["classes"]:
            m = block["metrics"][name]
            lines.append(f"{name:<10}{_pct(m['sensitivity']):>13}"
                         f"{_pct(m['specificity']):>13}{_pct(m['f1']):>11}"
                         f"{_pct(m['accuracy']):>11}")
        if section == "four_class":
            lines.append("-" * len(header))
    fu = report["fit_unfit"]
    lines.append("")
    lines.append(f"fit/unfit overall accuracy:        {_pct(fu['overall_accuracy'])}")
    lines.append(f"fit/unfit per-class mean accuracy: {_pct(fu['per_class_mean_accuracy'])}")
    return "\n".join(lines) + "\n"


def render_report(cm4: ConfusionMatrix, cm2: ConfusionMatrix, out_dir: str | Path,
                  metadata: dict | None = None) -> tuple[Path, Path]:
    """Write ``report.json`` and ``report.txt``; returns both paths.

    The JSON is serialised canonically (sorted keys) so identical inputs
    produce identical bytes.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = build_report(cm4, cm2, metadata)
    json_path = out_dir / "report.json"
    text_path = out_dir / "report.txt"
    json_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
    text_path.write_text(report_table(report), encoding="utf-8")
    return json_path, text_path
