"""Behavioural feature extraction for eye sequences.

Every capture session is reduced to a 50-value descriptor computed on
its horizontal-axis pupil-iris ratio series (the vertical axis is
corrupted by eyelid closure and only contributes through the session's
3-D trend line). The layout is fixed:

====  =====================================================
slot  content
====  =====================================================
0-1   full-sequence trend slope and intercept
2-3   first-second trend slope and intercept
4-22  19 moving-window trend slopes (1 s window, 0.5 s hop)
23-26 skew-line distances to the four class baseline lines
27-30 mean, population std, range, coefficient of variation
31-34 class-curve sigma over the sequence mean, per class
35-49 ratio samples at 3 Hz over the first five seconds
====  =====================================================

Baseline curves are one :class:`RepresentativeCurve` per condition,
built from the grand mean of the training split.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pupilffd.core import (
    CANONICAL_LENGTH,
    CONDITION_ORDER,
    DEFAULT_MAX_GAP,
    DEFAULT_MAX_INVALID_FRACTION,
    Condition,
    EyeSequence,
    TimeSeries,
    UnusableSequenceError,
    grand_mean,
    interpolate_gaps,
    ratio_series,
    resample,
)

logger = logging.getLogger(__name__)

VECTOR_LENGTH = 50
N_MOVING_SLOPES = 19
N_RATIO_SAMPLES = 15
TREND_WINDOW_S = 1.0
TREND_HOP_S = 0.5
RATIO_SAMPLE_HZ = 3.0
RATIO_SAMPLE_SPAN_S = 5.0

FEATURE_LAYOUT = {
    "trend": (0, 2),
    "starting_trend": (2, 4),
    "moving_trend": (4, 23),
    "baseline_distances": (23, 27),
    "statistics": (27, 31),
    "baseline_cv": (31, 35),
    "ratio_samples": (35, 50),
}

_EPS = 1e-9


@dataclass(frozen=True)
class TrendLine:
    """Least-squares slope (per second) and intercept of a series."""

    m: float
    b: float


@dataclass(frozen=True)
class Line3D:
    """A line over (time, x-ratio, y-ratio) space, parametrised by time.

    The first direction component is pinned to 1, so the line is always
    the graph of an affine function of time and never vertical.
    """

    point: tuple[float, float, float]
    direction: tuple[float, float, float]

    def __post_init__(self) -> None:
        if self.direction[0] != 1.0:
            raise ValueError("direction must have first component 1")


@dataclass(frozen=True)
class RepresentativeCurve:
    """Grand-mean behaviour of one condition plus its fitted 3-D line."""

    condition: Condition
    mean_x: TimeSeries
    mean_y: TimeSeries
    line: Line3D
    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if len(self.mean_x) != len(self.mean_y):
            raise ValueError("mean_x and mean_y must share length")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class FeatureVector:
    """The 50-value behavioural descriptor of one session."""

    id: str
    condition: Condition
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values.shape != (VECTOR_LENGTH,):
            raise ValueError(f"feature vector must have {VECTOR_LENGTH} values")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector values must be finite")


@dataclass(frozen=True)
class SequenceStats:
    mean: float
    std: float
    value_range: float
    cv: float


def linear_trend(series: TimeSeries) -> TrendLine:
    """Closed-form least-squares line through the valid samples.

        m = (n*sum(x*y) - sum(x)*sum(y)) / (n*sum(x^2) - sum(x)^2)
        b = (sum(y)*sum(x^2) - sum(x)*sum(x*y)) / (n*sum(x^2) - sum(x)^2)

    x values are seconds since the start of the series, restricted to
    valid samples.
    """
    idx = np.flatnonzero(series.mask)
    if len(idx) < 2:
        raise UnusableSequenceError(f"trend needs >= 2 valid samples, got {len(idx)}")
    x = idx * series.dt
    y = series.values[idx]
    return _trend_from_xy(x, y)


def _trend_from_xy(x: np.ndarray, y: np.ndarray) -> TrendLine:
    n = len(x)
    sx = x.sum()
    sy = y.sum()
    sxx = np.dot(x, x)
    sxy = np.dot(x, y)
    den = n * sxx - sx * sx
    if den <= 0:
        raise UnusableSequenceError("trend is undefined: all x values identical")
    return TrendLine(m=float((n * sxy - sx * sy) / den),
                     b=float((sy * sxx - sx * sxy) / den))


def _window_indices(n: int, fps: float, start_s: float, end_s: float) -> np.ndarray:
    """Sample indices i with start_s <= i/fps < end_s, fp-stable at bin edges."""
    lo = max(0, int(np.ceil(fps * start_s - _EPS)))
    hi = min(n - 1, int(np.floor(fps * end_s - _EPS)))
    return np.arange(lo, hi + 1)


def starting_trend(series: TimeSeries, fps: float) -> TrendLine:
    """Trend restricted to the first second of the series."""
    idx = _window_indices(len(series), fps, 0.0, TREND_WINDOW_S)
    idx = idx[series.mask[idx]]
    if len(idx) < 2:
        raise UnusableSequenceError(
            f"starting trend needs >= 2 valid samples in the first second, got {len(idx)}")
    return _trend_from_xy(idx * series.dt, series.values[idx])


def moving_trend(series: TimeSeries, fps: float,
                 window: float = TREND_WINDOW_S, hop: float = TREND_HOP_S) -> np.ndarray:
    """Trend slopes over a sliding window (1 s wide, hopped by 0.5 s).

    A 10 s capture yields floor((10 - 1) / 0.5) + 1 = 19 slopes. Windows
    with fewer than 2 valid samples contribute slope 0 (counted in a
    diagnostics tally).
    """
    duration = len(series) / fps
    if duration + _EPS < window:
        raise ValueError(f"series duration {duration:.3f}s is shorter than the {window}s window")
    n_windows = int(np.floor((duration - window) / hop + _EPS)) + 1
    slopes = np.zeros(n_windows, dtype=np.float64)
    n_degenerate = 0
    for k in range(n_windows):
        idx = _window_indices(len(series), fps, k * hop, k * hop + window)
        idx = idx[series.mask[idx]]
        if len(idx) < 2:
            n_degenerate += 1
            continue
        slopes[k] = _trend_from_xy(idx * series.dt, series.values[idx]).m
    if n_degenerate:
        logger.debug("moving_trend: %d window(s) with < 2 valid samples set to slope 0",
                     n_degenerate)
    return slopes


def representative_line(mean_x: TimeSeries, mean_y: TimeSeries) -> Line3D:
    """Regression line of a pair of grand-mean curves in (t, x, y) space."""
    if len(mean_x) != len(mean_y):
        raise ValueError("mean_x and mean_y must share length")
    tx = linear_trend(mean_x)
    ty = linear_trend(mean_y)
    return Line3D(point=(0.0, tx.b, ty.b), direction=(1.0, tx.m, ty.m))


def skew_distance(r: Line3D, s: Line3D) -> float:
    """Minimal distance between two 3-D lines.

    Uses the scalar-triple-product formula
    ``|[v_r, v_s, P_r P_s]| / |v_r x v_s|`` for skew or intersecting
    lines; parallel or identical lines (cross product below 1e-12) fall
    back to the distance from a point of ``s`` to the line ``r``.
    """
    v_r = np.asarray(r.direction, dtype=np.float64)
    v_s = np.asarray(s.direction, dtype=np.float64)
    w = np.asarray(s.point, dtype=np.float64) - np.asarray(r.point, dtype=np.float64)
    cross = np.cross(v_r, v_s)
    norm_cross = float(np.linalg.norm(cross))
    if norm_cross > 1e-12:
        return float(abs(np.dot(cross, w)) / norm_cross)
    return float(np.linalg.norm(np.cross(w, v_r)) / np.linalg.norm(v_r))


def sequence_stats(series: TimeSeries) -> SequenceStats:
    """Mean, population standard deviation, range and CV of valid samples.

    A zero mean makes the coefficient of variation undefined; it is
    reported as 0 with a diagnostics note.
    """
    vals = series.values[series.mask]
    if len(vals) == 0:
        raise UnusableSequenceError("statistics need at least one valid sample")
    mean = float(vals.mean())
    std = float(vals.std())  # population std, divide by n
    value_range = float(vals.max() - vals.min())
    if mean == 0.0:
        logger.warning("sequence_stats: zero mean, coefficient of variation set to 0")
        cv = 0.0
    else:
        cv = std / mean
    return SequenceStats(mean=mean, std=std, value_range=value_range, cv=cv)


def cv_to_curve(series_mean: float, curve: RepresentativeCurve) -> float:
    """Dispersion of a class baseline relative to the sequence mean:
    ``curve.sigma / series_mean``."""
    if series_mean == 0.0:
        logger.warning("cv_to_curve: zero sequence mean, value set to 0")
        return 0.0
    return curve.sigma / series_mean


def ratio_samples(series: TimeSeries, fps: float) -> np.ndarray:
    """Ratio values at 3 Hz over the first five seconds (15 values).

    Each sample is read from the valid grid point nearest to the target
    time (ties resolve to the earlier sample).
    """
    duration = len(series) / fps
    if duration + _EPS < RATIO_SAMPLE_SPAN_S:
        raise ValueError(f"series duration {duration:.3f}s is shorter than "
                         f"{RATIO_SAMPLE_SPAN_S}s")
    valid_idx = np.flatnonzero(series.mask)
    if len(valid_idx) == 0:
        raise UnusableSequenceError("ratio samples need at least one valid sample")
    out = np.empty(N_RATIO_SAMPLES, dtype=np.float64)
    for k in range(N_RATIO_SAMPLES):
        target = int(np.rint(fps * k / RATIO_SAMPLE_HZ))
        target = min(target, len(series) - 1)
        nearest = valid_idx[np.argmin(np.abs(valid_idx - target))]
        out[k] = series.values[nearest]
    return out


def sequence_line(ratio_x: TimeSeries, ratio_y: TimeSeries) -> Line3D:
    """A session's own 3-D trend line from its two ratio-axis trends."""
    tx = linear_trend(ratio_x)
    ty = linear_trend(ratio_y)
    return Line3D(point=(0.0, tx.b, ty.b), direction=(1.0, tx.m, ty.m))


def preprocess_ratios(seq: EyeSequence, target_len: int = CANONICAL_LENGTH,
                      max_gap: int = DEFAULT_MAX_GAP,
                      max_invalid_fraction: float = DEFAULT_MAX_INVALID_FRACTION,
                      ) -> tuple[TimeSeries, TimeSeries]:
    """Ratio series on both axes, gap-filled and resampled.

    Sequences that remain more than ``max_invalid_fraction`` invalid
    after gap interpolation are rejected as unusable.
    """
    out = []
    for axis in ("x", "y"):
        series = interpolate_gaps(ratio_series(seq, axis), max_gap=max_gap)
        if series.invalid_fraction > max_invalid_fraction:
            raise UnusableSequenceError(
                f"sequence {seq.id}: {series.invalid_fraction:.0%} of the {axis}-axis "
                f"ratio series is invalid after gap interpolation "
                f"(limit {max_invalid_fraction:.0%})")
        out.append(resample(series, target_len=target_len))
    return out[0], out[1]


def build_feature_vector(seq: EyeSequence,
                         baselines: dict[Condition, RepresentativeCurve],
                         target_len: int = CANONICAL_LENGTH,
                         max_gap: int = DEFAULT_MAX_GAP,
                         max_invalid_fraction: float = DEFAULT_MAX_INVALID_FRACTION,
                         ) -> FeatureVector:
    """The 50-value descriptor of one session.

    Preprocesses the session's ratio series (gap fill, resample), then
    assembles the fixed layout. Any failure marks the sequence unusable
    instead of emitting a partial vector.
    """
    ratio_x, ratio_y = preprocess_ratios(seq, target_len=target_len, max_gap=max_gap,
                                         max_invalid_fraction=max_invalid_fraction)
    return feature_vector_from_series(seq.id, seq.condition, ratio_x, ratio_y,
                                      seq.fps, baselines)


def feature_vector_from_series(seq_id: str, condition: Condition,
                               ratio_x: TimeSeries, ratio_y: TimeSeries, fps: float,
                               baselines: dict[Condition, RepresentativeCurve],
                               ) -> FeatureVector:
    """Assemble the layout from already-preprocessed ratio series."""
    missing = [c.value for c in CONDITION_ORDER if c not in baselines]
    if missing:
        raise ValueError(f"baselines missing condition(s): {', '.join(missing)}")
    try:
        trend = linear_trend(ratio_x)
        start = starting_trend(ratio_x, fps)
        moving = moving_trend(ratio_x, fps)
        if len(moving) != N_MOVING_SLOPES:
            raise UnusableSequenceError(
                f"feature layout expects {N_MOVING_SLOPES} moving-trend slopes, got "
                f"{len(moving)}; the pipeline must resample to {CANONICAL_LENGTH} "
                f"samples over 10 s")
        own_line = sequence_line(ratio_x, ratio_y)
        stats = sequence_stats(ratio_x)
        samples = ratio_samples(ratio_x, fps)
    except ValueError as exc:
        raise UnusableSequenceError(f"sequence {seq_id}: {exc}") from exc

    values = np.empty(VECTOR_LENGTH, dtype=np.float64)
    values[0:2] = (trend.m, trend.b)
    values[2:4] = (start.m, start.b)
    values[4:23] = moving
    values[23:27] = [skew_distance(own_line, baselines[c].line) for c in CONDITION_ORDER]
    values[27:31] = (stats.mean, stats.std, stats.value_range, stats.cv)
    values[31:35] = [cv_to_curve(stats.mean, baselines[c]) for c in CONDITION_ORDER]
    values[35:50] = samples
    if not np.all(np.isfinite(values)):
        raise UnusableSequenceError(f"sequence {seq_id}: non-finite feature values")
    return FeatureVector(id=seq_id, condition=condition, values=values)


def build_baselines(sequences: list[EyeSequence],
                    target_len: int = CANONICAL_LENGTH,
                    max_gap: int = DEFAULT_MAX_GAP,
                    max_invalid_fraction: float = DEFAULT_MAX_INVALID_FRACTION,
                    ) -> dict[Condition, RepresentativeCurve]:
    """Per-condition grand-mean curves with their regression lines.

    Unusable sequences are skipped (tallied in the log); every condition
    must end up with at least one usable sequence. ``mu``/``sigma`` are
    the mean and population standard deviation of the x-axis grand-mean
    curve's valid samples.
    """
    per_condition: dict[Condition, tuple[list[TimeSeries], list[TimeSeries]]] = {
        c: ([], []) for c in CONDITION_ORDER}
    n_skipped = 0
    for seq in sequences:
        try:
            rx, ry = preprocess_ratios(seq, target_len=target_len, max_gap=max_gap,
                                       max_invalid_fraction=max_invalid_fraction)
        except UnusableSequenceError:
            n_skipped += 1
            continue
        per_condition[seq.condition][0].append(rx)
        per_condition[seq.condition][1].append(ry)
    if n_skipped:
        logger.warning("build_baselines: skipped %d unusable sequence(s)", n_skipped)
    baselines = {}
    for condition, (xs, ys) in per_condition.items():
        if not xs:
            raise ValueError(f"no usable sequences for condition {condition.value!r}")
        mean_x = grand_mean(xs)
        mean_y = grand_mean(ys)
        vals = mean_x.values[mean_x.mask]
        baselines[condition] = RepresentativeCurve(
            condition=condition,
            mean_x=mean_x,
            mean_y=mean_y,
            line=representative_line(mean_x, mean_y),
            mu=float(vals.mean()),
            sigma=float(vals.std()),
        )
    return baselines


# ---------------------------------------------------------------------------
# serialization

def save_features(vectors: list[FeatureVector], path: str | Path) -> None:
    """Write feature vectors as JSON-lines plus a sidecar layout file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for fv in vectors:
            record = {"id": fv.id, "condition": fv.condition.value,
                      "features": [float(v) for v in fv.values]}
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    layout = {
        "format": "ffd-features-layout/1",
        "length": VECTOR_LENGTH,
        "slots": {name: list(span) for name, span in FEATURE_LAYOUT.items()},
    }
    sidecar = path.with_suffix(path.suffix + ".layout.json")
    sidecar.write_text(json.dumps(layout, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_features(path: str | Path) -> list[FeatureVector]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"feature file not found: {path}")
    vectors = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            vectors.append(FeatureVector(
                id=record["id"],
                condition=Condition(record["condition"]),
                values=np.array(record["features"], dtype=np.float64),
            ))
    return vectors


def _series_to_json(series: TimeSeries) -> dict:
    return {
        "t0": series.t0,
        "dt": series.dt,
        "values": [float(v) for v in series.values],
        "mask": [bool(m) for m in series.mask],
    }


def _series_from_json(obj: dict) -> TimeSeries:
    return TimeSeries(t0=obj["t0"], dt=obj["dt"],
                      values=np.array(obj["values"], dtype=np.float64),
                      mask=np.array(obj["mask"], dtype=bool))


def save_baselines(baselines: dict[Condition, RepresentativeCurve], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": "ffd-baselines/1",
        "curves": {
            c.value: {
                "mean_x": _series_to_json(curve.mean_x),
                "mean_y": _series_to_json(curve.mean_y),
                "line": {"point": list(curve.line.point),
                         "direction": list(curve.line.direction)},
                "mu": curve.mu,
                "sigma": curve.sigma,
            }
            for c, curve in baselines.items()
        },
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_baselines(path: str | Path) -> dict[Condition, RepresentativeCurve]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"baseline file not found: {path}")
    payload = json.loads(path.read_text(encoding="utf-8"))
    if payload.get("format") != "ffd-baselines/1":
        raise ValueError(f"{path}: unsupported baseline format {payload.get('format')!r}")
    baselines = {}
    for name, obj in payload["curves"].items():
        condition = Condition(name)
        baselines[condition] = RepresentativeCurve(
            condition=condition,
            mean_x=_series_from_json(obj["mean_x"]),
            mean_y=_series_from_json(obj["mean_y"]),
            line=Line3D(point=tuple(obj["line"]["point"]),
                        direction=tuple(obj["line"]["direction"])),
            mu=obj["mu"],
            sigma=obj["sigma"],
        )
    return baselines
