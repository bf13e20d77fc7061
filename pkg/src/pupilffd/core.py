"""Data model and time-series primitives for eye sequences.

A capture session is an :class:`EyeSequence`: a fixed-rate series of
per-frame pupil/iris geometry. Downstream analysis works on
:class:`TimeSeries` values derived from it (pupil-iris ratios, radii,
centre traces). Masked samples always carry the value 0.0 alongside a
False mask bit; consumers must honour the mask and never read a masked
value.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

# Canonical capture: 10 s at 15 fps resampled onto 150 samples.
CANONICAL_FPS = 15.0
CANONICAL_LENGTH = 150
DEFAULT_MAX_GAP = 7
DEFAULT_MAX_INVALID_FRACTION = 0.30

CSV_COLUMNS = (
    "id", "eye", "condition", "t",
    "pupil_rx", "pupil_ry", "iris_rx", "iris_ry",
    "pupil_cx", "pupil_cy", "iris_cx", "iris_cy",
    "valid",
)


class SchemaError(ValueError):
    """The input file does not match the documented CSV schema."""


class UnusableSequenceError(ValueError):
    """A sequence cannot be recovered into a usable series."""


class Condition(str, Enum):
    CONTROL = "control"
    ALCOHOL = "alcohol"
    DRUG = "drug"
    SLEEP = "sleep"

    @property
    def fit_class(self) -> str:
        return "fit" if self is Condition.CONTROL else "unfit"


# Fixed ordering used for class indices, tie-breaking and reports.
CONDITION_ORDER: tuple[Condition, ...] = (
    Condition.CONTROL, Condition.ALCOHOL, Condition.DRUG, Condition.SLEEP,
)


class Eye(str, Enum):
    LEFT = "L"
    RIGHT = "R"
    MONO = "M"


@dataclass(frozen=True)
class FrameGeometry:
    """Pupil and iris radii (per image axis) and centres for one frame.

    Radii are in pixels, measured along the horizontal (x) and vertical
    (y) image axes; centres are image coordinates. ``valid`` is False
    when segmentation/localisation failed (blink, occlusion, bad fit).
    """

    t: float
    pupil_rx: float
    pupil_ry: float
    iris_rx: float
    iris_ry: float
    pupil_cx: float
    pupil_cy: float
    iris_cx: float
    iris_cy: float
    valid: bool

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError(f"frame time must be >= 0, got {self.t}")
        for name in ("pupil_rx", "pupil_ry", "iris_rx", "iris_ry"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.valid:
            if self.iris_rx <= 0 or self.iris_ry <= 0:
                raise ValueError("valid frame requires positive iris radii")
            if self.pupil_rx > self.iris_rx or self.pupil_ry > self.iris_ry:
                raise ValueError("valid frame requires pupil radius <= iris radius")


@dataclass
class EyeSequence:
    """One labelled capture session: ordered frames at a nominal rate."""

    id: str
    eye: Eye
    condition: Condition
    fps: float
    frames: list[FrameGeometry]

    def __post_init__(self) -> None:
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        times = [f.t for f in self.frames]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"sequence {self.id}: frame times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass
class TimeSeries:
    """Uniformly sampled values with a per-sample validity mask.

    Invariant: ``values[~mask] == 0.0``. The constructor enforces it so
    masked samples can never leak sentinel arithmetic into consumers.
    """

    t0: float
    dt: float
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64).copy()
        self.mask = np.asarray(self.mask, dtype=bool).copy()
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.values.shape != self.mask.shape or self.values.ndim != 1:
            raise ValueError("values and mask must be 1-D arrays of equal length")
        self.values[~self.mask] = 0.0

    def __len__(self) -> int:
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.values))

    @property
    def n_valid(self) -> int:
        return int(self.mask.sum())

    @property
    def invalid_fraction(self) -> float:
        return 1.0 - float(self.mask.mean()) if len(self.values) else 1.0


def _infer_fps(times: np.ndarray) -> float:
    """Nominal frame rate from median spacing, snapped to integers."""
    if len(times) < 2:
        return CANONICAL_FPS
    fps = 1.0 / float(np.median(np.diff(times)))
    return round(fps) if abs(fps - round(fps)) < 0.01 else fps


def _parse_row(row: dict[str, str]) -> tuple[str, Eye, Condition, FrameGeometry]:
    if row["valid"] not in ("0", "1"):
        raise ValueError(f"valid must be 0 or 1, got {row['valid']!r}")
    frame = FrameGeometry(
        t=float(row["t"]),
        pupil_rx=float(row["pupil_rx"]),
        pupil_ry=float(row["pupil_ry"]),
        iris_rx=float(row["iris_rx"]),
        iris_ry=float(row["iris_ry"]),
        pupil_cx=float(row["pupil_cx"]),
        pupil_cy=float(row["pupil_cy"]),
        iris_cx=float(row["iris_cx"]),
        iris_cy=float(row["iris_cy"]),
        valid=row["valid"] == "1",
    )
    return row["id"], Eye(row["eye"]), Condition(row["condition"]), frame


def load_sequences(path: str | Path) -> list[EyeSequence]:
    """Read the per-frame geometry CSV into one sequence per (id, eye).

    Rows whose fields cannot be parsed are skipped (with a log note);
    structural problems (missing file, missing columns, duplicate
    (id, eye, t) rows, no usable rows at all) raise :class:`SchemaError`.
    Frames are sorted by time within each sequence and sequences are
    returned sorted by (id, eye).
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file not found: {path}")
    groups: dict[tuple[str, Eye], list[FrameGeometry]] = {}
    conditions: dict[tuple[str, Eye], Condition] = {}
    seen: set[tuple[str, Eye, float]] = set()
    n_rejected = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file")
        missing = [c for c in CSV_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing column(s): {', '.join(missing)}")
        for row in reader:
            try:
                seq_id, eye, condition, frame = _parse_row(row)
            except (ValueError, KeyError, TypeError):
                n_rejected += 1
                continue
            key = (seq_id, eye)
            if (seq_id, eye, frame.t) in seen:
                raise SchemaError(f"{path}: duplicate row for id={seq_id} eye={eye.value} t={frame.t}")
            seen.add((seq_id, eye, frame.t))
            if key in conditions and conditions[key] != condition:
                raise SchemaError(f"{path}: conflicting condition labels for id={seq_id} eye={eye.value}")
            conditions[key] = condition
            groups.setdefault(key, []).append(frame)
    if n_rejected:
        logger.warning("%s: rejected %d unparsable row(s)", path, n_rejected)
    if not groups:
        raise SchemaError(f"{path}: no data rows")
    sequences = []
    for key in sorted(groups, key=lambda k: (k[0], k[1].value)):
        frames = sorted(groups[key], key=lambda f: f.t)
        fps = _infer_fps(np.array([f.t for f in frames]))
        sequences.append(EyeSequence(id=key[0], eye=key[1], condition=conditions[key], fps=fps, frames=frames))
    return sequences


def save_sequences(sequences: list[EyeSequence], path: str | Path) -> None:
    """Write sequences to the geometry CSV schema (deterministic bytes)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for seq in sequences:
            for f in seq.frames:
                writer.writerow([
                    seq.id, seq.eye.value, seq.condition.value, f"{f.t:.6f}",
                    f"{f.pupil_rx:.4f}", f"{f.pupil_ry:.4f}",
                    f"{f.iris_rx:.4f}", f"{f.iris_ry:.4f}",
                    f"{f.pupil_cx:.4f}", f"{f.pupil_cy:.4f}",
                    f"{f.iris_cx:.4f}", f"{f.iris_cy:.4f}",
                    int(f.valid),
                ])


def frame_series(seq: EyeSequence, attr: str) -> TimeSeries:
    """Lift one FrameGeometry attribute into a TimeSeries (mask = frame validity)."""
    if not seq.frames:
        raise ValueError(f"sequence {seq.id} has no frames")
    values = np.array([getattr(f, attr) for f in seq.frames], dtype=np.float64)
    mask = np.array([f.valid for f in seq.frames], dtype=bool)
    return TimeSeries(t0=seq.frames[0].t, dt=1.0 / seq.fps, values=values, mask=mask)


def ratio_series(seq: EyeSequence, axis: str) -> TimeSeries:
    """Per-frame pupil radius divided by iris radius along one image axis.

    The ratio removes the subject-to-camera distance scale: multiplying
    every radius by a constant leaves this series unchanged. Frames that
    are invalid or have a non-positive iris radius become masked samples
    rather than numeric errors.
    """
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    if not seq.frames:
        raise ValueError(f"sequence {seq.id} has no frames")
    pupil = np.array([getattr(f, f"pupil_r{axis}") for f in seq.frames], dtype=np.float64)
    iris = np.array([getattr(f, f"iris_r{axis}") for f in seq.frames], dtype=np.float64)
    valid = np.array([f.valid for f in seq.frames], dtype=bool)
    mask = valid & (iris > 0)
    values = np.zeros(len(seq.frames), dtype=np.float64)
    values[mask] = pupil[mask] / iris[mask]
    return TimeSeries(t0=seq.frames[0].t, dt=1.0 / seq.fps, values=values, mask=mask)


def interpolate_gaps(series: TimeSeries, max_gap: int = DEFAULT_MAX_GAP) -> TimeSeries:
    """Fill short invalid runs by linear interpolation.

    Interior runs of at most ``max_gap`` invalid samples are filled
    between their valid neighbours and marked valid; leading/trailing
    runs of at most ``max_gap`` are filled by constant extension of the
    nearest valid value. Longer runs stay masked. Valid samples are
    never altered.
    """
    valid_idx = np.flatnonzero(series.mask)
    if len(valid_idx) < 2:
        raise UnusableSequenceError(
            f"need at least 2 valid samples to interpolate, got {len(valid_idx)}")
    values = series.values.copy()
    mask = series.mask.copy()
    first, last = valid_idx[0], valid_idx[-1]
    if 0 < first <= max_gap:
        values[:first] = values[first]
        mask[:first] = True
    tail = len(series) - 1 - last
    if 0 < tail <= max_gap:
        values[last + 1:] = values[last]
        mask[last + 1:] = True
    for a, b in zip(valid_idx, valid_idx[1:]):
        gap = b - a - 1
        if 0 < gap <= max_gap:
            span = np.arange(1, gap + 1) / (b - a)
            values[a + 1:b] = values[a] + span * (values[b] - values[a])
            mask[a + 1:b] = True
    return TimeSeries(t0=series.t0, dt=series.dt, values=values, mask=mask)


def resample(series: TimeSeries, target_len: int = CANONICAL_LENGTH) -> TimeSeries:
    """Linearly interpolate onto a uniform grid spanning [t0, t_end].

    Interpolation uses valid samples only. An output sample is valid
    when it coincides with a valid input sample or falls strictly
    between two adjacent valid ones; samples landing in a surviving gap
    or outside the valid extent stay masked (value 0).
    """
    if target_len < 2:
        raise ValueError("target_len must be >= 2")
    valid_idx = np.flatnonzero(series.mask)
    if len(valid_idx) < 2:
        raise UnusableSequenceError(
            f"need at least 2 valid samples to resample, got {len(valid_idx)}")
    n = len(series)
    # Positions of output samples on the input index grid. Endpoints map
    # exactly (integer float arithmetic), so the identity case is bit-exact.
    pos = np.arange(target_len) * ((n - 1) / (target_len - 1))
    values = np.interp(pos, valid_idx.astype(np.float64), series.values[valid_idx])
    lo = np.clip(np.floor(pos).astype(np.int64), 0, n - 1)
    hi = np.clip(np.ceil(pos).astype(np.int64), 0, n - 1)
    on_node = np.abs(pos - np.rint(pos)) < 1e-9
    nearest = np.clip(np.rint(pos).astype(np.int64), 0, n - 1)
    mask = np.where(on_node, series.mask[nearest], series.mask[lo] & series.mask[hi])
    out_dt = series.dt * (n - 1) / (target_len - 1)
    return TimeSeries(t0=series.t0, dt=out_dt, values=values, mask=mask)


def grand_mean(series_list: list[TimeSeries]) -> TimeSeries:
    """Pointwise mean across series, honouring masks.

    ``value[i]`` averages the inputs whose sample ``i`` is valid; an
    output sample is valid when at least one input contributed. Inputs
    must share length and sampling interval.
    """
    if not series_list:
        raise ValueError("grand_mean needs at least one series")
    n = len(series_list[0])
    dt = series_list[0].dt
    for s in series_list[1:]:
        if len(s) != n:
            raise ValueError("grand_mean inputs must have equal length")
        if not math.isclose(s.dt, dt, rel_tol=1e-9):
            raise ValueError("grand_mean inputs must share dt")
    values = np.stack([s.values for s in series_list])
    masks = np.stack([s.mask for s in series_list])
    counts = masks.sum(axis=0)
    sums = values.sum(axis=0)  # masked samples are stored as 0
    mask = counts > 0
    mean = np.zeros(n, dtype=np.float64)
    mean[mask] = sums[mask] / counts[mask]
    return TimeSeries(t0=series_list[0].t0, dt=dt, values=mean, mask=mask)
