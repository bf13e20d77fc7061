"""Shared builders for the test suite."""
from __future__ import annotations

import numpy as np

from pupilffd.core import Condition, Eye, EyeSequence, FrameGeometry, TimeSeries


def make_series(values, mask=None, t0: float = 0.0, dt: float = 1.0 / 15.0) -> TimeSeries:
    values = np.asarray(values, dtype=np.float64)
    if mask is None:
        mask = np.ones(len(values), dtype=bool)
    return TimeSeries(t0=t0, dt=dt, values=values, mask=np.asarray(mask, dtype=bool))


def make_sequence(ratios, *, iris: float = 60.0, fps: float = 15.0,
                  condition: Condition = Condition.CONTROL, seq_id: str = "seq",
                  eye: Eye = Eye.MONO, valid=None, ratios_y=None) -> EyeSequence:
    """Sequence whose x-axis pupil-iris ratio series equals ``ratios``."""
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios_y is None:
        ratios_y = ratios
    if valid is None:
        valid = np.ones(len(ratios), dtype=bool)
    frames = []
    for i, (rx, ry, ok) in enumerate(zip(ratios, np.asarray(ratios_y), valid)):
        frames.append(FrameGeometry(
            t=i / fps,
            pupil_rx=float(rx * iris) if ok else 0.0,
            pupil_ry=float(ry * iris) if ok else 0.0,
            iris_rx=iris if ok else 0.0,
            iris_ry=iris if ok else 0.0,
            pupil_cx=64.0, pupil_cy=64.0, iris_cx=64.0, iris_cy=64.0,
            valid=bool(ok)))
    return EyeSequence(id=seq_id, eye=eye, condition=condition, fps=fps, frames=frames)


def csv_line(seq_id: str, eye: str, condition: str, t: float, pupil: float,
             iris: float, valid: int = 1) -> str:
    return (f"{seq_id},{eye},{condition},{t:.6f},{pupil:.4f},{pupil:.4f},"
            f"{iris:.4f},{iris:.4f},64.0,64.0,64.0,64.0,{valid}")


CSV_HEADER = ("id,eye,condition,t,pupil_rx,pupil_ry,iris_rx,iris_ry,"
              "pupil_cx,pupil_cy,iris_cx,iris_cy,valid")
