"""Pupillometry fitness-for-duty pipeline.

Turns pupil/iris segmentation masks (or pre-extracted geometry) into
behavioural feature vectors and trains classifiers that label a capture
session as control, alcohol, drug or sleep, with a grouped fit/unfit
verdict on top.
"""

from pupilffd.core import (
    Condition,
    Eye,
    EyeSequence,
    FrameGeometry,
    TimeSeries,
    UnusableSequenceError,
    grand_mean,
    interpolate_gaps,
    load_sequences,
    ratio_series,
    resample,
    save_sequences,
)

__all__ = [
    "Condition",
    "Eye",
    "EyeSequence",
    "FrameGeometry",
    "TimeSeries",
    "UnusableSequenceError",
    "grand_mean",
    "interpolate_gaps",
    "load_sequences",
    "ratio_series",
    "resample",
    "save_sequences",
]

__version__ = "0.1.0"
