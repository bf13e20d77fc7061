"""Class baseline behaviour: grand-mean curves and steadiness.

Averaging the pupil-iris ratio across all sequences of one condition,
time point by time point, gives that condition's behavioural baseline.
All four curves rise sharply in the first second (the eye adapting to
the capture device) and then separate: the heavier the impairment, the
higher and steeper the curve. Control subjects also hold the steadiest
position in front of the sensor.
"""
import tempfile
from pathlib import Path

from pupilffd.core import Condition
from pupilffd.evaluate import behavioural_report, centre_dispersion
from pupilffd.features import build_baselines
from pupilffd.synth import GeneratorConfig, balanced_counts, generate_split_sequences

out_dir = Path(tempfile.mkdtemp(prefix="pupilffd-demo-"))

config = GeneratorConfig(counts=balanced_counts(60, 0, 0), seed=11, preset="moderate")
sequences = generate_split_sequences(config)["train"]

baselines = build_baselines(sequences)
print("grand-mean ratio level and fitted drift per condition:")
for condition in Condition:
    curve = baselines[condition]
    print(f"  {condition.value:>8}: mean {curve.mu:.3f}  "
          f"slope {curve.line.direction[1] * 1000:.2f} per 1000 s  "
          f"sigma {curve.sigma:.4f}")

dispersion = centre_dispersion(sequences)
print("\ncentre-trajectory dispersion (pixels, lower = steadier):")
for condition in Condition:
    marker = "  <- steadiest" if condition is Condition.CONTROL else ""
    print(f"  {condition.value:>8}: {dispersion[condition]:.2f}{marker}")

paths = behavioural_report(sequences, baselines, out_dir)
print(f"\nwrote {len(paths)} plot-data CSV files to {out_dir}")
print("each file has a time column plus one grand-mean series per condition,")
print("ready for any plotting tool.")
