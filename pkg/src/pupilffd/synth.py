"""Class-conditional synthetic eye sequences and mask corpora.

Each condition has a :class:`ClassProfile` describing its pupil-iris
ratio curve: a baseline level, an adaptation transient after capture
start, a dilation drift, frame noise, blink rate and head-movement
jitter. Unfit profiles drift faster, sit higher and move more, so grand
means reproduce the qualitative orderings seen on real captures
(alcohol above drug above sleep above control, and control steadiest in
front of the device).

All numeric defaults below are calibration constants for the generator,
not measured values. A ``separation`` knob scales the drift gaps
between each condition and control; presets bundle it with a scale on
the per-sequence subject variability (easy / moderate / hard).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from pupilffd.circlefit import LABEL_IRIS, LABEL_PUPIL, LabelMask, write_pgm
from pupilffd.core import Condition, Eye, EyeSequence, FrameGeometry, save_sequences

SPLITS = ("train", "validation", "test")

# Per-sequence (subject-level) variability, scaled by the preset.
SUBJECT_BASE_SIGMA = 0.018
SUBJECT_DRIFT_SIGMA = 0.0007
SUBJECT_AMPLITUDE_SIGMA = 0.008
SUBJECT_NOISE_LOG_SIGMA = 0.30

IRIS_JITTER_SIGMA = 0.01      # relative per-frame iris radius wobble
Y_AXIS_NOISE_FACTOR = 0.5     # extra vertical-axis ratio noise, in units of noise_sigma
RATIO_MIN, RATIO_MAX = 0.05, 0.95
BLINK_FRAMES = (3, 7)
DRUG_OCCLUSION_RANGE = (0.25, 0.40)  # eyelid coverage of the iris disc in masks

# (separation, subject variability scale)
PRESETS: dict[str, tuple[float, float]] = {
    "easy": (3.0, 0.5),
    "moderate": (1.0, 1.0),
    "hard": (0.6, 1.4),
}


@dataclass(frozen=True)
class ClassProfile:
    """Generator parameters of one condition's ratio curve."""

    condition: Condition
    base_ratio: float
    adapt_amplitude: float
    adapt_tau: float
    drift_slope: float
    noise_sigma: float
    blink_rate: float
    centre_jitter_sigma: float

    def __post_init__(self) -> None:
        if self.adapt_tau <= 0:
            raise ValueError("adapt_tau must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.blink_rate < 0 or self.centre_jitter_sigma < 0:
            raise ValueError("blink_rate and centre_jitter_sigma must be >= 0")


DEFAULT_PROFILES: dict[Condition, ClassProfile] = {
    Condition.CONTROL: ClassProfile(
        condition=Condition.CONTROL, base_ratio=0.350, adapt_amplitude=0.040,
        adapt_tau=0.8, drift_slope=0.0005, noise_sigma=0.004, blink_rate=0.15,
        centre_jitter_sigma=0.35),
    Condition.SLEEP: ClassProfile(
        condition=Condition.SLEEP, base_ratio=0.360, adapt_amplitude=0.045,
        adapt_tau=0.8, drift_slope=0.0015, noise_sigma=0.006, blink_rate=0.50,
        centre_jitter_sigma=1.10),
    Condition.DRUG: ClassProfile(
        condition=Condition.DRUG, base_ratio=0.370, adapt_amplitude=0.050,
        adapt_tau=0.8, drift_slope=0.0025, noise_sigma=0.008, blink_rate=0.35,
        centre_jitter_sigma=1.30),
    Condition.ALCOHOL: ClassProfile(
        condition=Condition.ALCOHOL, base_ratio=0.380, adapt_amplitude=0.055,
        adapt_tau=0.8, drift_slope=0.0040, noise_sigma=0.009, blink_rate=0.30,
        centre_jitter_sigma=0.80),
}


def validate_profiles(profiles: dict[Condition, ClassProfile]) -> None:
    """Drift slopes must keep the calibration ordering
    alcohol > drug > sleep > control."""
    missing = [c.value for c in Condition if c not in profiles]
    if missing:
        raise ValueError(f"profiles missing condition(s): {', '.join(missing)}")
    drifts = {c: profiles[c].drift_slope for c in Condition}
    if not (drifts[Condition.ALCOHOL] > drifts[Condition.DRUG]
            > drifts[Condition.SLEEP] > drifts[Condition.CONTROL]):
        raise ValueError("drift slopes must satisfy alcohol > drug > sleep > control")


# Sequence counts per split, matching the reference dataset shape
# (625 train / 88 validation / 797 test, with a roughly 14% unfit test share).
DEFAULT_COUNTS: dict[str, dict[Condition, int]] = {
    "train": {Condition.CONTROL: 247, Condition.ALCOHOL: 247,
              Condition.DRUG: 62, Condition.SLEEP: 69},
    "validation": {Condition.CONTROL: 35, Condition.ALCOHOL: 35,
                   Condition.DRUG: 9, Condition.SLEEP: 9},
    "test": {Condition.CONTROL: 688, Condition.ALCOHOL: 72,
             Condition.DRUG: 17, Condition.SLEEP: 20},
}


@dataclass
class GeneratorConfig:
    counts: dict[str, dict[Condition, int]] = field(
        default_factory=lambda: {s: dict(DEFAULT_COUNTS[s]) for s in SPLITS})
    fps: float = 15.0
    duration: float = 10.0
    iris_radius_px: float = 30.0
    image_px: int = 128
    seed: int = 0
    preset: str = "moderate"
    profiles: dict[Condition, ClassProfile] = field(
        default_factory=lambda: dict(DEFAULT_PROFILES))

    def __post_init__(self) -> None:
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; expected one of {sorted(PRESETS)}")
        if self.fps <= 0 or self.duration < 5.0:
            raise ValueError("fps must be positive and duration at least 5 s")
        if self.iris_radius_px <= 0:
            raise ValueError("iris_radius_px must be positive")
        if 2 * self.iris_radius_px + 16 > self.image_px:
            raise ValueError("image_px too small for the iris radius")
        for split, per_condition in self.counts.items():
            if split not in SPLITS:
                raise ValueError(f"unknown split {split!r}")
            for count in per_condition.values():
                if count < 0:
                    raise ValueError("sequence counts must be >= 0")
        validate_profiles(self.profiles)

    @property
    def separation(self) -> float:
        return PRESETS[self.preset][0]

    @property
    def subject_scale(self) -> float:
        return PRESETS[self.preset][1]


def config_from_dict(payload: dict) -> GeneratorConfig:
    kwargs = {}
    if "counts" in payload:
        kwargs["counts"] = {
            split: {Condition(c): int(n) for c, n in per.items()}
            for split, per in payload["counts"].items()}
    for key in ("fps", "duration", "iris_radius_px", "image_px", "seed", "preset"):
        if key in payload:
            kwargs[key] = payload[key]
    if "profiles" in payload:
        kwargs["profiles"] = {
            Condition(c): ClassProfile(condition=Condition(c), **params)
            for c, params in payload["profiles"].items()}
    return GeneratorConfig(**kwargs)


def config_from_json(path: str | Path) -> GeneratorConfig:
    return config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def balanced_counts(train: int, validation: int, test: int) -> dict[str, dict[Condition, int]]:
    """Equal per-condition counts for every split."""
    return {
        "train": {c: train for c in Condition},
        "validation": {c: validation for c in Condition},
        "test": {c: test for c in Condition},
    }


def _separated_profile(profile: ClassProfile, control: ClassProfile,
                       separation: float) -> ClassProfile:
    gap = profile.drift_slope - control.drift_slope
    return replace(profile, drift_slope=control.drift_slope + gap * separation)


def generate_sequence(profile: ClassProfile, fps: float, duration: float,
                      rng: np.random.Generator, *, iris_radius_px: float = 30.0,
                      image_px: int = 128, subject_scale: float = 1.0,
                      seq_id: str = "seq", eye: Eye = Eye.MONO) -> EyeSequence:
    """One synthetic capture session.

    The ratio curve is ``base + amplitude*(1 - exp(-t/tau)) + drift*t``
    plus Gaussian frame noise, with subject-level offsets drawn once per
    sequence. Pupil radii follow the ratio on a mildly jittered iris;
    blinks arrive as Poisson events masking 3 to 7 consecutive frames;
    centres follow a random walk whose step size reflects how erratic
    the condition is.
    """
    if duration < 5.0:
        raise ValueError("duration must be at least 5 s")
    n = int(round(duration * fps))
    t = np.arange(n) / fps
    base = profile.base_ratio + rng.normal(0.0, SUBJECT_BASE_SIGMA * subject_scale)
    drift = profile.drift_slope + rng.normal(0.0, SUBJECT_DRIFT_SIGMA * subject_scale)
    amplitude = profile.adapt_amplitude + rng.normal(0.0, SUBJECT_AMPLITUDE_SIGMA * subject_scale)
    noise_scale = float(np.exp(rng.normal(0.0, SUBJECT_NOISE_LOG_SIGMA * subject_scale)))

    curve = base + amplitude * (1.0 - np.exp(-t / profile.adapt_tau)) + drift * t
    ratio_x = curve + rng.normal(0.0, profile.noise_sigma * noise_scale, n)
    iris_r = iris_radius_px * (1.0 + rng.normal(0.0, IRIS_JITTER_SIGMA, n))
    iris_r = np.maximum(iris_r, 1.0)
    ratio_y = ratio_x + rng.normal(0.0, profile.noise_sigma * noise_scale * Y_AXIS_NOISE_FACTOR, n)
    ratio_x = np.clip(ratio_x, RATIO_MIN, RATIO_MAX)
    ratio_y = np.clip(ratio_y, RATIO_MIN, RATIO_MAX)

    margin = iris_radius_px + 6.0
    start = image_px / 2.0 + rng.normal(0.0, 2.0, 2)
    steps = rng.normal(0.0, profile.centre_jitter_sigma, (n, 2))
    centres = np.clip(start + np.cumsum(steps, axis=0), margin, image_px - margin)

    valid = np.ones(n, dtype=bool)
    n_blinks = rng.poisson(profile.blink_rate * duration)
    for _ in range(n_blinks):
        start_frame = int(rng.integers(0, n))
        length = int(rng.integers(BLINK_FRAMES[0], BLINK_FRAMES[1] + 1))
        valid[start_frame:start_frame + length] = False

    frames = []
    for i in range(n):
        if valid[i]:
            frames.append(FrameGeometry(
                t=float(t[i]),
                pupil_rx=float(ratio_x[i] * iris_r[i]),
                pupil_ry=float(ratio_y[i] * iris_r[i]),
                iris_rx=float(iris_r[i]), iris_ry=float(iris_r[i]),
                pupil_cx=float(centres[i, 0]), pupil_cy=float(centres[i, 1]),
                iris_cx=float(centres[i, 0]), iris_cy=float(centres[i, 1]),
                valid=True))
        else:
            frames.append(FrameGeometry(
                t=float(t[i]), pupil_rx=0.0, pupil_ry=0.0, iris_rx=0.0, iris_ry=0.0,
                pupil_cx=float(centres[i, 0]), pupil_cy=float(centres[i, 1]),
                iris_cx=float(centres[i, 0]), iris_cy=float(centres[i, 1]),
                valid=False))
    return EyeSequence(id=seq_id, eye=eye, condition=profile.condition,
                       fps=fps, frames=frames)


def generate_split_sequences(config: GeneratorConfig) -> dict[str, list[EyeSequence]]:
    """All sequences of a dataset, keyed by split.

    Sequence ``i`` (in the fixed split / condition / count enumeration
    order) draws from a stream seeded by ``(config.seed, i)``, so any
    subset regenerates identically.
    """
    control = config.profiles[Condition.CONTROL]
    by_split: dict[str, list[EyeSequence]] = {}
    index = 0
    for split in SPLITS:
        sequences = []
        for condition in (Condition.CONTROL, Condition.ALCOHOL, Condition.DRUG,
                          Condition.SLEEP):
            profile = _separated_profile(config.profiles[condition], control,
                                         config.separation)
            for i in range(config.counts.get(split, {}).get(condition, 0)):
                rng = np.random.default_rng(np.random.SeedSequence([config.seed, index]))
                sequences.append(generate_sequence(
                    profile, config.fps, config.duration, rng,
                    iris_radius_px=config.iris_radius_px, image_px=config.image_px,
                    subject_scale=config.subject_scale,
                    seq_id=f"{split}-{condition.value}-{i:04d}"))
                index += 1
        by_split[split] = sequences
    return by_split


def generate_dataset(config: GeneratorConfig, out_dir: str | Path) -> dict[str, Path]:
    """Write one geometry CSV per split; returns the file paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for split, sequences in generate_split_sequences(config).items():
        if not sequences:
            continue
        path = out_dir / f"{split}.csv"
        save_sequences(sequences, path)
        paths[split] = path
    if not paths:
        raise ValueError("config generates no sequences at all")
    return paths


def _fill_ellipse(labels: np.ndarray, cx: float, cy: float, rx: float, ry: float,
                  label: int, *, occlude_top_fraction: float = 0.0) -> None:
    if rx <= 0 or ry <= 0:
        return
    h, w = labels.shape
    ys = np.arange(h, dtype=np.float64)[:, None]
    xs = np.arange(w, dtype=np.float64)[None, :]
    inside = ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0
    if occlude_top_fraction > 0.0:
        cut = cy - ry + occlude_top_fraction * 2.0 * ry
        inside &= ys >= cut
    labels[inside] = label


def generate_mask_corpus(sequences: list[EyeSequence], out_dir: str | Path,
                         *, image_px: int = 128, seed: int = 0) -> Path:
    """Rasterise sequences into PGM label masks plus a manifest CSV.

    Drug sequences get a simulated droopy eyelid: the top fraction of
    the iris disc is erased. Invalid (blink) frames become empty masks.
    Returns the manifest path; mask paths inside it are relative to the
    manifest.
    """
    out_dir = Path(out_dir)
    masks_dir = out_dir / "masks"
    masks_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.csv"
    lines = ["id,eye,condition,t,mask_path"]
    for seq_index, seq in enumerate(sequences):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 15485863, seq_index]))
        occlusion = 0.0
        if seq.condition is Condition.DRUG:
            occlusion = float(rng.uniform(*DRUG_OCCLUSION_RANGE))
        for i, frame in enumerate(seq.frames):
            labels = np.zeros((image_px, image_px), dtype=np.uint8)
            if frame.valid:
                _fill_ellipse(labels, frame.iris_cx, frame.iris_cy,
                              frame.iris_rx, frame.iris_ry, LABEL_IRIS,
                              occlude_top_fraction=occlusion)
                _fill_ellipse(labels, frame.pupil_cx, frame.pupil_cy,
                              frame.pupil_rx, frame.pupil_ry, LABEL_PUPIL)
            rel = f"masks/{seq.id}/frame_{i:04d}.pgm"
            write_pgm(LabelMask(width=image_px, height=image_px, labels=labels),
                      out_dir / rel)
            lines.append(f"{seq.id},{seq.eye.value},{seq.condition.value},"
                         f"{frame.t:.6f},{rel}")
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest
