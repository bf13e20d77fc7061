"""Dataset-level orchestration: feature extraction with optional eye
fusion, plus the pipeline configuration shared by the CLI."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from pupilffd.core import (
    CANONICAL_LENGTH,
    DEFAULT_MAX_GAP,
    DEFAULT_MAX_INVALID_FRACTION,
    Condition,
    EyeSequence,
    UnusableSequenceError,
)
from pupilffd.features import (
    FeatureVector,
    RepresentativeCurve,
    build_feature_vector,
)

logger = logging.getLogger(__name__)

FUSION_MODES = ("mean", "none")


@dataclass
class PipelineConfig:
    """Knobs shared across the pipeline stages, loadable from JSON."""

    target_len: int = CANONICAL_LENGTH
    max_gap: int = DEFAULT_MAX_GAP
    max_invalid_fraction: float = DEFAULT_MAX_INVALID_FRACTION
    fusion: str = "mean"
    seed: int = 0
    paths: dict[str, str] = field(default_factory=dict)
    generator: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.fusion not in FUSION_MODES:
            raise ValueError(f"fusion must be one of {FUSION_MODES}, got {self.fusion!r}")
        if self.target_len < 2 or self.max_gap < 0:
            raise ValueError("target_len must be >= 2 and max_gap >= 0")


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    core = payload.get("core", {})
    features = payload.get("features", {})
    return PipelineConfig(
        target_len=core.get("target_len", CANONICAL_LENGTH),
        max_gap=core.get("max_gap", DEFAULT_MAX_GAP),
        max_invalid_fraction=core.get("max_invalid_fraction", DEFAULT_MAX_INVALID_FRACTION),
        fusion=features.get("fusion", "mean"),
        seed=payload.get("seed", 0),
        paths=payload.get("paths", {}),
        generator=payload.get("generator", {}),
        models=payload.get("models", {}),
    )


def extract_features(sequences: list[EyeSequence],
                     baselines: dict[Condition, RepresentativeCurve],
                     *, fusion: str = "mean",
                     target_len: int = CANONICAL_LENGTH,
                     max_gap: int = DEFAULT_MAX_GAP,
                     max_invalid_fraction: float = DEFAULT_MAX_INVALID_FRACTION,
                     ) -> list[FeatureVector]:
    """Feature vectors for a batch of sequences.

    With ``fusion="mean"``, the left and right eyes of one capture id
    are averaged element-wise into a single vector (a lone usable eye
    stands on its own); ``fusion="none"`` keeps one vector per (id, eye)
    under an ``id#eye`` label. Unusable sequences are skipped with a
    tally in the log.
    """
    if fusion not in FUSION_MODES:
        raise ValueError(f"fusion must be one of {FUSION_MODES}, got {fusion!r}")
    per_id: dict[str, list[tuple[EyeSequence, FeatureVector]]] = {}
    ordered_ids: list[str] = []
    n_skipped = 0
    for seq in sequences:
        try:
            fv = build_feature_vector(seq, baselines, target_len=target_len,
                                      max_gap=max_gap,
                                      max_invalid_fraction=max_invalid_fraction)
        except UnusableSequenceError as exc:
            logger.warning("skipping sequence %s (%s): %s", seq.id, seq.eye.value, exc)
            n_skipped += 1
            continue
        if seq.id not in per_id:
            ordered_ids.append(seq.id)
        per_id.setdefault(seq.id, []).append((seq, fv))
    if n_skipped:
        logger.warning("extract_features: skipped %d unusable sequence(s)", n_skipped)

    vectors: list[FeatureVector] = []
    for seq_id in ordered_ids:
        entries = per_id[seq_id]
        if fusion == "none" or len(entries) == 1:
            for seq, fv in entries:
                label = seq_id if len(entries) == 1 else f"{seq_id}#{seq.eye.value}"
                vectors.append(FeatureVector(id=label, condition=fv.condition,
                                             values=fv.values))
            continue
        conditions = {fv.condition for _, fv in entries}
        if len(conditions) != 1:
            raise ValueError(f"id {seq_id}: cannot fuse eyes with different conditions")
        stacked = sum(fv.values for _, fv in entries) / len(entries)
        vectors.append(FeatureVector(id=seq_id, condition=entries[0][1].condition,
                                     values=stacked))
    return vectors
