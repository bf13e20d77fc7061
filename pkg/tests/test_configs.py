"""The shipped config files must stay in sync with the code defaults."""
from pathlib import Path

import pytest

from pupilffd.classifiers import FAMILY_DEFAULTS, spec_from_config
from pupilffd.pipeline import load_pipeline_config
from pupilffd.synth import DEFAULT_COUNTS, DEFAULT_PROFILES, config_from_json

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize("family", sorted(FAMILY_DEFAULTS))
def test_models_json_matches_code_defaults(family):
    spec = spec_from_config(CONFIG_DIR / "models.json", family)
    assert spec.hyperparameters == FAMILY_DEFAULTS[family]


def test_generator_json_matches_code_defaults():
    config = config_from_json(CONFIG_DIR / "generator.json")
    assert config.counts == {split: dict(DEFAULT_COUNTS[split])
                             for split in DEFAULT_COUNTS}
    assert config.profiles == DEFAULT_PROFILES
    assert config.preset == "moderate"
    assert config.fps == 15.0
    assert config.duration == 10.0


def test_pipeline_json_parses():
    cfg = load_pipeline_config(CONFIG_DIR / "pipeline.json")
    assert cfg.target_len == 150
    assert cfg.max_gap == 7
    assert cfg.fusion == "mean"
    assert cfg.generator["preset"] == "moderate"
