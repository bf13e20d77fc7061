from dataclasses import replace

import numpy as np
import pytest

from pupilffd.circlefit import localize_eye, read_pgm
from pupilffd.core import Condition, grand_mean, load_sequences, ratio_series
from pupilffd.evaluate import centre_dispersion
from pupilffd.features import linear_trend, preprocess_ratios
from pupilffd.synth import (
    DEFAULT_PROFILES,
    GeneratorConfig,
    balanced_counts,
    config_from_dict,
    generate_dataset,
    generate_mask_corpus,
    generate_sequence,
    generate_split_sequences,
    validate_profiles,
)
from util import make_series


def rng_for(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def quiet_profile(condition=Condition.CONTROL, **overrides):
    base = dict(condition=condition, base_ratio=0.35, adapt_amplitude=0.0,
                adapt_tau=0.8, drift_slope=0.0, noise_sigma=0.0, blink_rate=0.0,
                centre_jitter_sigma=0.0)
    base.update(overrides)
    return type(DEFAULT_PROFILES[Condition.CONTROL])(**base)


class TestGenerateSequence:
    def test_all_stochastic_terms_off_gives_constant_ratio(self):
        seq = generate_sequence(quiet_profile(), 15.0, 10.0, rng_for(0, 0),
                                subject_scale=0.0)
        series = ratio_series(seq, "x")
        assert series.mask.all()
        np.testing.assert_allclose(series.values, 0.35, atol=1e-12)

    def test_drift_recovered_after_transient(self):
        seq = generate_sequence(quiet_profile(drift_slope=0.004), 15.0, 10.0,
                                rng_for(0, 1), subject_scale=0.0)
        series = ratio_series(seq, "x")
        tail = make_series(series.values[45:], t0=3.0, dt=series.dt)
        assert linear_trend(tail).m == pytest.approx(0.004, abs=1e-6)

    def test_blinks_mask_runs_of_frames(self):
        seq = generate_sequence(quiet_profile(blink_rate=1.0), 15.0, 10.0,
                                rng_for(3, 0), subject_scale=0.0)
        valid = np.array([f.valid for f in seq.frames])
        assert not valid.all()
        # invalid frames carry zero radii
        for frame in seq.frames:
            if not frame.valid:
                assert frame.pupil_rx == frame.iris_rx == 0.0

    def test_pupil_never_exceeds_iris_in_valid_frames(self):
        for condition, profile in DEFAULT_PROFILES.items():
            for i in range(20):
                seq = generate_sequence(profile, 15.0, 10.0, rng_for(11, i))
                for frame in seq.frames:
                    if frame.valid:
                        assert frame.pupil_rx <= frame.iris_rx
                        assert frame.pupil_ry <= frame.iris_ry

    def test_grand_mean_ordering_default_profiles(self):
        # calibration target: alcohol > drug > sleep > control beyond the
        # adaptation transient, checked over three seeds
        for seed in (0, 1, 2):
            curves = {}
            for condition, profile in DEFAULT_PROFILES.items():
                series = []
                for i in range(200):
                    seq = generate_sequence(profile, 15.0, 10.0,
                                            rng_for(seed, 1000 * seed + i))
                    rx, _ = preprocess_ratios(seq)
                    series.append(rx)
                curves[condition] = grand_mean(series)
            tail = slice(46, 150)  # t > 3 s
            alcohol = curves[Condition.ALCOHOL].values[tail]
            drug = curves[Condition.DRUG].values[tail]
            sleep = curves[Condition.SLEEP].values[tail]
            control = curves[Condition.CONTROL].values[tail]
            assert np.all(alcohol > drug)
            assert np.all(drug > sleep)
            assert np.all(sleep > control)


class TestProfiles:
    def test_default_profiles_validate(self):
        validate_profiles(DEFAULT_PROFILES)

    def test_drift_ordering_enforced(self):
        broken = dict(DEFAULT_PROFILES)
        broken[Condition.ALCOHOL] = replace(
            broken[Condition.ALCOHOL],
            drift_slope=broken[Condition.CONTROL].drift_slope)
        with pytest.raises(ValueError, match="alcohol > drug > sleep > control"):
            validate_profiles(broken)

    def test_profile_invariants(self):
        with pytest.raises(ValueError, match="adapt_tau"):
            quiet_profile(adapt_tau=0.0)
        with pytest.raises(ValueError, match="noise_sigma"):
            quiet_profile(noise_sigma=-0.1)


class TestGenerateDataset:
    def test_default_counts_match_reference_shape(self, tmp_path):
        config = GeneratorConfig(seed=5)
        paths = generate_dataset(config, tmp_path)
        totals = {}
        for split, path in paths.items():
            sequences = load_sequences(path)
            totals[split] = len(sequences)
        assert totals == {"train": 625, "validation": 88, "test": 797}
        test_seqs = load_sequences(paths["test"])
        n_unfit = sum(1 for s in test_seqs if s.condition is not Condition.CONTROL)
        assert n_unfit == 109  # 13.7% unfit share

    def test_same_seed_byte_identical(self, tmp_path):
        config = GeneratorConfig(counts=balanced_counts(3, 1, 2), seed=9)
        a = generate_dataset(config, tmp_path / "a")
        b = generate_dataset(config, tmp_path / "b")
        for split in a:
            assert a[split].read_bytes() == b[split].read_bytes()

    def test_single_sequence_config(self, tmp_path):
        counts = {"train": {Condition.CONTROL: 1}, "validation": {}, "test": {}}
        paths = generate_dataset(GeneratorConfig(counts=counts, seed=2), tmp_path)
        assert set(paths) == {"train"}
        sequences = load_sequences(paths["train"])
        assert len(sequences) == 1
        assert len(sequences[0]) == 150

    def test_subset_reproducible_from_seed_and_index(self):
        config = GeneratorConfig(counts=balanced_counts(2, 0, 0), seed=13)
        full = generate_split_sequences(config)["train"]
        # sequence #3 is the second drug sequence wait: order is control x2,
        # alcohol x2, drug x2, sleep x2 -> index 4 is the first drug sequence
        control = config.profiles[Condition.CONTROL]
        profile = config.profiles[Condition.DRUG]
        regenerated = generate_sequence(
            profile, config.fps, config.duration, rng_for(13, 4),
            iris_radius_px=config.iris_radius_px, image_px=config.image_px,
            subject_scale=config.subject_scale, seq_id=full[4].id)
        assert full[4].condition is Condition.DRUG
        assert [f.pupil_rx for f in regenerated.frames] == [
            f.pupil_rx for f in full[4].frames]

    def test_config_from_dict(self):
        config = config_from_dict({
            "counts": {"train": {"control": 4}},
            "seed": 77, "preset": "easy",
            "profiles": {c.value: {
                "base_ratio": p.base_ratio, "adapt_amplitude": p.adapt_amplitude,
                "adapt_tau": p.adapt_tau, "drift_slope": p.drift_slope,
                "noise_sigma": p.noise_sigma, "blink_rate": p.blink_rate,
                "centre_jitter_sigma": p.centre_jitter_sigma,
            } for c, p in DEFAULT_PROFILES.items()},
        })
        assert config.seed == 77
        assert config.separation == 3.0
        assert config.counts["train"][Condition.CONTROL] == 4


class TestMaskCorpus:
    def test_round_trip_radii(self, tmp_path):
        seq = generate_sequence(quiet_profile(base_ratio=0.4), 15.0, 10.0,
                                rng_for(1, 0), subject_scale=0.0)
        manifest = generate_mask_corpus([seq], tmp_path, image_px=128, seed=1)
        lines = manifest.read_text().strip().splitlines()
        assert len(lines) == 151
        first_mask = read_pgm(tmp_path / lines[1].split(",")[-1])
        geometry = localize_eye(first_mask)
        frame = seq.frames[0]
        assert geometry.valid
        assert abs(geometry.iris_rx - frame.iris_rx) <= 1.0
        assert abs(geometry.pupil_rx - frame.pupil_rx) <= 1.0

    def test_drug_occlusion_shrinks_vertical_iris(self, tmp_path):
        profile = quiet_profile(condition=Condition.DRUG, base_ratio=0.4)
        seq = generate_sequence(profile, 15.0, 10.0, rng_for(2, 0), subject_scale=0.0)
        manifest = generate_mask_corpus([seq], tmp_path, image_px=128, seed=2)
        line = manifest.read_text().strip().splitlines()[1]
        geometry = localize_eye(read_pgm(tmp_path / line.split(",")[-1]))
        assert geometry.iris_ry < geometry.iris_rx

    def test_corpus_row_count(self, tmp_path):
        profile = quiet_profile()
        sequences = [
            generate_sequence(profile, 15.0, 10.0, rng_for(4, i),
                              subject_scale=0.0, seq_id=f"s{i}")
            for i in range(2)
        ]
        # 100 frames total: trim to 50 frames per sequence
        for seq in sequences:
            seq.frames = seq.frames[:50]
        manifest = generate_mask_corpus(sequences, tmp_path, image_px=128, seed=4)
        assert len(manifest.read_text().strip().splitlines()) == 101


class TestCentreBehaviour:
    def test_control_has_smallest_dispersion(self):
        sequences = []
        for condition, profile in DEFAULT_PROFILES.items():
            for i in range(30):
                sequences.append(generate_sequence(profile, 15.0, 10.0,
                                                   rng_for(21, 100 * ord(condition.value[0]) + i)))
        dispersion = centre_dispersion(sequences)
        control = dispersion[Condition.CONTROL]
        for condition in (Condition.ALCOHOL, Condition.DRUG, Condition.SLEEP):
            assert control < dispersion[condition]
