import json
from fractions import Fraction

import numpy as np
import pytest

from pupilffd.core import CONDITION_ORDER, Condition
from pupilffd.evaluate import (
    ConfusionMatrix,
    behavioural_report,
    build_report,
    centre_dispersion,
    class_metrics,
    confusion_matrix,
    group_fit_unfit,
    render_report,
    report_table,
)
from pupilffd.features import build_baselines
from util import make_sequence

CLASSES4 = tuple(c.value for c in CONDITION_ORDER)


def cm4(counts) -> ConfusionMatrix:
    return ConfusionMatrix(classes=CLASSES4, counts=np.asarray(counts))


class TestConfusionMatrix:
    def test_all_correct_diagonal(self):
        pairs = [(c, c) for c in CONDITION_ORDER for _ in range(10)]
        cm = confusion_matrix(pairs)
        assert np.array_equal(cm.counts, np.eye(4, dtype=int) * 10)

    def test_single_off_diagonal(self):
        cm = confusion_matrix([(Condition.CONTROL, Condition.ALCOHOL)])
        expected = np.zeros((4, 4), dtype=int)
        expected[0, 1] = 1
        assert np.array_equal(cm.counts, expected)

    def test_order_invariant(self):
        rng = np.random.default_rng(3)
        pairs = [(CONDITION_ORDER[rng.integers(4)], CONDITION_ORDER[rng.integers(4)])
                 for _ in range(200)]
        a = confusion_matrix(pairs)
        b = confusion_matrix(pairs[::-1])
        assert np.array_equal(a.counts, b.counts)

    def test_empty_input(self):
        with pytest.raises(ValueError):
            confusion_matrix([])


class TestClassMetrics:
    def test_sensitivity_formula(self):
        # control: TP=70, FN=30 spread over other predictions
        cm = cm4([[70, 10, 10, 10], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
        assert class_metrics(cm, "control").sensitivity == pytest.approx(0.70)

    def test_perfect_two_class_block(self):
        cm = cm4([[50, 0, 0, 0], [0, 50, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
        for target in ("control", "alcohol"):
            m = class_metrics(cm, target)
            assert (m.sensitivity, m.specificity, m.f1, m.accuracy) == (1, 1, 1, 1)

    def test_hand_evaluated_case(self):
        # one-vs-rest for control: TP=8, FN=6, FP=4, TN=82
        cm = cm4([[8, 2, 2, 2], [2, 30, 0, 0], [1, 0, 30, 0], [1, 0, 0, 22]])
        m = class_metrics(cm, "control")
        assert m.sensitivity == pytest.approx(8 / 14)
        assert m.specificity == pytest.approx(82 / 86)
        assert m.f1 == pytest.approx(8 / 13)
        assert m.accuracy == pytest.approx(0.90)

    def test_exact_rational_agreement(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            counts = rng.integers(0, 40, size=(4, 4))
            counts[0, 0] += 1  # keep the matrix non-empty
            cm = cm4(counts)
            for i, target in enumerate(CLASSES4):
                tp = int(counts[i, i])
                fn = int(counts[i].sum() - tp)
                fp = int(counts[:, i].sum() - tp)
                tn = int(counts.sum() - tp - fn - fp)
                m = class_metrics(cm, target)
                assert m.sensitivity == (float(Fraction(tp, tp + fn)) if tp + fn else 0.0)
                assert m.specificity == (float(Fraction(tn, tn + fp)) if tn + fp else 0.0)
                assert m.f1 == (float(Fraction(2 * tp, 2 * tp + fp + fn))
                                if 2 * tp + fp + fn else 0.0)
                assert m.accuracy == float(Fraction(tp + tn, tp + fp + fn + tn))

    def test_zero_over_zero_reports_zero(self):
        cm = cm4([[10, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
        m = class_metrics(cm, "alcohol")
        assert m.sensitivity == 0.0
        assert m.f1 == 0.0


class TestGroupFitUnfit:
    def test_diagonal_grouping(self):
        cm = cm4(np.diag([10, 7, 5, 3]))
        grouped = group_fit_unfit(cm)
        assert np.array_equal(grouped.counts, [[10, 0], [0, 15]])

    def test_within_unfit_confusion_counts_as_correct(self):
        counts = np.zeros((4, 4), dtype=int)
        counts[2, 3] = 5  # drug predicted as sleep
        cm = group_fit_unfit(cm4(counts))
        assert cm.counts[1, 1] == 5
        assert cm.counts[1, 0] == 0

    def test_total_preserved(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            counts = rng.integers(0, 50, size=(4, 4))
            cm = cm4(counts)
            assert group_fit_unfit(cm).total == cm.total

    def test_wrong_class_set(self):
        cm = ConfusionMatrix(classes=("fit", "unfit"), counts=np.eye(2, dtype=int))
        with pytest.raises(ValueError):
            group_fit_unfit(cm)

    def test_two_class_sensitivity_specificity_duality(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            counts = rng.integers(0, 60, size=(4, 4)) + 1
            cm2 = group_fit_unfit(cm4(counts))
            fit = class_metrics(cm2, "fit")
            unfit = class_metrics(cm2, "unfit")
            assert fit.sensitivity == pytest.approx(unfit.specificity)
            assert fit.specificity == pytest.approx(unfit.sensitivity)
            assert fit.accuracy == pytest.approx(
                np.trace(cm2.counts) / cm2.counts.sum())


class TestBehaviouralReport:
    def test_grand_means_match_hand_computation(self, tmp_path):
        sequences = []
        for condition in CONDITION_ORDER:
            sequences.append(make_sequence(np.full(150, 0.3), condition=condition,
                                           seq_id=f"{condition.value}-a"))
            sequences.append(make_sequence(np.full(150, 0.5), condition=condition,
                                           seq_id=f"{condition.value}-b"))
        paths = behavioural_report(sequences, None, tmp_path)
        ratio_file = tmp_path / "ratio_x.csv"
        assert ratio_file in paths
        lines = ratio_file.read_text().strip().splitlines()
        assert lines[0] == "time,control,alcohol,drug,sleep"
        first = lines[1].split(",")
        np.testing.assert_allclose([float(v) for v in first[1:]], 0.4)

    def test_centre_distance_345(self, tmp_path):
        sequences = []
        for condition in CONDITION_ORDER:
            seq = make_sequence(np.full(150, 0.4), condition=condition,
                                seq_id=f"{condition.value}-0")
            seq.frames = [
                type(f)(**{**f.__dict__, "pupil_cx": 3.0, "pupil_cy": 4.0,
                           "iris_cx": 3.0, "iris_cy": 4.0})
                for f in seq.frames
            ]
            sequences.append(seq)
        behavioural_report(sequences, None, tmp_path)
        lines = (tmp_path / "centre_distance_pupil.csv").read_text().strip().splitlines()
        values = [float(r.split(",")[1]) for r in lines[1:]]
        np.testing.assert_allclose(values, 5.0)

    def test_empty_class_is_an_error(self, tmp_path):
        sequences = [make_sequence(np.full(150, 0.4), condition=Condition.CONTROL)]
        with pytest.raises(ValueError, match="alcohol"):
            behavioural_report(sequences, None, tmp_path)

    def test_baseline_lines_file(self, tmp_path):
        sequences = [make_sequence(np.linspace(0.3, 0.4, 150), condition=c,
                                   seq_id=f"{c.value}-0")
                     for c in CONDITION_ORDER]
        baselines = build_baselines(sequences)
        behavioural_report(sequences, baselines, tmp_path)
        lines = (tmp_path / "representative_lines.csv").read_text().strip().splitlines()
        assert len(lines) == 5

    def test_empty_input(self, tmp_path):
        with pytest.raises(ValueError):
            behavioural_report([], None, tmp_path)


class TestCentreDispersion:
    def test_steadier_class_scores_lower(self):
        rng = np.random.default_rng(17)
        sequences = []
        for condition, sigma in zip(CONDITION_ORDER, (0.1, 2.0, 2.0, 2.0)):
            for i in range(5):
                seq = make_sequence(np.full(150, 0.4), condition=condition,
                                    seq_id=f"{condition.value}-{i}")
                walk = np.cumsum(rng.normal(0, sigma, (150, 2)), axis=0) + 64.0
                seq.frames = [
                    type(f)(**{**f.__dict__, "pupil_cx": float(w[0]),
                               "pupil_cy": float(w[1])})
                    for f, w in zip(seq.frames, walk)
                ]
                sequences.append(seq)
        dispersion = centre_dispersion(sequences)
        control = dispersion[Condition.CONTROL]
        assert all(control < dispersion[c] for c in CONDITION_ORDER[1:])


class TestRenderReport:
    def test_perfect_classifier_all_100(self, tmp_path):
        cm = cm4(np.diag([40, 30, 20, 10]))
        json_path, text_path = render_report(cm, group_fit_unfit(cm), tmp_path)
        text = text_path.read_text()
        assert "100.0%" in text
        report = json.loads(json_path.read_text())
        for name in CLASSES4:
            for value in report["four_class"]["metrics"][name].values():
                assert value == 1.0

    def test_json_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(19)
        cm = cm4(rng.integers(0, 50, (4, 4)) + 1)
        json_path, _ = render_report(cm, group_fit_unfit(cm), tmp_path,
                                     metadata={"family": "mlp", "seed": 3})
        raw = json_path.read_text()
        reserialized = json.dumps(json.loads(raw), indent=2, sort_keys=True) + "\n"
        assert raw == reserialized

    def test_table_row_count(self):
        cm = cm4(np.diag([5, 5, 5, 5]))
        report = build_report(cm, group_fit_unfit(cm))
        table = report_table(report)
        class_rows = [line for line in table.splitlines()
                      if line.split(" ")[0].rstrip() in CLASSES4 + ("fit", "unfit")]
        assert len(class_rows) == 6

    def test_per_class_mean_accuracy_is_balanced_recall(self):
        cm2 = ConfusionMatrix(classes=("fit", "unfit"),
                              counts=np.array([[482, 206], [27, 82]]))
        report = build_report(cm4(np.diag([1, 1, 1, 1])), cm2)
        fu = report["fit_unfit"]
        assert fu["per_class_mean_accuracy"] == pytest.approx(
            0.5 * (482 / 688 + 82 / 109))
