"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`. The paper-shaped
end-to-end runs (criteria 7 and 8) share a module-scoped fixture; the
easy-preset sanity runs (criteria 6 and 9) share another.
"""
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import pytest

from pupilffd import pipeline, synth
from pupilffd.circlefit import fit_circle_lsq, localize_batch
from pupilffd.classifiers import Dataset, default_spec, load_model, save_model, train
from pupilffd.core import (
    CONDITION_ORDER,
    Condition,
    grand_mean,
    load_sequences,
)
from pupilffd.evaluate import (
    ConfusionMatrix,
    centre_dispersion,
    class_metrics,
    confusion_matrix,
    group_fit_unfit,
)
from pupilffd.features import (
    VECTOR_LENGTH,
    Line3D,
    RepresentativeCurve,
    build_baselines,
    build_feature_vector,
    linear_trend,
    moving_trend,
    skew_distance,
)
from pupilffd.classifiers.mlp import init_mlp
from oracles import skew_distance_bruteforce, trend_normal_equations
from util import make_sequence, make_series

SEEDS = (0, 1, 2)


@dataclass
class PaperRun:
    seed: int
    sequences: dict
    gbm_cm4: ConfusionMatrix
    mlp_cm4: ConfusionMatrix
    wall_time: float


def _evaluate(model, test: Dataset) -> ConfusionMatrix:
    proba = model.predict_proba(test.X)
    pred = np.argmax(proba, axis=1)
    pairs = [(fv.condition, CONDITION_ORDER[p]) for fv, p in zip(test.vectors, pred)]
    return confusion_matrix(pairs)


@pytest.fixture(scope="module")
def paper_runs():
    """Three end-to-end runs at the reference dataset shape, moderate preset."""
    runs = []
    for seed in SEEDS:
        t0 = time.time()
        config = synth.GeneratorConfig(seed=seed, preset="moderate")
        by_split = synth.generate_split_sequences(config)
        baselines = build_baselines(by_split["train"])
        train_data = Dataset(pipeline.extract_features(by_split["train"], baselines))
        test_data = Dataset(pipeline.extract_features(by_split["test"], baselines))
        gbm = train(default_spec("gradient_boosting", seed=seed), train_data)
        mlp = train(default_spec("mlp", seed=seed), train_data)
        runs.append(PaperRun(
            seed=seed,
            sequences=by_split,
            gbm_cm4=_evaluate(gbm, test_data),
            mlp_cm4=_evaluate(mlp, test_data),
            wall_time=time.time() - t0,
        ))
    return runs


@pytest.fixture(scope="module")
def easy_run():
    """Full-size training of all three families on the easy preset."""
    config = synth.GeneratorConfig(
        counts={"train": {c: 500 for c in Condition},
                "validation": {c: 0 for c in Condition},
                "test": {c: 125 for c in Condition}},
        seed=0, preset="easy")
    by_split = synth.generate_split_sequences(config)
    baselines = build_baselines(by_split["train"])
    train_data = Dataset(pipeline.extract_features(by_split["train"], baselines))
    test_data = Dataset(pipeline.extract_features(by_split["test"], baselines))
    models = {family: train(default_spec(family, seed=0), train_data)
              for family in ("random_forest", "gradient_boosting", "mlp")}
    return models, test_data


def test_criterion_1_least_squares_trend():
    rng = np.random.default_rng(101)
    t0 = time.time()
    for _ in range(100):
        n = int(rng.integers(10, 200))
        m_true = float(rng.uniform(-5, 5))
        b_true = float(rng.uniform(-5, 5))
        series = make_series(m_true * np.arange(n) / 15.0 + b_true)
        trend = linear_trend(series)
        assert abs(trend.m - m_true) < 1e-9
        assert abs(trend.b - b_true) < 1e-9
    for _ in range(1000):
        n = int(rng.integers(5, 150))
        series = make_series(rng.normal(0.0, 1.0, n))
        m_ref, b_ref = trend_normal_equations(np.arange(n) / 15.0, series.values)
        trend = linear_trend(series)
        assert abs(trend.m - m_ref) < 1e-9
        assert abs(trend.b - b_ref) < 1e-9
    elapsed = time.time() - t0
    assert elapsed < 1.0
    print(f"\n[PASS] criterion 1: trend exact on 100 affine + 1000 noisy series "
          f"vs normal-equation oracle ({elapsed:.2f}s)")


def test_criterion_2_skew_distance_oracle():
    rng = np.random.default_rng(202)
    t0 = time.time()
    n_parallel = 0
    n_total = 0
    worst = 0.0
    while n_total < 1000:
        p_r = np.array([0.0, *rng.uniform(-3, 3, 2)])
        p_s = np.array([0.0, *rng.uniform(-3, 3, 2)])
        v_r = np.array([1.0, *rng.uniform(-1.2, 1.2, 2)])
        if n_parallel < 50 and n_total % 20 == 0:
            v_s = v_r.copy()
            n_parallel += 1
        else:
            v_s = np.array([1.0, *rng.uniform(-1.2, 1.2, 2)])
            cross = np.cross(v_r, v_s)
            if np.linalg.norm(cross) < 0.2 * np.linalg.norm(v_r) * np.linalg.norm(v_s):
                continue
        got = skew_distance(Line3D(tuple(p_r), tuple(v_r)),
                            Line3D(tuple(p_s), tuple(v_s)))
        ref = skew_distance_bruteforce(p_r, v_r, p_s, v_s)
        worst = max(worst, abs(got - ref))
        n_total += 1
    elapsed = time.time() - t0
    assert worst < 1e-4
    assert n_parallel >= 50
    assert elapsed < 5.0
    print(f"\n[PASS] criterion 2: skew distance vs brute-force oracle on 1000 pairs "
          f"({n_parallel} parallel), worst |diff| {worst:.1e} ({elapsed:.2f}s)")


def test_criterion_3_circle_fit():
    rng = np.random.default_rng(303)
    t0 = time.time()
    n_good = 0
    for _ in range(500):
        r = float(rng.uniform(5, 40))
        cx, cy = rng.uniform(r + 5, 120 - r, 2)
        theta = rng.uniform(0, 2 * np.pi, 120)
        exact = np.column_stack([cx + r * np.cos(theta), cy + r * np.sin(theta)])
        clean = fit_circle_lsq(exact)
        assert abs(clean.r - r) < 1e-9
        assert abs(clean.cx - cx) < 1e-9
        assert abs(clean.cy - cy) < 1e-9
        noisy = fit_circle_lsq(exact + rng.normal(0, 0.5, exact.shape))
        if (abs(noisy.r - r) <= 0.5 and abs(noisy.cx - cx) <= 0.5
                and abs(noisy.cy - cy) <= 0.5):
            n_good += 1
    elapsed = time.time() - t0
    assert n_good >= 495
    assert elapsed < 5.0
    print(f"\n[PASS] criterion 3: circle fit exact noiseless, {n_good}/500 noisy fits "
          f"within 0.5 px ({elapsed:.2f}s)")


def test_criterion_4_feature_vector():
    rng = np.random.default_rng(404)
    baselines = {}
    for condition, level in zip(CONDITION_ORDER, (0.2, 0.6, 0.7, 0.8)):
        mean = make_series(np.full(150, level))
        baselines[condition] = RepresentativeCurve(
            condition=condition, mean_x=mean, mean_y=mean,
            line=Line3D((0.0, level, level), (1.0, 0.0, 0.0)), mu=level, sigma=0.01)
    pupil = rng.integers(15, 40, 150).astype(float)
    seq = make_sequence(pupil / 60.0, iris=60.0)
    fv_a = build_feature_vector(seq, baselines)
    fv_b = build_feature_vector(make_sequence(pupil / 60.0, iris=60.0), baselines)
    scaled = build_feature_vector(make_sequence(pupil / 60.0, iris=120.0), baselines)
    assert fv_a.values.shape == (VECTOR_LENGTH,)
    assert np.array_equal(fv_a.values, fv_b.values)
    assert np.max(np.abs(fv_a.values - scaled.values)) == 0.0
    slopes = moving_trend(make_series(rng.normal(0.4, 0.02, 150)), 15.0)
    assert len(slopes) == 19
    print("\n[PASS] criterion 4: 50-value vector, bit-identical across runs, "
          "radius-scale invariant (max diff 0), 19 moving-trend slopes")


def test_criterion_5_metric_formulas():
    rng = np.random.default_rng(505)
    classes = tuple(c.value for c in CONDITION_ORDER)
    for _ in range(20):
        counts = rng.integers(0, 60, (4, 4))
        counts[0, 0] += 1
        cm = ConfusionMatrix(classes=classes, counts=counts)
        for i, target in enumerate(classes):
            tp = int(counts[i, i])
            fn = int(counts[i].sum() - tp)
            fp = int(counts[:, i].sum() - tp)
            tn = int(counts.sum()) - tp - fn - fp
            m = class_metrics(cm, target)
            assert m.sensitivity == (float(Fraction(tp, tp + fn)) if tp + fn else 0.0)
            assert m.specificity == (float(Fraction(tn, tn + fp)) if tn + fp else 0.0)
            assert m.f1 == (float(Fraction(2 * tp, 2 * tp + fp + fn))
                            if 2 * tp + fp + fn else 0.0)
            assert m.accuracy == float(Fraction(tp + tn, tp + fp + fn + tn))
    for _ in range(100):
        counts = rng.integers(0, 80, (4, 4))
        counts[1, 1] += 1
        cm = ConfusionMatrix(classes=classes, counts=counts)
        assert group_fit_unfit(cm).total == cm.total
    print("\n[PASS] criterion 5: metrics exact vs rational arithmetic on 20 matrices; "
          "fit/unfit grouping preserves totals on 100 random matrices")


def test_criterion_6_classifier_sanity(easy_run):
    models, test_data = easy_run
    accuracies = {}
    for family, model in models.items():
        pred = np.argmax(model.predict_proba(test_data.X), axis=1)
        accuracies[family] = float(np.mean(pred == test_data.y))
        assert accuracies[family] >= 0.95, f"{family}: {accuracies[family]:.3f}"
    deviance = models["gradient_boosting"].impl.train_deviance
    assert len(deviance) == 1001
    assert np.all(np.diff(deviance) <= 1e-12)

    # gradient check at initialisation on a 10-sample batch
    rng = np.random.default_rng(606)
    X = rng.normal(0, 1, (10, VECTOR_LENGTH))
    onehot = np.zeros((10, 4))
    onehot[np.arange(10), rng.integers(0, 4, 10)] = 1.0
    net = init_mlp(VECTOR_LENGTH, (25, 10), 4, alpha=1e-5,
                   scaler_mean=np.zeros(VECTOR_LENGTH),
                   scaler_std=np.ones(VECTOR_LENGTH),
                   rng=np.random.default_rng(1))
    _, grad_w, grad_b = net.loss_and_grads(X, onehot)
    h = 1e-5
    worst = 0.0
    for params, grads in ((net.weights, grad_w), (net.biases, grad_b)):
        for p, g in zip(params, grads):
            flat = p.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up, _, _ = net.loss_and_grads(X, onehot)
                flat[i] = orig - h
                down, _, _ = net.loss_and_grads(X, onehot)
                flat[i] = orig
                numeric = (up - down) / (2 * h)
                analytic = g.ravel()[i]
                worst = max(worst, abs(numeric - analytic)
                            / max(1.0, abs(numeric), abs(analytic)))
    assert worst < 1e-4
    acc_text = ", ".join(f"{k} {v:.3f}" for k, v in accuracies.items())
    print(f"\n[PASS] criterion 6: easy-preset accuracy {acc_text} (all >= 0.95); "
          f"GBM deviance non-increasing over 1000 stages; "
          f"MLP gradient check worst rel err {worst:.1e}")


def test_criterion_7_paper_shaped_run(paper_runs):
    gbm_acc, mlp_acc, gbm_spec, mlp_spec = [], [], [], []
    for run in paper_runs:
        assert run.wall_time < 600.0, f"seed {run.seed} took {run.wall_time:.0f}s"
        gbm_acc.append(group_fit_unfit(run.gbm_cm4).overall_accuracy())
        mlp_acc.append(group_fit_unfit(run.mlp_cm4).overall_accuracy())
        gbm_spec.append(class_metrics(run.gbm_cm4, "control").specificity)
        mlp_spec.append(class_metrics(run.mlp_cm4, "control").specificity)
    assert np.mean(gbm_acc) >= 0.70
    assert np.mean(mlp_acc) >= 0.70
    assert np.mean(gbm_spec) >= 0.90
    assert np.mean(mlp_spec) >= 0.90
    times = ", ".join(f"{run.wall_time:.0f}s" for run in paper_runs)
    print(f"\n[PASS] criterion 7: 625/88/797 moderate runs over seeds {SEEDS}: "
          f"fit/unfit accuracy GBM {np.mean(gbm_acc):.3f} MLP {np.mean(mlp_acc):.3f} "
          f"(>= 0.70); control specificity GBM {np.mean(gbm_spec):.3f} "
          f"MLP {np.mean(mlp_spec):.3f} (>= 0.90); run times {times} (< 600s each)")


def test_criterion_8_behavioural_structure(paper_runs):
    from pupilffd.features import preprocess_ratios

    for run in paper_runs:
        curves = {}
        for condition in CONDITION_ORDER:
            series = []
            for seq in run.sequences["train"]:
                if seq.condition is condition:
                    try:
                        rx, _ = preprocess_ratios(seq)
                    except Exception:
                        continue
                    series.append(rx)
            curves[condition] = grand_mean(series)
        tail = slice(46, 150)  # t > 3 s on the 15 fps grid
        assert np.all(curves[Condition.ALCOHOL].values[tail]
                      > curves[Condition.DRUG].values[tail])
        assert np.all(curves[Condition.DRUG].values[tail]
                      > curves[Condition.SLEEP].values[tail])
        assert np.all(curves[Condition.SLEEP].values[tail]
                      > curves[Condition.CONTROL].values[tail])
        dispersion = centre_dispersion(run.sequences["train"])
        control = dispersion[Condition.CONTROL]
        assert all(control < dispersion[c] for c in CONDITION_ORDER[1:])
    print(f"\n[PASS] criterion 8: grand-mean ratio ordering alcohol > drug > sleep > "
          f"control for t > 3 s on 3/3 seeds; control centre dispersion smallest")


def test_criterion_9_round_trips(easy_run, tmp_path):
    models, _ = easy_run
    rng = np.random.default_rng(909)
    probes = rng.normal(0, 2, (1000, VECTOR_LENGTH))
    for family, model in models.items():
        path = tmp_path / f"{family}.json"
        save_model(model, path)
        loaded = load_model(path)
        assert np.array_equal(model.predict_proba(probes),
                              loaded.predict_proba(probes)), family

    # mask corpus -> localize -> geometry round trip on unoccluded sequences
    config = synth.GeneratorConfig(seed=4, preset="moderate")
    profiles = config.profiles
    sequences = []
    for i, condition in enumerate((Condition.CONTROL, Condition.ALCOHOL,
                                   Condition.SLEEP)):
        rng_seq = np.random.default_rng(np.random.SeedSequence([4, i]))
        sequences.append(synth.generate_sequence(
            profiles[condition], 15.0, 10.0, rng_seq, seq_id=f"rt-{condition.value}"))
    manifest = synth.generate_mask_corpus(sequences, tmp_path / "corpus",
                                          image_px=128, seed=4)
    out_csv = tmp_path / "localized.csv"
    localize_batch(manifest, out_csv)
    recovered = {seq.id: seq for seq in load_sequences(out_csv)}
    n_checked = n_good = 0
    for seq in sequences:
        rec = recovered[seq.id]
        for truth, got in zip(seq.frames, rec.frames):
            if not truth.valid:
                continue
            n_checked += 1
            if (got.valid
                    and abs(got.iris_rx - truth.iris_rx) <= 1.0
                    and abs(got.iris_ry - truth.iris_ry) <= 1.0
                    and abs(got.pupil_rx - truth.pupil_rx) <= 1.0
                    and abs(got.pupil_ry - truth.pupil_ry) <= 1.0):
                n_good += 1
    assert n_checked >= 300  # blinks thin out the valid frames
    assert n_good / n_checked >= 0.95
    print(f"\n[PASS] criterion 9: model JSON round trips bit-identical on 1000 "
          f"vectors for all families; mask round trip {n_good}/{n_checked} frames "
          f"within 1 px")
