"""Train the three classifier families and read the report.

Uses a reduced dataset and smaller ensembles so the demo runs in
seconds; the shipped defaults (1000 estimators, 300 MLP epochs) behave
the same way, just slower and a little stronger.
"""
import tempfile
from pathlib import Path

import numpy as np

from pupilffd import pipeline
from pupilffd.classifiers import Dataset, ModelSpec, grid_search, kfold_cv, train
from pupilffd.evaluate import build_report, confusion_matrix, group_fit_unfit, report_table
from pupilffd.features import build_baselines
from pupilffd.synth import GeneratorConfig, generate_split_sequences

out_dir = Path(tempfile.mkdtemp(prefix="pupilffd-demo-"))

config = GeneratorConfig(
    counts={"train": {c: n for c, n in zip(
                 list(GeneratorConfig().counts["train"]), (60, 60, 20, 20))},
            "validation": {c: 8 for c in GeneratorConfig().counts["validation"]},
            "test": {c: n for c, n in zip(
                 list(GeneratorConfig().counts["test"]), (120, 16, 6, 6))}},
    seed=1, preset="moderate")
splits = generate_split_sequences(config)
baselines = build_baselines(splits["train"])
train_data = Dataset(pipeline.extract_features(splits["train"], baselines))
val_data = Dataset(pipeline.extract_features(splits["validation"], baselines))
test_data = Dataset(pipeline.extract_features(splits["test"], baselines))
print(f"train {len(train_data)} / val {len(val_data)} / test {len(test_data)}\n")

fast = {
    "random_forest": {"n_estimators": 60},
    "gradient_boosting": {"n_estimators": 80, "learning_rate": 0.1},
    "mlp": {"max_iter": 120},
}

for family, overrides in fast.items():
    spec = ModelSpec(family, overrides, seed=1)
    cv = kfold_cv(spec, train_data, k=5)
    model = train(spec, train_data)
    pairs = []
    pred = np.argmax(model.predict_proba(test_data.X), axis=1)
    for fv, p in zip(test_data.vectors, pred):
        pairs.append((fv.condition, model.classes[int(p)]))
    cm4 = confusion_matrix(pairs)
    cm2 = group_fit_unfit(cm4)
    print(f"{family}: 5-fold cv accuracy {cv.mean_accuracy:.3f} "
          f"(std {cv.std_accuracy:.3f}), test fit/unfit accuracy "
          f"{cm2.overall_accuracy():.3f}")

# exhaustive grid search on the validation split (macro precision objective)
result = grid_search("random_forest",
                     {"max_depth": [2, 5], "n_estimators": [40, 80]},
                     train_data, val_data, seed=1)
best = result.best_spec.hyperparameters
print(f"\ngrid search tried {len(result.trials)} combinations; best "
      f"max_depth={best['max_depth']}, n_estimators={best['n_estimators']} "
      f"(macro precision {result.best_score:.3f})")

# the full report for the last model trained above
report = build_report(cm4, cm2, metadata={"family": "mlp", "seed": 1})
print("\n" + report_table(report))
