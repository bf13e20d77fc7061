"""Command-line entry point.

Subcommands cover the pipeline end to end on batch files:

    synth     generate a synthetic dataset (geometry CSVs, optional masks)
    localize  turn a mask manifest into a geometry CSV
    baseline  fit per-condition baseline curves from a training CSV
    extract   build 50-value feature vectors (JSON-lines)
    train     fit a classifier family on a feature file
    predict   print per-sequence condition, probabilities and fit/unfit
    eval      confusion matrices, metrics and report files
    report    behavioural grand-mean plot data

Exit status: 0 on success, 1 on input errors, 2 on internal errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from pupilffd import circlefit, core, evaluate, features, pipeline, synth
from pupilffd.classifiers import api as models
from pupilffd.core import SchemaError, UnusableSequenceError

logger = logging.getLogger(__name__)


class InputError(Exception):
    """Bad command line, missing file or malformed input."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: D102 - argparse hook
        raise InputError(message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="random seed (overrides the config file)")
    parser.add_argument("--config", type=Path, default=None,
                        help="pipeline config JSON with per-module sections")


def _load_config(args: argparse.Namespace) -> pipeline.PipelineConfig:
    if args.config is not None:
        if not args.config.exists():
            raise InputError(f"config file not found: {args.config}")
        cfg = pipeline.load_pipeline_config(args.config)
    else:
        cfg = pipeline.PipelineConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def build_parser() -> _Parser:
    parser = _Parser(prog="pupilffd", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--preset", choices=sorted(synth.PRESETS),
                   help="difficulty preset (default from config, else moderate)")
    p.add_argument("--masks", type=int, default=0, metavar="N",
                   help="also rasterise masks for the first N train sequences")

    p = sub.add_parser("localize", help="localise masks listed in a manifest")
    _add_common(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output geometry CSV")

    p = sub.add_parser("baseline", help="fit per-condition baseline curves")
    _add_common(p)
    p.add_argument("--data", type=Path, required=True, help="training geometry CSV")
    p.add_argument("--out", type=Path, required=True, help="output baselines JSON")

    p = sub.add_parser("extract", help="extract feature vectors")
    _add_common(p)
    p.add_argument("--data", type=Path, required=True, help="geometry CSV")
    p.add_argument("--baselines", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output feature JSON-lines")
    p.add_argument("--fusion", choices=pipeline.FUSION_MODES, default=None)

    p = sub.add_parser("train", help="train a classifier")
    _add_common(p)
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--family", required=True, choices=sorted(models.FAMILY_DEFAULTS))
    p.add_argument("--out", type=Path, required=True, help="output model JSON")
    p.add_argument("--model-config", type=Path, default=None,
                   help="JSON file with per-family hyperparameter sections")
    p.add_argument("--cv", type=int, default=0, metavar="K",
                   help="also run stratified K-fold cross-validation and print fold metrics")

    p = sub.add_parser("predict", help="classify feature vectors")
    _add_common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="optional predictions CSV")

    p = sub.add_parser("eval", help="evaluate a model on labelled features")
    _add_common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("report", help="behavioural grand-mean plot data")
    _add_common(p)
    p.add_argument("--data", type=Path, required=True, help="geometry CSV")
    p.add_argument("--baselines", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    return parser


def _require(path: Path, what: str, hint: str = "") -> Path:
    if not path.exists():
        message = f"{what} not found: {path}"
        if hint:
            message += f" ({hint})"
        raise InputError(message)
    return path


def _cmd_synth(args: argparse.Namespace, cfg: pipeline.PipelineConfig) -> int:
    config = synth.config_from_dict(cfg.generator) if cfg.generator else synth.GeneratorConfig()
    # Seed precedence: --seed flag, then the generator section, then the
    # top-level config seed.
    if args.seed is not None:
        config.seed = args.seed
    elif "seed" not in cfg.generator:
        config.seed = cfg.seed
    if args.preset is not None:
        config.preset = args.preset
    paths = synth.generate_dataset(config, args.out)
    for _, path in sorted(paths.items()):
        print(f"wrote {path}")
    if args.masks > 0:
        sequences = synth.generate_split_sequences(config)["train"][:args.masks]
        if not sequences:
            raise InputError("--masks requested but the train split is empty")
        manifest = synth.generate_mask_corpus(sequences, args.out / "mask_corpus",
                                              image_px=config.image_px, seed=config.seed)
        print(f"wrote {manifest}")
    return 0


def _cmd_localize(args: argparse.Namespace, cfg: pipeline.PipelineConfig) -> int:
    _require(args.manifest, "manifest")
    n = circlefit.localize_batch(args.manifest, args.out)
    print(f"wrote {args.out} ({n} frames)")
    return 0


def _cmd_baseline(args: argparse.Namespace, cfg: pipeline.PipelineConfig) -> int:
    sequences = core.load_sequences(_require(args.data, "geometry CSV"))
    baselines = features.build_baselines(
        sequences, target_len=cfg.target_len, max_gap=cfg.max_gap,
        max_invalid_fraction=cfg.max_invalid_fraction)
    features.save_baselines(baselines, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_extract(args: argparse.Namespace, cfg: pipeline.PipelineConfig) -> int:
    _require(args.baselines, "baseline file",
             hint="run `pupilffd baseline` on the training split first")
    sequences = core.load_sequences(_require(args.data, "geometry CSV"))
    baselines = features.load_baselines(args.baselines)
    vectors = pipeline.extract_features(
        sequences, baselines, fusion=args.fusion or cfg.fusion,
        target_len=cfg.target_len, max_gap=cfg.max_gap,
        max_invalid_fraction=cfg.max_invalid_fraction)
    if not vectors:
        raise InputError(f"{args.data}: no usable sequences")
    features.save_features(vectors, args.out)
    print(f"wrote {args.out} ({len(vectors)} vectors)")
    return 0


def _load_dataset(path: Path) -> models.Dataset:
    return models.Dataset(vectors=features.load_features(_require(path, "feature file")))


def _cmd_train(args: argparse.Namespace, cfg: pipeline.PipelineConfig) -> int:
    data = _load_dataset(args.features)
    if args.model_config is not None:
        spec = models.spec_from_config(_require(args.model_config, "model config"),
                                       args.family, seed=cfg.seed)
    elif args.family in cfg.models:
        spec = models.ModelSpec(family=args.family,
                                hyperparameters=_tupled(cfg.models[args.family]),
                                seed=cfg.seed)
    else:
        spec = models.default_spec(args.family, seed=cfg.seed)
    if args.cv:
        result = models.kfold_cv(spec, data, k=args.cv)
        for i, fold in enumerate(result.folds):
            print(f"fold {i}: accuracy {fold.accuracy:.3f}")
        print(f"cv mean accuracy {result.mean_accuracy:.3f} "
              f"(std {result.std_accuracy:.3f})")
    model = models.train(spec, data)
    models.save_model(model, args.out)
    print(f"wrote {args.out}")
    return 0


def _tupled(params: dict) -> dict:
    params = dict(params)
    if "hidden_layer_sizes" in params:
        params["hidden_layer_sizes"] = tuple(params["hidden_layer_sizes"])
    return params


def _cmd_predict(args: argparse.Namespace, cfg: pipeline.PipelineConfig) -> int:
    model = models.load_model(_require(args.model, "model file"))
    data = _load_dataset(args.features)
    rows = []
    for fv, result in zip(data.vectors, models.predict_dataset(model, data)):
        probs = " ".join(
            f"P({c.value})={p:.4f}" for c, p in zip(model.classes, result.probabilities))
        indicator = "FIT" if result.condition.fit_class == "fit" else "UNFIT"
        print(f"{fv.id}  predicted={result.condition.value}  {probs}  "
              f"indicator={indicator}  unfit_score={result.unfit_score:.4f}")
        rows.append([fv.id, result.condition.value,
                     *(f"{p:.6f}" for p in result.probabilities),
                     indicator, f"{result.unfit_score:.6f}"])
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "predicted", "p_control", "p_alcohol", "p_drug",
                             "p_sleep", "indicator", "unfit_score"])
            writer.writerows(rows)
        print(f"wrote {args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace, cfg: pipeline.PipelineConfig) -> int:
    model = models.load_model(_require(args.model, "model file"))
    data = _load_dataset(args.features)
    predictions = models.predict_dataset(model, data)
    pairs = [(fv.condition, res.condition) for fv, res in zip(data.vectors, predictions)]
    cm4 = evaluate.confusion_matrix(pairs)
    cm2 = evaluate.group_fit_unfit(cm4)
    metadata = {
        "family": model.spec.family,
        "seed": model.spec.seed,
        "n_sequences": len(data),
        "n_training_samples": model.n_training_samples,
    }
    json_path, text_path = evaluate.render_report(cm4, cm2, args.out, metadata)
    print(Path(text_path).read_text(encoding="utf-8"))
    print(f"wrote {json_path}")
    print(f"wrote {text_path}")
    return 0


def _cmd_report(args: argparse.Namespace, cfg: pipeline.PipelineConfig) -> int:
    sequences = core.load_sequences(_require(args.data, "geometry CSV"))
    baselines = None
    if args.baselines is not None:
        baselines = features.load_baselines(_require(args.baselines, "baseline file"))
    paths = evaluate.behavioural_report(sequences, baselines, args.out,
                                        target_len=cfg.target_len, max_gap=cfg.max_gap)
    for path in paths:
        print(f"wrote {path}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "localize": _cmd_localize,
    "baseline": _cmd_baseline,
    "extract": _cmd_extract,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "report": _cmd_report,
}

_INPUT_ERRORS = (InputError, SchemaError, UnusableSequenceError, FileNotFoundError,
                 json.JSONDecodeError, ValueError)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_config(args)
        return _COMMANDS[args.command](args, cfg)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
