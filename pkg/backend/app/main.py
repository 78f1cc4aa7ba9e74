"""
Command-line entry point for the wildfire-cause forecasting engine.

    python -m app.main train --with-vegetation=True --resample-method=undersampling ...
    python -m app.main eval --checkpoint RUN/model.ckpt --data fires.csv --split-index RUN/split_index.csv
    python -m app.main predict-grid --checkpoint RUN/model.ckpt --info-row "..." --image-dir tiles --rows 13 --cols 15
    python -m app.main synthesize --output demo

Every engine error is logged and mapped to its exit code.
"""

import argparse
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

from pydantic import BaseModel, ConfigDict, ValidationError

from app.config import get_settings
from app.exceptions import SchemaError, UsageError, WildfireError
from app.models.configs import ModelKind, RunConfig, build_run_config
from app.models.metrics import EvaluationReport, ProbabilityGrid
from app.models.records import SMOTE_MODE_ALIASES, Dataset, FeatureSet, ResampleMethod, SmoteMode
from app.models.training import TrainingLog
from app.nn import param_count
from app.services import archive, grid
from app.services.checkpoint import checkpoint_from_model, checkpoint_load, restore_model
from app.services.data_processor import Standardizer, infer_feature_set, load_dataset
from app.services.forecasting import CauseModel, build_model
from app.services.metrics import roc
from app.services.resampling import apply_plan, plan_from_index, resample_dataset
from app.services.synthetic import Signal, synthesize
from app.utils.logging_config import get_logger, setup_logging

logger = get_logger("cli")


class TrainResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    run_dir: Optional[Path] = None
    checkpoint_path: Optional[Path] = None
    log: TrainingLog
    report: EvaluationReport
    param_count: int


# ---------------------------------------------------------------- helpers

def str2bool(value: str) -> bool:
    text = str(value).strip().lower()
    if text in ("true", "t", "yes", "y", "1"):
        return True
    if text in ("false", "f", "no", "n", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected True or False, got {value!r}")


def _standardized(dataset: Dataset, standardizer: Standardizer) -> Dataset:
    return dataset.model_copy(update={"features": standardizer.transform(dataset.features)})


def _module_counts(model: CauseModel) -> dict:
    counts = {"total": param_count(model)}
    for name in ("wiin", "baseline"):
        child = getattr(model, name, None)
        if child is not None:
            counts[name] = param_count(child)
    return counts


def format_report(report: EvaluationReport) -> str:
    cm, r = report.confusion, report.rates

    def fmt(value: Optional[float]) -> str:
        return "n/a" if value is None else f"{value:.4f}"

    return "\n".join(
        [
            f"rows: {report.rows}  threshold: {report.threshold}",
            "                 pred natural  pred other",
            f"actual natural   {cm.tp:>12}  {cm.fn:>10}",
            f"actual other     {cm.fp:>12}  {cm.tn:>10}",
            f"TPR {fmt(r.tpr)}  TNR {fmt(r.tnr)}  accuracy {fmt(r.accuracy)}  "
            f"balanced {fmt(r.balanced_accuracy)}",
            f"F {fmt(r.f_score)}  precision {fmt(r.precision)}  AUC {fmt(report.auc)}",
        ]
    )


# ---------------------------------------------------------------- commands

def cmd_train(config: RunConfig) -> TrainResult:
    """
    Load, resample, split, standardize, train, evaluate and archive one run.

    Without --data a synthetic dataset is generated for the run.
    """
    settings = get_settings()
    hybrid = config.model_selection == ModelKind.HYBRID

    with tempfile.TemporaryDirectory(prefix="wildfire-synthetic-") as scratch:
        data_path = config.data
        if data_path is None:
            logger.info("No --data given; training on a generated synthetic dataset")
            data_path = synthesize(scratch, seed=config.seed, images=False).csv
        dataset = load_dataset(
            data_path,
            image_dir=config.image_dir,
            include_vegetation=config.with_vegetation,
            include_images=hybrid,
            include_fire_size=config.include_fire_size,
            feature_set=config.feature_set,
            positive_causes=config.positive_causes,
            vegetation_mapping_path=config.vegetation_mapping or settings.vegetation_mapping_path,
        )

    dataset, plan = resample_dataset(
        dataset,
        config.resample_method,
        config.seed,
        other_size=config.other_size,
        test_size=config.test_size,
        k=config.smote_k,
        mode=config.smote_mode,
    )
    train, test = apply_plan(dataset, plan)
    standardizer = Standardizer.fit(train.features) if config.standardize else Standardizer.identity(dataset.width)
    train, test = _standardized(train, standardizer), _standardized(test, standardizer)

    model = build_model(config.model_selection, config.model_config_for(dataset.width), config.seed)
    counts = _module_counts(model)
    logger.info(f"{model.name}: {counts['total']} trainable parameters")

    log = model.fit(train, test, seed=config.seed)
    report = model.evaluate(test)
    curve = None
    if report.auc is not None:
        curve = roc(model.predict_proba(test.features, test.images), test.labels)

    checkpoint = checkpoint_from_model(
        model, dataset.columns, standardizer.to_state(), archive.log_digest(log), config.positive_causes
    )
    result = TrainResult(log=log, report=report, param_count=counts["total"])
    if config.archive:
        run_dir = archive.create_run_dir(config.archive_root or settings.archive_root, config.seed)
        parameters = {
            "run_config": config.model_dump(mode="json"),
            "model_config": model.config.model_dump(mode="json"),
            "param_count": counts,
            "feature_columns": dataset.columns,
            "tensors": {name: list(p.shape) for name, p in model.named_parameters()},
        }
        archive.write_archive(run_dir, checkpoint, parameters, log, report, curve, plan)
        result.run_dir = run_dir
        result.checkpoint_path = run_dir / "model.ckpt"
    else:
        logger.warning("--archive=False: the trained model is not saved")

    print(format_report(report))
    return result


def _load_for_eval(checkpoint_path: Path):
    ckpt = checkpoint_load(checkpoint_path)
    model = restore_model(ckpt)
    standardizer = (
        Standardizer.from_state(ckpt.standardizer)
        if ckpt.standardizer is not None
        else Standardizer.identity(len(ckpt.feature_columns))
    )
    return ckpt, model, standardizer


def cmd_eval(
    checkpoint_path: Path,
    data: Path,
    image_dir: Optional[Path] = None,
    split_index: Optional[Path] = None,
    threshold: Optional[float] = None,
    with_vegetation: Optional[bool] = None,
) -> EvaluationReport:
    """
    Evaluate a checkpoint on a dataset, or on the test rows of an archived split.

    The feature layout follows the checkpoint unless with_vegetation overrides it.

    Raises:
        SchemaError: If the data width differs from the checkpoint's
    """
    ckpt, model, standardizer = _load_for_eval(checkpoint_path)
    if model.uses_images and image_dir is None:
        raise UsageError(f"a {ckpt.kind!r} checkpoint needs --image-dir")
    columns = ckpt.feature_columns
    dataset = load_dataset(
        data,
        image_dir=image_dir,
        include_vegetation=(
            any(c.startswith("veg_") for c in columns) if with_vegetation is None else with_vegetation
        ),
        include_images=model.uses_images,
        include_fire_size="fire_size" in columns,
        feature_set=infer_feature_set(columns),
        positive_causes=ckpt.positive_causes,
        vegetation_mapping_path=get_settings().vegetation_mapping_path,
    )
    if dataset.width != len(columns):
        raise SchemaError(f"data has {dataset.width} features, the checkpoint expects width {len(columns)}")

    if split_index is not None:
        split = archive.read_split_index(split_index)
        try:
            plan = plan_from_index(split["train"], split["test"], seed=ckpt.seed)
        except ValidationError as exc:
            raise SchemaError(f"invalid split index {split_index}: {exc.errors()[0]['msg']}") from exc
        if plan.test_indices and max(plan.test_indices) >= len(dataset):
            raise SchemaError(
                f"split index refers to row {max(plan.test_indices)} but the data has {len(dataset)} rows"
            )
        dataset = dataset.subset(plan.test_indices)

    dataset = _standardized(dataset, standardizer)
    if threshold is not None:
        model.config = model.config.model_copy(update={"threshold": threshold})
    report = model.evaluate(dataset)
    print(format_report(report))
    return report


def cmd_predict_grid(
    checkpoint_path: Path,
    info_row: str,
    image_dir: Path,
    rows: int,
    cols: int,
    output: Path,
    origin_lat: float = 0.0,
    origin_lon: float = 0.0,
    debug_maps: Optional[Path] = None,
) -> ProbabilityGrid:
    """Score a rows x cols tile block; writes `grid.csv` and `heatmap.pgm` under output."""
    _, model, standardizer = _load_for_eval(checkpoint_path)
    result = grid.predict_grid(
        model,
        info_row,
        image_dir,
        rows,
        cols,
        origin_lat=origin_lat,
        origin_lon=origin_lon,
        standardizer=standardizer,
        debug_maps=debug_maps,
    )
    output = Path(output)
    grid.write_grid_csv(result, output / "grid.csv")
    grid.write_heatmap(result, output / "heatmap.pgm")
    logger.info(f"Wrote grid.csv and heatmap.pgm to {output}")
    return result


# ------------------------------------------------------------------ parser

def _add_train_arguments(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", type=Path, help="fire-record CSV (default: generated synthetic data)")
    p.add_argument("--image-dir", type=Path, help="directory of <FOD_ID>.pgm/.png tiles")
    p.add_argument("--archive-root", type=Path, help="where run directories are created")
    p.add_argument("--label-choice", help="cause labelled positive, an NWCG name or code (default Lightning)")
    p.add_argument("--feature-set", choices=[f.value for f in FeatureSet],
                   help="weather variables: t_w (temperature, wind) or t_w_h_p (plus humidity, precipitation)")
    p.add_argument("--with-vegetation", type=str2bool, help="vegetation categories as features")
    p.add_argument("--satellite-img", type=str2bool, help="satellite images as features")
    p.add_argument("--gray-scale", type=str2bool, help="grayscale imagery (only True is supported)")
    p.add_argument("--resample-method", choices=[m.value for m in ResampleMethod], help="resample method")
    p.add_argument("--other-size", type=float,
                   help="majority rows per minority row when resampling (e.g. 1.8)")
    p.add_argument("--test-size", type=float, help="the proportion of the test set")
    p.add_argument("--archive", type=str2bool, help="save the results")
    p.add_argument("--seed", type=int, help="the seed for randomness")
    p.add_argument("--model-selection", choices=[k.value for k in ModelKind], help="model to train")
    p.add_argument("--loss-function", choices=["mse", "cross_entropy"], help="loss function")
    p.add_argument("--learning-rate", type=float, help="learning rate for the optimizer")
    p.add_argument("--weight-decay", type=float, help="decoupled weight decay")
    p.add_argument("--epochs", type=int, help="number of training epochs")
    p.add_argument("--display-step", "--display_step", dest="display_step", type=int,
                   help="log the loss and accuracy every N epochs")
    p.add_argument("--threshold", type=float, help="probabilities above it are predicted natural")
    p.add_argument("--batch", type=str2bool, help="train with mini-batches")
    p.add_argument("--batch-size", type=int, help="with --batch=True, the size of each batch")
    p.add_argument("--smote-k", type=int, help="SMOTE neighbourhood size")
    p.add_argument("--smote-mode", choices=[m.value for m in SmoteMode] + sorted(SMOTE_MODE_ALIASES),
                   help="SMOTE interpolation rule")
    p.add_argument("--standardize", type=str2bool, help="z-score features with training statistics")
    p.add_argument("--include-fire-size", type=str2bool, help="append FIRE_SIZE to the tabular row")
    p.add_argument("--vegetation-mapping", type=Path, help="CSV veg_category,group overriding the grouping")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wildfire", description="Wildfire-cause forecasting engine")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_train_arguments(sub.add_parser("train", help="train a model and archive the run"))

    ev = sub.add_parser("eval", help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", type=Path, required=True)
    ev.add_argument("--data", type=Path, required=True)
    ev.add_argument("--image-dir", type=Path)
    ev.add_argument("--split-index", type=Path, help="evaluate only the test rows of an archived run")
    ev.add_argument("--threshold", type=float)
    ev.add_argument("--with-vegetation", type=str2bool, help="override the checkpoint's feature layout")

    pg = sub.add_parser("predict-grid", help="per-tile probabilities over an image grid")
    pg.add_argument("--checkpoint", type=Path, required=True)
    pg.add_argument("--info-row", required=True, help="comma-separated tabular row shared by every tile")
    pg.add_argument("--image-dir", type=Path, required=True, help="directory of <index>.pgm/.png tiles")
    pg.add_argument("--rows", type=int, required=True)
    pg.add_argument("--cols", type=int, required=True)
    pg.add_argument("--origin-lat", type=float, default=0.0, help="latitude of the north-west corner")
    pg.add_argument("--origin-lon", type=float, default=0.0, help="longitude of the north-west corner")
    pg.add_argument("--output", type=Path, default=Path("grid_output"))
    pg.add_argument("--debug-maps", type=Path, help="write stem and final feature maps per tile")

    syn = sub.add_parser("synthesize", help="write the synthetic dataset")
    syn.add_argument("--output", type=Path, required=True)
    syn.add_argument("--rows", type=int, default=400)
    syn.add_argument("--natural-fraction", type=float, default=0.3)
    syn.add_argument("--seed", type=int, default=get_settings().default_seed)
    syn.add_argument("--signal", choices=[s.value for s in Signal], default=Signal.BOTH.value)
    syn.add_argument("--images", type=str2bool, default=True)
    return parser


_TRAIN_FIELDS = [
    "data", "image_dir", "archive_root", "label_choice", "feature_set", "with_vegetation", "satellite_img",
    "gray_scale",
    "resample_method", "other_size", "test_size", "archive", "seed", "model_selection",
    "loss_function", "learning_rate", "weight_decay", "epochs", "display_step", "threshold",
    "batch", "batch_size", "smote_k", "smote_mode", "standardize", "include_fire_size",
    "vegetation_mapping",
]


def run(args: argparse.Namespace) -> int:
    if args.command == "train":
        config = build_run_config(**{name: getattr(args, name) for name in _TRAIN_FIELDS})
        result = cmd_train(config)
        if result.run_dir is not None:
            print(f"archived to {result.run_dir}")
    elif args.command == "eval":
        cmd_eval(args.checkpoint, args.data, args.image_dir, args.split_index, args.threshold, args.with_vegetation)
    elif args.command == "predict-grid":
        cmd_predict_grid(
            args.checkpoint, args.info_row, args.image_dir, args.rows, args.cols, args.output,
            args.origin_lat, args.origin_lon, args.debug_maps,
        )
    elif args.command == "synthesize":
        paths = synthesize(args.output, args.rows, args.natural_fraction, args.seed, args.signal, args.images)
        print(f"wrote {paths.csv}" + (f" and tiles in {paths.image_dir}" if paths.image_dir else ""))
    else:
        raise UsageError(f"unknown command {args.command}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except WildfireError as exc:
        logger.error(f"{type(exc).__name__}: {exc.message}")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
