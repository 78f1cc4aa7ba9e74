"""
Experiment archive ("saved progress").

Each training run writes one directory `<timestamp>_seed<seed>/` holding the
checkpoint, a parameters file, the epoch and batch loss CSVs, the confusion
matrix, the test-split metrics, the ROC curve as CSV and SVG, and the split
index file.
"""

import hashlib
import json
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from app.models.checkpoint import ModelCheckpoint  # noqa: E402
from app.models.metrics import ConfusionMatrix, EvaluationReport, RocCurve  # noqa: E402
from app.models.records import SplitPlan  # noqa: E402
from app.models.training import TrainingLog  # noqa: E402
from app.services.checkpoint import checkpoint_save  # noqa: E402
from app.utils.logging_config import get_logger  # noqa: E402
from app.utils.type_conversion import to_python_type  # noqa: E402

logger = get_logger("archive")

ARTIFACTS: List[str] = [
    "model.ckpt",
    "parameters.json",
    "loss_epoch.csv",
    "loss_batch.csv",
    "confusion_matrix.csv",
    "metrics.json",
    "roc.csv",
    "roc.svg",
    "split_index.csv",
]

EPOCH_COLUMNS = ["epoch", "loss", "train_acc", "test_acc", "tpr", "tnr"]
BATCH_COLUMNS = ["epoch", "batch", "rows", "loss", "scaled_loss"]


def _csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator="\n")


def epoch_csv(log: TrainingLog) -> str:
    return _csv(pd.DataFrame([e.model_dump() for e in log.epochs], columns=EPOCH_COLUMNS))


def batch_csv(log: TrainingLog) -> str:
    return _csv(pd.DataFrame([b.model_dump() for b in log.batches], columns=BATCH_COLUMNS))


def log_digest(log: TrainingLog) -> str:
    """sha256 of the epoch loss CSV."""
    return hashlib.sha256(epoch_csv(log).encode("utf-8")).hexdigest()


def confusion_csv(cm: ConfusionMatrix) -> str:
    frame = pd.DataFrame(
        {"actual": ["natural", "other"], "predicted_natural": [cm.tp, cm.fp], "predicted_other": [cm.fn, cm.tn]}
    )
    return _csv(frame)


def metrics_json(report: EvaluationReport) -> str:
    """Confusion counts, rates and AUC of the test split; undefined rates are null."""
    return json.dumps(to_python_type(report.model_dump(mode="json")), indent=2, sort_keys=True) + "\n"


def roc_csv(curve: Optional[RocCurve]) -> str:
    if curve is None:
        return _csv(pd.DataFrame(columns=["threshold", "fpr", "tpr"]))
    return _csv(pd.DataFrame({"threshold": curve.thresholds, "fpr": curve.fpr, "tpr": curve.tpr}))


def split_index_csv(plan: SplitPlan) -> str:
    frame = pd.DataFrame(
        {
            "index": plan.train_indices + plan.test_indices,
            "split": ["train"] * len(plan.train_indices) + ["test"] * len(plan.test_indices),
        }
    )
    return _csv(frame)


def read_split_index(path: Union[str, Path]) -> Dict[str, List[int]]:
    frame = pd.read_csv(path)
    return {
        "train": frame.loc[frame["split"] == "train", "index"].astype(int).tolist(),
        "test": frame.loc[frame["split"] == "test", "index"].astype(int).tolist(),
    }


def write_roc_svg(curve: Optional[RocCurve], path: Path) -> Path:
    """Plain ROC line plot; fixed hash salt and no date keep the bytes reproducible."""
    with plt.rc_context({"svg.hashsalt": "wildfire-roc", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.plot([0, 1], [0, 1], linestyle="--", color="grey", linewidth=1)
        if curve is not None:
            ax.plot(curve.fpr, curve.tpr, color="tab:red", linewidth=2, label=f"AUC = {curve.auc:.4f}")
            ax.legend(loc="lower right")
        else:
            ax.set_title("ROC undefined: test split has a single class")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_xlabel("False positive rate")
        ax.set_ylabel("True positive rate")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path


def create_run_dir(archive_root: Union[str, Path], seed: int, now: Optional[datetime] = None) -> Path:
    stamp = (now or datetime.now()).strftime("%Y%m%d-%H%M%S")
    base = Path(archive_root) / f"{stamp}_seed{seed}"
    candidate, n = base, 1
    while candidate.exists():
        candidate = base.with_name(f"{base.name}-{n}")
        n += 1
    candidate.mkdir(parents=True)
    return candidate


def write_archive(
    run_dir: Path,
    checkpoint: ModelCheckpoint,
    parameters: dict,
    log: TrainingLog,
    report: EvaluationReport,
    curve: Optional[RocCurve],
    plan: SplitPlan,
) -> List[Path]:
    """Write every artifact of a run into run_dir, in ARTIFACTS order."""
    run_dir = Path(run_dir)
    checkpoint_save(checkpoint, run_dir / "model.ckpt")
    (run_dir / "parameters.json").write_text(
        json.dumps(to_python_type(parameters), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (run_dir / "loss_epoch.csv").write_text(epoch_csv(log), encoding="utf-8")
    (run_dir / "loss_batch.csv").write_text(batch_csv(log), encoding="utf-8")
    (run_dir / "confusion_matrix.csv").write_text(confusion_csv(report.confusion), encoding="utf-8")
    (run_dir / "metrics.json").write_text(metrics_json(report), encoding="utf-8")
    (run_dir / "roc.csv").write_text(roc_csv(curve), encoding="utf-8")
    write_roc_svg(curve, run_dir / "roc.svg")
    (run_dir / "split_index.csv").write_text(split_index_csv(plan), encoding="utf-8")

    logger.info(f"Archived run to {run_dir}")
    return [run_dir / name for name in ARTIFACTS]
