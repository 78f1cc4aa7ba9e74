"""
Tests for the grid helpers and the run archive.
"""

import io
import json
from datetime import datetime

import numpy as np
import pandas as pd
import pytest

from app.exceptions import ImageJoinError, SchemaError
from app.models.metrics import ConfusionMatrix, EvaluationReport, ProbabilityGrid
from app.models.training import EpochStats, TrainingLog
from app.services import archive
from app.services.checkpoint import checkpoint_from_model
from app.services.forecasting import BaselineNet
from app.services.grid import METRES_PER_DEGREE_LAT, grid_frame, parse_info_row, tile_coordinates, tile_paths
from app.services.metrics import rates, roc
from app.services.resampling import split_plan
from app.services.synthetic import synthesize_grid_tiles


def test_info_row_parsing():
    np.testing.assert_array_equal(parse_info_row("1, 2 3", 3), [1.0, 2.0, 3.0])
    padded = parse_info_row(list(range(14)), 20)
    assert padded.shape == (20,)
    np.testing.assert_array_equal(padded[14:], 0.0)


@pytest.mark.parametrize("values,width", [("1,2", 3), ("a,b,c", 3), (list(range(14)), 21)])
def test_info_row_rejected(values, width):
    with pytest.raises(SchemaError):
        parse_info_row(values, width)


def test_tile_coordinates_start_at_north_west_corner():
    grid = ProbabilityGrid(origin_lat=40.0, origin_lon=-120.0, rows=2, cols=3, probabilities=np.zeros((2, 3)))
    lat, lon = tile_coordinates(grid)

    assert lat[0, 0] == 40.0 and lon[0, 0] == -120.0
    assert lat[1, 0] == pytest.approx(40.0 - 100.0 / METRES_PER_DEGREE_LAT)
    assert lon[0, 1] > lon[0, 0]


def test_grid_frame_flags_are_strict():
    probs = np.array([[0.70, 0.71], [0.2, 0.9]])
    frame = grid_frame(ProbabilityGrid(origin_lat=0.0, origin_lon=0.0, rows=2, cols=2, probabilities=probs))

    assert frame["flag_gt_70"].tolist() == [0, 1, 0, 1]
    assert frame[["row", "col"]].values.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_tile_paths_report_every_missing_index(tmp_path):
    tiles = synthesize_grid_tiles(tmp_path, 2, 2, seed=0)
    (tiles / "1.pgm").unlink()
    (tiles / "3.pgm").unlink()

    with pytest.raises(ImageJoinError) as exc_info:
        tile_paths(tiles, 2, 2)
    assert exc_info.value.missing == [1, 3]


def _log() -> TrainingLog:
    return TrainingLog(
        epochs=[
            EpochStats(epoch=0, loss=0.5, train_acc=0.6, test_acc=0.55, tpr=0.5, tnr=0.6),
            EpochStats(epoch=1, loss=0.25, train_acc=0.8, test_acc=0.75, tpr=0.7, tnr=0.8),
        ]
    )


def test_epoch_csv_and_digest():
    text = archive.epoch_csv(_log())

    assert text.splitlines()[0] == "epoch,loss,train_acc,test_acc,tpr,tnr"
    assert len(text.splitlines()) == 3
    assert archive.log_digest(_log()) == archive.log_digest(_log())
    assert len(archive.log_digest(_log())) == 64


def test_split_index_round_trip(tmp_path):
    plan = split_plan(25, 0.2, seed=4)
    path = tmp_path / "split_index.csv"
    path.write_text(archive.split_index_csv(plan))

    assert archive.read_split_index(path) == {"train": plan.train_indices, "test": plan.test_indices}


def test_run_dirs_never_collide(tmp_path):
    now = datetime(2024, 5, 1, 12, 0, 0)
    first = archive.create_run_dir(tmp_path, 7, now=now)
    second = archive.create_run_dir(tmp_path, 7, now=now)

    assert first.name == "20240501-120000_seed7"
    assert second.name == "20240501-120000_seed7-1"


def test_write_archive_with_undefined_roc(tmp_path, baseline_config):
    cm = ConfusionMatrix(tp=0, fn=0, tn=4, fp=1)
    report = EvaluationReport(confusion=cm, rates=rates(cm), threshold=0.5, rows=5)
    paths = archive.write_archive(
        tmp_path,
        checkpoint_from_model(BaselineNet(baseline_config)),
        {"seed": np.int64(3)},
        _log(),
        report,
        None,
        split_plan(10, 0.2, seed=0),
    )

    assert [p.name for p in paths] == archive.ARTIFACTS
    assert all(p.exists() for p in paths)
    assert pd.read_csv(tmp_path / "roc.csv").empty
    assert "single class" in (tmp_path / "roc.svg").read_text()

    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["confusion"] == {"tp": 0, "fn": 0, "tn": 4, "fp": 1}
    assert metrics["auc"] is None
    assert metrics["rates"]["tpr"] is None
    assert metrics["rates"]["tnr"] == pytest.approx(0.8)


def test_roc_csv_columns():
    curve = roc([0.9, 0.8, 0.3, 0.1], [1, 0, 1, 0])
    frame = pd.read_csv(io.StringIO(archive.roc_csv(curve)))

    assert list(frame.columns) == ["threshold", "fpr", "tpr"]
    assert frame["fpr"].iloc[-1] == 1.0
