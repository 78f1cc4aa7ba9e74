"""
Per-tile probability grids.

A single tabular info row (shared by the whole area) is replicated across a
rows x cols block of image tiles. Tiles are named `<index>.pgm` or
`<index>.png` with index = row * cols + col, row 0 being the northern edge.
"""

import math
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from app.config import get_settings
from app.exceptions import ImageError, ImageJoinError, SchemaError, UsageError
from app.models.metrics import ProbabilityGrid
from app.services.data_processor import Standardizer, find_image, load_gray_image, write_gray_image
from app.services.forecasting.wiin import dump_feature_maps
from app.utils.logging_config import get_logger

logger = get_logger("grid")

METRES_PER_DEGREE_LAT = 111_320.0
GRID_COLUMNS = ["row", "col", "lat", "lon", "probability", "flag_gt_70"]


def parse_info_row(values: Union[str, Sequence[float]], width: int) -> np.ndarray:
    """
    Parse the shared tabular row.

    A 14-value row given to a 20-wide model is padded with six zero
    vegetation entries and a warning; any other width mismatch is rejected.

    Raises:
        SchemaError: If the row width cannot be reconciled with the model
    """
    if isinstance(values, str):
        try:
            values = [float(v) for v in values.replace(",", " ").split()]
        except ValueError as exc:
            raise SchemaError(f"info row is not numeric: {exc}") from exc
    row = np.asarray(values, dtype=np.float64)
    if row.ndim != 1:
        raise SchemaError("info row must be a flat list of numbers")
    if row.size == width:
        return row
    if row.size == 14 and width == 20:
        logger.warning("Info row has 14 values; padding the 6 vegetation entries with zeros")
        return np.concatenate([row, np.zeros(6)])
    raise SchemaError(f"info row has {row.size} values, the model expects width {width}")


def tile_paths(image_dir: Union[str, Path], rows: int, cols: int) -> List[Path]:
    """
    Raises:
        ImageJoinError: Listing every tile index without an image
    """
    directory = Path(image_dir)
    if not directory.is_dir():
        raise ImageError(f"image directory not found: {directory}")
    paths, missing = [], []
    for index in range(rows * cols):
        path = find_image(directory, index)
        if path is None:
            missing.append(index)
        paths.append(path)
    if missing:
        raise ImageJoinError(missing)
    return paths


def tile_coordinates(grid: ProbabilityGrid) -> tuple[np.ndarray, np.ndarray]:
    """North-west corner lat/lon of every tile on a local equirectangular grid."""
    dlat = grid.cell_size_m / METRES_PER_DEGREE_LAT
    dlon = dlat / math.cos(math.radians(grid.origin_lat))
    rows, cols = np.meshgrid(np.arange(grid.rows), np.arange(grid.cols), indexing="ij")
    return grid.origin_lat - rows * dlat, grid.origin_lon + cols * dlon


def predict_grid(
    model,
    info_row: Union[str, Sequence[float]],
    image_dir: Union[str, Path],
    rows: int,
    cols: int,
    origin_lat: float = 0.0,
    origin_lon: float = 0.0,
    standardizer: Optional[Standardizer] = None,
    debug_maps: Optional[Union[str, Path]] = None,
) -> ProbabilityGrid:
    """
    Score every tile of a rows x cols block in eval mode.

    Raises:
        UsageError: If rows or cols is not positive
        ImageJoinError: If a tile is missing
        SchemaError: If the info row does not fit the model
    """
    if rows < 1 or cols < 1:
        raise UsageError(f"grid must be at least 1x1, got {rows}x{cols}")
    width = model.config.tabular_dim if model.uses_images else model.config.input_dim
    row = parse_info_row(info_row, width)
    paths = tile_paths(image_dir, rows, cols)

    features = np.repeat(row[None, :], rows * cols, axis=0)
    if standardizer is not None:
        features = standardizer.transform(features)

    images = None
    if model.uses_images:
        images = np.stack([load_gray_image(p, source_id=i).pixels for i, p in enumerate(paths)])
        if debug_maps is not None:
            for index, tile in enumerate(images):
                dump_feature_maps(model.wiin, tile, debug_maps, str(index))
    elif debug_maps is not None:
        logger.warning("Feature maps requested but the model does not use images; skipping")

    probs = model.predict_proba(features, images).reshape(rows, cols)
    settings = get_settings()
    grid = ProbabilityGrid(
        origin_lat=origin_lat,
        origin_lon=origin_lon,
        rows=rows,
        cols=cols,
        cell_size_m=settings.grid_cell_size_m,
        flag_threshold=settings.grid_flag_threshold,
        probabilities=probs,
    )
    logger.info(
        f"Scored {rows}x{cols} grid: {int(grid.flags.sum())} tiles above {grid.flag_threshold:.2f}"
    )
    return grid


def grid_frame(grid: ProbabilityGrid) -> pd.DataFrame:
    lat, lon = tile_coordinates(grid)
    rows, cols = np.meshgrid(np.arange(grid.rows), np.arange(grid.cols), indexing="ij")
    return pd.DataFrame(
        {
            "row": rows.ravel(),
            "col": cols.ravel(),
            "lat": lat.ravel(),
            "lon": lon.ravel(),
            "probability": grid.probabilities.ravel(),
            "flag_gt_70": grid.flags.ravel().astype(int),
        },
        columns=GRID_COLUMNS,
    )


def write_grid_csv(grid: ProbabilityGrid, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid_frame(grid).to_csv(path, index=False, lineterminator="\n")
    return path


def write_heatmap(grid: ProbabilityGrid, path: Union[str, Path]) -> Path:
    """One pixel per tile, value round(255 * probability)."""
    return write_gray_image(grid.probabilities, path)
