"""
Bundled synthetic dataset.

Writes an FPA_FOD-shaped fire-record CSV and matching 100x100 grayscale tiles.
The label can be carried by the weather aggregates (linearly separable with a
hard margin), by tile brightness, or by both; the other columns are noise.
"""

from datetime import date, timedelta
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from app.config import IMAGE_SIZE, WEATHER_COLUMNS, WEATHER_VARIABLES, WEATHER_WINDOWS_DAYS
from app.exceptions import UsageError
from app.services.data_processor import write_gray_image
from app.utils.logging_config import get_logger

logger = get_logger("data")

_FIRST_DAY = date(2005, 1, 1)
_DAYS = 4017  # through 2015-12-31
_HUMAN_CAUSES = np.arange(2, 14)

# (base, natural-minus-other shift) per weather variable
_WEATHER_PROFILE = {
    "temp": (18.0, 6.0),
    "wind": (3.5, 1.0),
    "humid": (45.0, -12.0),
    "precip": (0.12, -0.08),
}
# noise half-width as a fraction of |shift|; below the 0.1 * |shift| margin
_NOISE = 0.05


class Signal(str, Enum):
    WEATHER = "weather"
    IMAGE = "image"
    BOTH = "both"


class SyntheticPaths(BaseModel):
    csv: Path
    image_dir: Optional[Path] = None
    rows: int
    natural: int


def synthesize_frame(
    n: int = 400,
    natural_fraction: float = 0.3,
    seed: int = 42,
    signal: Signal = Signal.BOTH,
) -> pd.DataFrame:
    """
    Fire records with the documented CSV columns.

    With a weather signal every window of every variable is shifted by
    sign * z * shift / 2 with z in [0.2, 1], and the noise stays below that
    margin, so any single weather column separates the classes.
    """
    if n < 2:
        raise UsageError("synthetic dataset needs at least 2 rows")
    if not 0.0 < natural_fraction < 1.0:
        raise UsageError(f"natural fraction must lie in (0, 1), got {natural_fraction}")
    signal = Signal(signal)
    rng = np.random.default_rng(seed)

    natural_count = min(n - 1, max(1, int(round(n * natural_fraction))))
    labels = np.zeros(n, dtype=int)
    labels[rng.choice(n, natural_count, replace=False)] = 1
    sign = np.where(labels == 1, 1.0, -1.0)
    strength = rng.uniform(0.2, 1.0, n)

    frame = pd.DataFrame(
        {
            "FOD_ID": np.arange(1, n + 1),
            "LATITUDE": np.round(rng.uniform(32.5, 42.0, n), 6),
            "LONGITUDE": np.round(rng.uniform(-124.0, -114.5, n), 6),
            "DISCOVERY_DATE": [
                (_FIRST_DAY + timedelta(days=int(d))).isoformat() for d in rng.integers(0, _DAYS, n)
            ],
            "STAT_CAUSE_CODE": np.where(labels == 1, 1, rng.choice(_HUMAN_CAUSES, n)),
            "FIRE_SIZE": np.round(rng.lognormal(0.0, 1.5, n), 3),
            "veg_category": rng.integers(1, 29, n),
        }
    )
    carries_weather = signal in (Signal.WEATHER, Signal.BOTH)
    for var in WEATHER_VARIABLES:
        base, shift = _WEATHER_PROFILE[var]
        for days in WEATHER_WINDOWS_DAYS:
            if carries_weather:
                offset = sign * strength * shift / 2.0
            else:
                offset = rng.uniform(-0.5, 0.5, n) * abs(shift)
            values = base + offset + rng.uniform(-_NOISE, _NOISE, n) * abs(shift)
            if var == "humid":
                values = np.clip(values, 0.0, 100.0)
            if var == "precip":
                values = np.clip(values, 0.0, None)
            frame[f"avg_{var}_{days}d"] = np.round(values, 6)

    return frame[
        ["FOD_ID", "LATITUDE", "LONGITUDE", "DISCOVERY_DATE", "STAT_CAUSE_CODE", "FIRE_SIZE", "veg_category",
         *WEATHER_COLUMNS]
    ]


def tile_pixels(natural: bool, rng: np.random.Generator, carries_label: bool = True) -> np.ndarray:
    """Bright tiles for natural causes, dark for the rest; noise only otherwise."""
    level = (0.68 if natural else 0.32) if carries_label else rng.uniform(0.3, 0.7)
    level += rng.uniform(-0.06, 0.06)
    pixels = level + rng.normal(0.0, 0.08, (IMAGE_SIZE, IMAGE_SIZE))
    return np.clip(pixels, 0.0, 1.0)


def synthesize(
    directory: Union[str, Path],
    n: int = 400,
    natural_fraction: float = 0.3,
    seed: int = 42,
    signal: Signal = Signal.BOTH,
    images: bool = True,
) -> SyntheticPaths:
    """Write `fires.csv` and, when requested, `tiles/<FOD_ID>.pgm` under directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    frame = synthesize_frame(n, natural_fraction, seed, signal)
    csv_path = directory / "fires.csv"
    frame.to_csv(csv_path, index=False, lineterminator="\n")

    image_dir = None
    if images:
        image_dir = directory / "tiles"
        rng = np.random.default_rng(seed + 1)
        carries = Signal(signal) in (Signal.IMAGE, Signal.BOTH)
        for fod_id, cause in zip(frame["FOD_ID"], frame["STAT_CAUSE_CODE"]):
            write_gray_image(tile_pixels(cause == 1, rng, carries), image_dir / f"{fod_id}.pgm")

    natural = int((frame["STAT_CAUSE_CODE"] == 1).sum())
    logger.info(f"Synthesised {n} records ({natural} natural) in {directory}")
    return SyntheticPaths(csv=csv_path, image_dir=image_dir, rows=n, natural=natural)


def synthesize_grid_tiles(
    directory: Union[str, Path],
    rows: int,
    cols: int,
    seed: int = 42,
    identical: bool = False,
) -> Path:
    """Write `<index>.pgm` tiles for a rows x cols prediction grid."""
    directory = Path(directory)
    rng = np.random.default_rng(seed)
    shared = tile_pixels(True, rng) if identical else None
    for index in range(rows * cols):
        pixels = shared if identical else tile_pixels(bool(rng.integers(0, 2)), rng)
        write_gray_image(pixels, directory / f"{index}.pgm")
    return directory
