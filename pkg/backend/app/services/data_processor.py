"""
Data processing for the wildfire-cause forecasting engine.

Turns fire-record CSVs, weather series and image tiles into the fixed-width
feature table the models train on.
"""

import io
import re
from datetime import date
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from PIL import Image, UnidentifiedImageError
from pydantic import ValidationError

from app.config import (
    DEFAULT_VEGETATION_GROUPS,
    IMAGE_SIZE,
    NATURAL_CAUSE_CODES,
    VEGETATION_CATEGORIES,
    VEGETATION_GROUP_NAMES,
    WEATHER_COLUMNS,
    WEATHER_VARIABLES,
    WEATHER_WINDOWS_DAYS,
)
from app.exceptions import (
    EncodingError,
    ImageError,
    ImageJoinError,
    RecordParseError,
    RecordValidationError,
    SchemaError,
    WeatherCoverageError,
)
from app.models.checkpoint import StandardizerState
from app.models.records import (
    Dataset,
    FeatureSet,
    FeatureVector,
    FireRecord,
    GrayImage,
    ParsedRecords,
    WeatherSeries,
)
from app.utils.logging_config import get_logger

logger = get_logger("data")

CsvSource = Union[str, Path, io.TextIOBase]

REQUIRED_COLUMNS: List[str] = [
    "FOD_ID",
    "LATITUDE",
    "LONGITUDE",
    "DISCOVERY_DATE",
    "STAT_CAUSE_CODE",
    "veg_category",
    *WEATHER_COLUMNS,
]
OPTIONAL_COLUMNS: List[str] = ["FIRE_SIZE"]

VEGETATION_COLUMNS: List[str] = [f"veg_{g}" for g in VEGETATION_GROUP_NAMES]

# Julian day number of 1970-01-01 00:00 UTC
_UNIX_EPOCH_JD = 2440587.5
_MAX_MISSING_FRACTION = 0.5


# ---------------------------------------------------------------- records

def parse_discovery_date(value: str) -> date:
    """
    Parse a discovery date given as ISO text or as a Julian day number.

    Args:
        value: e.g. "2005-02-02" or "2453403.5"

    Returns:
        Calendar date

    Raises:
        ValueError: If the value is neither form
    """
    text = str(value).strip()
    try:
        julian = float(text)
    except ValueError:
        return pd.Timestamp(text).date()
    return (pd.Timestamp(0) + pd.to_timedelta(julian - _UNIX_EPOCH_JD, unit="D")).date()


def _parse_int(text: str, field: str) -> int:
    number = float(text)
    if not number.is_integer():
        raise ValueError(f"{field} must be an integer, got {text}")
    return int(number)


def _read_csv(source: CsvSource) -> pd.DataFrame:
    try:
        return pd.read_csv(source, dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError as exc:
        raise RecordParseError("CSV input is empty", line=1) from exc
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        raise RecordParseError(f"malformed CSV: {exc}", line=int(match.group(1)) if match else None) from exc
    except UnicodeDecodeError as exc:
        raise RecordParseError(f"CSV is not valid UTF-8: {exc}") from exc


def parse_records(source: CsvSource) -> ParsedRecords:
    """
    Parse a fire-record CSV into validated records.

    Rows with any missing required field are dropped and counted. Values outside
    their domain raise instead of being dropped.

    Args:
        source: Path or text stream of the CSV

    Returns:
        ParsedRecords with the records and the drop count

    Raises:
        RecordParseError: If the CSV is malformed or lacks required columns
        RecordValidationError: If a value is out of range (with its line number)
    """
    df = _read_csv(source)
    df.columns = [c.strip() for c in df.columns]

    missing_columns = [col for col in REQUIRED_COLUMNS if col not in df.columns]
    if missing_columns:
        raise RecordParseError(f"Missing required columns: {', '.join(missing_columns)}", line=1)

    for col in REQUIRED_COLUMNS:
        df[col] = df[col].str.strip().replace("", np.nan)
    incomplete = df[REQUIRED_COLUMNS].isna().any(axis=1)
    dropped = int(incomplete.sum())
    complete = df.loc[~incomplete]

    has_fire_size = "FIRE_SIZE" in df.columns
    records = []
    for index, row in complete.iterrows():
        line = int(index) + 2
        try:
            fire_size = row["FIRE_SIZE"] if has_fire_size else None
            record = FireRecord(
                fod_id=_parse_int(row["FOD_ID"], "FOD_ID"),
                latitude=float(row["LATITUDE"]),
                longitude=float(row["LONGITUDE"]),
                discovery_date=parse_discovery_date(row["DISCOVERY_DATE"]),
                cause_code=_parse_int(row["STAT_CAUSE_CODE"], "STAT_CAUSE_CODE"),
                fire_size=float(fire_size) if isinstance(fire_size, str) and fire_size.strip() else None,
                vegetation_category=_parse_int(row["veg_category"], "veg_category"),
                weather=[float(row[col]) for col in WEATHER_COLUMNS],
            )
        except ValidationError as exc:
            err = exc.errors()[0]
            field = ".".join(str(p) for p in err["loc"])
            raise RecordValidationError(f"{field}: {err['msg']}", line=line) from exc
        except ValueError as exc:
            raise RecordValidationError(str(exc), line=line) from exc
        if not np.all(np.isfinite(record.weather)):
            raise RecordValidationError("weather aggregates must be finite", line=line)
        records.append(record)

    logger.info(f"Parsed {len(records)} fire records, dropped {dropped} with missing values")
    return ParsedRecords(records=records, dropped=dropped)


# ---------------------------------------------------------------- weather

def aggregate_weather(series: WeatherSeries, discovery_date: date) -> List[float]:
    """
    Trailing 7/15/30-day means of each weather variable.

    Windows end at discovery_date 00:00 (exclusive) and span days * 24 hourly
    slots. Missing hours are left out of both sum and count.

    Returns:
        12 values in WEATHER_COLUMNS order (variable-major)

    Raises:
        WeatherCoverageError: If more than half of a window is missing
    """
    frame = pd.DataFrame(
        {var: pd.array(getattr(series, var), dtype="Float64") for var in WEATHER_VARIABLES},
        index=pd.DatetimeIndex(series.timestamps).floor("h"),
    ).astype("float64")
    frame = frame[~frame.index.duplicated(keep="last")]
    end = pd.Timestamp(discovery_date)

    out: Dict[str, float] = {}
    for days in WEATHER_WINDOWS_DAYS:
        hours = pd.date_range(end=end - pd.Timedelta(hours=1), periods=days * 24, freq="h")
        window = frame.reindex(hours)
        for var in WEATHER_VARIABLES:
            values = window[var]
            missing = float(values.isna().mean())
            if missing > _MAX_MISSING_FRACTION:
                raise WeatherCoverageError(var, days, missing)
            out[f"avg_{var}_{days}d"] = float(values.mean(skipna=True))
    return [out[col] for col in WEATHER_COLUMNS]


# ------------------------------------------------------------- vegetation

def load_vegetation_mapping(path: Union[str, Path]) -> Dict[int, int]:
    """
    Read a `veg_category,group` CSV overriding the default grouping.

    Raises:
        EncodingError: If a category or group is out of range
    """
    table = pd.read_csv(path)
    if list(table.columns[:2]) != ["veg_category", "group"]:
        raise EncodingError(f"{path}: expected header 'veg_category,group'")
    mapping: Dict[int, int] = {}
    for category, group in zip(table["veg_category"], table["group"]):
        category, group = int(category), int(group)
        if category not in VEGETATION_CATEGORIES:
            raise EncodingError(f"{path}: vegetation category {category} outside 1..28")
        if group not in VEGETATION_GROUP_NAMES:
            raise EncodingError(f"{path}: group {group} outside 1..6")
        mapping[category] = group
    logger.info(f"Loaded vegetation mapping for {len(mapping)} categories from {path}")
    return mapping


def encode_vegetation(category: int, mapping: Optional[Mapping[int, int]] = None) -> np.ndarray:
    """
    One-hot encode a vegetation category into its coarse group.

    Categories the mapping does not cover encode as all zeros.

    Raises:
        EncodingError: If category is outside 1..28
    """
    if category not in VEGETATION_CATEGORIES:
        raise EncodingError(f"vegetation category {category} outside 1..28")
    mapping = DEFAULT_VEGETATION_GROUPS if mapping is None else mapping
    out = np.zeros(len(VEGETATION_GROUP_NAMES), dtype=np.float64)
    group = mapping.get(category)
    if group is not None:
        out[group - 1] = 1.0
    return out


# ----------------------------------------------------------------- images

def _luminance(rgb: np.ndarray) -> np.ndarray:
    rgb = rgb.astype(np.float64)
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def load_gray_image(path: Union[str, Path], source_id: Optional[int] = None) -> GrayImage:
    """
    Load a 100x100 PGM or PNG tile as grayscale values in [0, 1].

    Colour images are reduced with BT.601 luminance weights before scaling.

    Raises:
        ImageError: If the file is unreadable, not 8-bit, or not 100x100
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode == "L":
                gray = np.asarray(img, dtype=np.float64)
            elif mode == "LA":
                gray = np.asarray(img.getchannel("L"), dtype=np.float64)
            elif mode in ("RGB", "RGBA", "P"):
                gray = _luminance(np.asarray(img.convert("RGB")))
            else:
                raise ImageError(f"{path}: unsupported image mode {mode}")
    except (OSError, UnidentifiedImageError) as exc:
        raise ImageError(f"{path}: cannot read image ({exc})") from exc

    if gray.shape != (IMAGE_SIZE, IMAGE_SIZE):
        raise ImageError(f"{path}: expected {IMAGE_SIZE}x{IMAGE_SIZE}, got {gray.shape[1]}x{gray.shape[0]}")
    if source_id is None:
        try:
            source_id = int(path.stem)
        except ValueError:
            source_id = 0
    return GrayImage(pixels=gray / 255.0, source_id=source_id)


def write_gray_image(pixels: np.ndarray, path: Union[str, Path]) -> Path:
    """Write values in [0, 1] as an 8-bit PGM (binary P5) or PNG, by suffix."""
    path = Path(path)
    data = np.clip(np.round(np.asarray(pixels, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    fmt = "PPM" if path.suffix.lower() == ".pgm" else "PNG"
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data).save(path, format=fmt)
    return path


def find_image(directory: Path, key: Union[int, str]) -> Optional[Path]:
    for suffix in (".pgm", ".png"):
        candidate = directory / f"{key}{suffix}"
        if candidate.exists():
            return candidate
    return None


def load_image_dir(directory: Union[str, Path], ids: Iterable[int]) -> Dict[int, GrayImage]:
    """
    Load `<fod_id>.pgm` / `.png` for each id.

    Raises:
        ImageJoinError: Listing every id without a tile
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ImageError(f"image directory not found: {directory}")
    images: Dict[int, GrayImage] = {}
    missing = []
    for fod_id in ids:
        path = find_image(directory, fod_id)
        if path is None:
            missing.append(fod_id)
            continue
        images[fod_id] = load_gray_image(path, source_id=fod_id)
    if missing:
        raise ImageJoinError(missing)
    logger.info(f"Loaded {len(images)} image tiles from {directory}")
    return images


# ---------------------------------------------------------------- dataset

def weather_columns(feature_set: FeatureSet = FeatureSet.WEATHER) -> List[str]:
    return [f"avg_{var}_{days}d" for var in feature_set.variables for days in WEATHER_WINDOWS_DAYS]


def feature_columns(
    include_vegetation: bool = True,
    include_fire_size: bool = False,
    feature_set: FeatureSet = FeatureSet.WEATHER,
) -> List[str]:
    columns = ["latitude", "longitude", *weather_columns(feature_set)]
    if include_vegetation:
        columns += VEGETATION_COLUMNS
    if include_fire_size:
        columns.append("fire_size")
    return columns


def infer_feature_set(columns: Sequence[str]) -> FeatureSet:
    """The feature set whose weather columns are exactly those present."""
    for feature_set in FeatureSet:
        if set(weather_columns(feature_set)) == {c for c in columns if c in WEATHER_COLUMNS}:
            return feature_set
    raise SchemaError(f"columns {list(columns)} match no weather feature set")


def encode_record(
    record: FireRecord,
    include_vegetation: bool = True,
    include_fire_size: bool = False,
    feature_set: FeatureSet = FeatureSet.WEATHER,
    vegetation_mapping: Optional[Mapping[int, int]] = None,
    positive_causes: Optional[Iterable[int]] = None,
) -> FeatureVector:
    """
    One record as a feature row in `feature_columns` order.

    Label is 1 when the cause code is among positive_causes (natural causes
    by default).

    Raises:
        SchemaError: If include_fire_size and the record has no fire size
        RecordValidationError: If a value is not finite
    """
    weather = [record.weather[WEATHER_COLUMNS.index(c)] for c in weather_columns(feature_set)]
    values = [record.latitude, record.longitude, *weather]
    if include_vegetation:
        values.extend(encode_vegetation(record.vegetation_category, vegetation_mapping).tolist())
    if include_fire_size:
        if record.fire_size is None:
            raise SchemaError(f"record {record.fod_id} has no FIRE_SIZE")
        values.append(record.fire_size)
    positive = NATURAL_CAUSE_CODES if positive_causes is None else frozenset(positive_causes)
    try:
        return FeatureVector(values=values, label=int(record.cause_code in positive))
    except ValidationError as exc:
        raise RecordValidationError(f"record {record.fod_id}: {exc.errors()[0]['msg']}") from exc


def assemble_dataset(
    records: Sequence[FireRecord],
    images: Optional[Mapping[int, GrayImage]] = None,
    include_vegetation: bool = True,
    include_images: bool = False,
    include_fire_size: bool = False,
    vegetation_mapping: Optional[Mapping[int, int]] = None,
    feature_set: FeatureSet = FeatureSet.WEATHER,
    positive_causes: Optional[Iterable[int]] = None,
) -> Dataset:
    """
    Build the feature matrix, label vector and (optionally) image stack.

    Width is 14 without vegetation and 20 with it, plus one when fire size is
    included; the temperature-and-wind feature set drops the six humidity and
    precipitation columns. Label is 1 for natural (lightning) causes unless
    positive_causes names others.

    Raises:
        ImageJoinError: If include_images and a record has no image
        SchemaError: If include_fire_size and a record has no fire size
    """
    columns = feature_columns(include_vegetation, include_fire_size, feature_set)
    if include_images:
        images = images or {}
        missing = [r.fod_id for r in records if r.fod_id not in images]
        if missing:
            raise ImageJoinError(missing)

    positive_causes = None if positive_causes is None else frozenset(positive_causes)
    vectors = [
        encode_record(r, include_vegetation, include_fire_size, feature_set, vegetation_mapping, positive_causes)
        for r in records
    ]

    features = np.asarray([v.values for v in vectors], dtype=np.float64).reshape(len(records), len(columns))
    labels = np.asarray([v.label for v in vectors], dtype=np.int64)
    ids = np.asarray([r.fod_id for r in records], dtype=np.int64)
    stack = None
    if include_images:
        stack = np.stack([images[r.fod_id].pixels for r in records]) if records else \
            np.zeros((0, IMAGE_SIZE, IMAGE_SIZE))

    logger.info(
        f"Assembled dataset: {len(records)} rows x {len(columns)} features, "
        f"{int(labels.sum())} positive"
    )
    return Dataset(features=features, labels=labels, ids=ids, columns=columns, images=stack)


def load_dataset(
    data_path: Union[str, Path],
    image_dir: Optional[Union[str, Path]] = None,
    include_vegetation: bool = True,
    include_images: bool = False,
    include_fire_size: bool = False,
    vegetation_mapping_path: Optional[Union[str, Path]] = None,
    feature_set: FeatureSet = FeatureSet.WEATHER,
    positive_causes: Optional[Iterable[int]] = None,
) -> Dataset:
    """Parse a CSV, join its tiles when requested and assemble the dataset."""
    path = Path(data_path)
    if not path.exists():
        raise RecordParseError(f"Data path not found: {data_path}")
    parsed = parse_records(path)
    mapping = load_vegetation_mapping(vegetation_mapping_path) if vegetation_mapping_path else None
    images = None
    if include_images:
        images = load_image_dir(image_dir, [r.fod_id for r in parsed.records])
    return assemble_dataset(
        parsed.records,
        images=images,
        include_vegetation=include_vegetation,
        include_images=include_images,
        include_fire_size=include_fire_size,
        vegetation_mapping=mapping,
        feature_set=feature_set,
        positive_causes=positive_causes,
    )


class Standardizer:
    """Column z-scoring fitted on training rows; constant columns keep scale 1."""

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)

    @classmethod
    def fit(cls, features: np.ndarray) -> "Standardizer":
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        std[std == 0.0] = 1.0
        return cls(mean, std)

    @classmethod
    def identity(cls, width: int) -> "Standardizer":
        return cls(np.zeros(width), np.ones(width))

    def transform(self, features: np.ndarray) -> np.ndarray:
        if features.shape[-1] != self.mean.shape[0]:
            raise SchemaError(
                f"feature width {features.shape[-1]} does not match the expected width {self.mean.shape[0]}"
            )
        return (features - self.mean) / self.std

    def to_state(self) -> StandardizerState:
        return StandardizerState(mean=self.mean.tolist(), std=self.std.tolist())

    @classmethod
    def from_state(cls, state: StandardizerState) -> "Standardizer":
        return cls(np.asarray(state.mean), np.asarray(state.std))
