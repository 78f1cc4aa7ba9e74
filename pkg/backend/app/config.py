"""
Configuration management for the wildfire-cause forecasting engine.

This module centralizes runtime settings using Pydantic Settings and holds the
reference tables (NWCG causes, vegetation categories) the data pipeline uses.
"""

from typing import Dict, Optional, Tuple, Union
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import field_validator
from functools import lru_cache


class Settings(BaseSettings):
    """Application configuration settings."""

    # Environment
    environment: str = "development"

    # Logging
    log_dir: str = "logs"
    log_to_file: bool = True

    # Experiment archive ("saved progress")
    archive_root: str = "saved_progress"
    default_seed: int = 42

    # Optional CSV (veg_category,group) overriding the default 28 -> 6 grouping
    vegetation_mapping_path: Optional[str] = None

    # Checkpoint container
    checkpoint_format_version: int = 1

    # Probability grid
    grid_flag_threshold: float = 0.70
    grid_cell_size_m: float = 100.0

    model_config = SettingsConfigDict(
        env_prefix="WILDFIRE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False
    )

    @field_validator('environment')
    @classmethod
    def validate_environment(cls, v: str) -> str:
        """Only development and production are recognised."""
        v = v.lower().strip()
        if v not in ("development", "production"):
            raise ValueError(f"Unknown environment: {v}")
        return v

    @field_validator('grid_flag_threshold')
    @classmethod
    def validate_flag_threshold(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError("grid_flag_threshold must lie in [0, 1]")
        return v


# NWCG general causes: NASF cause code -> (NASF name, proposed NWCG standard)
NWCG_CAUSES: Dict[int, Tuple[str, str]] = {
    1: ("Lightning", "Natural"),
    2: ("Equipment Use", "Equipment and vehicle use"),
    3: ("Smoking", "Smoking"),
    4: ("Campfire", "Recreation and ceremony"),
    5: ("Debris Burning", "Debris and open burning"),
    6: ("Railroad", "Railroad operations and maintenance"),
    7: ("Arson", "Arson"),
    8: ("Children", "Misuse of fire by a minor"),
    9: ("Miscellaneous", "Other causes"),
    10: ("Fireworks", "Fireworks"),
    11: ("Power line", "Power generation/transmission/distribution"),
    12: ("Structure", "Other causes"),
    13: ("Missing/Undefined", "Undetermined (Human or Natural)"),
}

# Cause codes that produce label 1
NATURAL_CAUSE_CODES: frozenset[int] = frozenset({1})

# Dominant vegetation categories
VEGETATION_CATEGORIES: Dict[int, str] = {
    1: "Tropical Evergreen Broadleaf Forest",
    2: "Tropical Deciduous Broadleaf Forest",
    3: "Temperate Evergreen Broadleaf Forest",
    4: "Temperate Evergreen Needleleaf Forest",
    5: "Temperate Deciduous Broadleaf Forest",
    6: "Boreal Evergreen Needleleaf Forest",
    7: "Boreal Deciduous Needleleaf Forest",
    8: "Savanna",
    9: "C3 Grassland/Steppe",
    10: "C4 Grassland/Steppe",
    11: "Dense Shrubland",
    12: "Open Shrubland",
    13: "Tundra",
    14: "Desert",
    15: "Polar Desert/Rock/Ice",
    16: "Secondary Tropical Evergreen Broadleaf Forest",
    17: "Secondary Tropical Deciduous Broadleaf Forest",
    18: "Secondary Temperate Evergreen Broadleaf Forest",
    19: "Secondary Temperate Evergreen Needleleaf Forest",
    20: "Secondary Temperate Deciduous Broadleaf Forest",
    21: "Secondary Boreal Evergreen Needleleaf Forest",
    22: "Secondary Boreal Deciduous Needleleaf Forest",
    23: "Water/Rivers",
    24: "C3 Cropland",
    25: "C4 Cropland",
    26: "C3 Pastureland",
    27: "C4 Pastureland",
    28: "Urban land",
}

# Coarse groups making up the 6-wide one-hot block
VEGETATION_GROUP_NAMES: Dict[int, str] = {
    1: "forest",
    2: "savanna/grassland",
    3: "shrubland",
    4: "tundra/desert/polar",
    5: "cropland/pasture",
    6: "water/urban",
}

DEFAULT_VEGETATION_GROUPS: Dict[int, int] = {
    **{c: 1 for c in (1, 2, 3, 4, 5, 6, 7, 16, 17, 18, 19, 20, 21, 22)},
    **{c: 2 for c in (8, 9, 10)},
    **{c: 3 for c in (11, 12)},
    **{c: 4 for c in (13, 14, 15)},
    **{c: 5 for c in (24, 25, 26, 27)},
    **{c: 6 for c in (23, 28)},
}

# Weather aggregate columns, in FeatureVector order
WEATHER_VARIABLES: list[str] = ["temp", "wind", "humid", "precip"]
WEATHER_WINDOWS_DAYS: list[int] = [7, 15, 30]
WEATHER_COLUMNS: list[str] = [
    f"avg_{var}_{days}d" for var in WEATHER_VARIABLES for days in WEATHER_WINDOWS_DAYS
]

IMAGE_SIZE: int = 100


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


def describe_cause(code: int) -> str:
    """Human-readable cause label, e.g. '7-Arson'."""
    name, _ = NWCG_CAUSES.get(code, ("Unknown", "Unknown"))
    return f"{code}-{name}"


def cause_code_for(label: Union[str, int]) -> int:
    """NWCG cause code for a cause name ('Lightning', 'arson') or a code ('7')."""
    text = str(label).strip()
    if text.isdigit() and int(text) in NWCG_CAUSES:
        return int(text)
    for code, (name, _) in NWCG_CAUSES.items():
        if name.lower() == text.lower():
            return code
    names = ", ".join(name for name, _ in NWCG_CAUSES.values())
    raise ValueError(f"unknown cause {label!r}; choose one of {names}")
