"""
Pytest configuration and fixtures for backend tests.

Provides isolated settings, seeded generators, small model configurations and
a synthetic dataset written once per session.
"""

from pathlib import Path

import numpy as np
import pytest

from app.config import get_settings
from app.models.configs import BaselineConfig, HybridConfig, ResNetConfig, WITConfig
from app.services.synthetic import SyntheticPaths, synthesize


@pytest.fixture(scope="function", autouse=True)
def isolated_settings(monkeypatch, tmp_path):
    """
    Point logs and archives at the test's temp dir.

    Settings are cached, so the cache is cleared before and after each test.
    """
    monkeypatch.setenv("WILDFIRE_LOG_TO_FILE", "false")
    monkeypatch.setenv("WILDFIRE_ARCHIVE_ROOT", str(tmp_path / "saved_progress"))
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def baseline_config() -> BaselineConfig:
    return BaselineConfig(input_dim=20, epochs=5)


@pytest.fixture
def tiny_hybrid_config() -> HybridConfig:
    """
    Narrow ResNet and WIT (D=8, 2 heads, no dropout) for gradient checks.

    The spatial pipeline is unchanged, so the 51/26/26/13/10 trace still holds.
    """
    return HybridConfig(
        tabular_dim=4,
        resnet=ResNetConfig(stem_channels=2, block1_channels=2, block1_units=1, block2_channels=2),
        wit=WITConfig(hidden_dim=8, heads=2, mlp_neurons=4, layers=1, dropout=0.0),
        epochs=1,
    )


@pytest.fixture(scope="session")
def synthetic_data(tmp_path_factory) -> SyntheticPaths:
    """200 records with weather and image signal, plus tiles."""
    return synthesize(tmp_path_factory.mktemp("synthetic"), n=200, natural_fraction=0.3, seed=7)


@pytest.fixture
def fire_csv(tmp_path) -> Path:
    """Three hand-written records: one natural, one arson, one with a missing field."""
    weather = ",".join(str(v) for v in [20, 21, 22, 3, 3, 3, 40, 41, 42, 0.1, 0.1, 0.1])
    header = (
        "FOD_ID,LATITUDE,LONGITUDE,DISCOVERY_DATE,STAT_CAUSE_CODE,FIRE_SIZE,veg_category,"
        "avg_temp_7d,avg_temp_15d,avg_temp_30d,avg_wind_7d,avg_wind_15d,avg_wind_30d,"
        "avg_humid_7d,avg_humid_15d,avg_humid_30d,avg_precip_7d,avg_precip_15d,avg_precip_30d"
    )
    rows = [
        f"1,39.7,-121.6,2005-02-02,1,0.1,11,{weather}",
        f"2,38.1,-120.2,2453403.5,7,2.5,4,{weather}",
        f"3,37.0,-119.0,2006-07-01,5,,,{weather}",
    ]
    path = tmp_path / "fires.csv"
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")
    return path


# Pytest configuration hooks
def pytest_collection_modifyitems(config, items):
    """Modify test collection to add markers automatically."""
    for item in items:
        if "tests/unit/" in str(item.fspath):
            item.add_marker(pytest.mark.unit)
        if "tests/integration/" in str(item.fspath):
            item.add_marker(pytest.mark.integration)
