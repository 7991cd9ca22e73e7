import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")
# Captured before the autouse fixture clears the environment
REAL_TRACE_PATH = os.environ.get("TRACE_PATH")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fixture_trace():
    return os.path.join(FIXTURES, "batch_task.csv")


@pytest.fixture
def orthogonal_slices():
    from core_model import StoreSlice

    return [
        StoreSlice(np.array([1.0]), np.array([[1.0, 0.0]])),
        StoreSlice(np.array([1.0]), np.array([[0.0, 1.0]])),
    ]


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch, tmp_path):
    """Keep tests away from the developer's .env, cache and log directory."""
    from settings import reset_settings

    for key in ("LOG_LEVEL", "LOG_DIR", "SIM_CACHE_DIR", "SIM_JOBS", "ORACLE_MC_SAMPLES",
                "ORACLE_MC_PATHS", "ORACLE_SEED", "TRACE_PATH"):
        monkeypatch.delenv(key, raising=False)
    monkeypatch.setenv("LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("SIM_CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setattr("settings.load_dotenv", lambda *a, **k: False)
    reset_settings()
    yield
    reset_settings()


def pytest_configure(config):
    # RUN_SLOW=1 lifts the default "-m not slow" selection
    if os.environ.get("RUN_SLOW") == "1" and config.option.markexpr == "not slow":
        config.option.markexpr = ""
