"""
Runtime settings
Loads .env, then reads simulator settings from the environment
"""

import os

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from logging_config import get_logger

logger = get_logger(__name__)

# Global settings instance
_settings = None


class Settings(BaseModel):
    log_level: str = "INFO"
    log_dir: str = "./logs"
    cache_dir: str = ".oracle_cache"
    jobs: int = Field(default=0, ge=0)  # 0 -> logical cores
    mc_samples: int = Field(default=10_000, ge=1)
    mc_paths: int = Field(default=200, ge=1)
    oracle_seed: int = 20240917
    trace_path: str | None = None

    def worker_count(self):
        return self.jobs or (os.cpu_count() or 1)


_ENV_KEYS = {
    "log_level": "LOG_LEVEL",
    "log_dir": "LOG_DIR",
    "cache_dir": "SIM_CACHE_DIR",
    "jobs": "SIM_JOBS",
    "mc_samples": "ORACLE_MC_SAMPLES",
    "mc_paths": "ORACLE_MC_PATHS",
    "oracle_seed": "ORACLE_SEED",
    "trace_path": "TRACE_PATH",
}


def load_settings():
    """
    Build settings from the environment

    Precedence: real environment, then .env in the working directory,
    then the model defaults. Empty variables count as unset.
    """
    global _settings

    load_dotenv()
    values = {}
    for field_name, env_key in _ENV_KEYS.items():
        raw = os.getenv(env_key)
        if raw not in (None, ""):
            values[field_name] = raw

    try:
        _settings = Settings(**values)
    except ValidationError as e:
        # Bad env values should not kill the CLI; fall back to defaults
        logger.warning(f"[SETTINGS] Ignoring invalid environment settings: {e}")
        _settings = Settings()

    logger.debug(f"[SETTINGS] Loaded: {_settings.model_dump()}")
    return _settings


def get_settings():
    """
    Get the settings instance
    Loads it if not already done
    """
    global _settings
    if _settings is None:
        _settings = load_settings()
    return _settings


def reset_settings():
    global _settings
    _settings = None
