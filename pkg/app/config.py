"""
Solver configuration management using Pydantic Settings.
Loads environment variables from .env file with type validation.
"""

import logging
from functools import lru_cache

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Library and CLI settings loaded from environment variables.

    All settings can be overridden via .env file or environment variables
    (e.g. ``LSR_TOL=1e-10``). Per-run options live in ``FitConfig`` and
    ``ExperimentConfig``, which take their defaults from here.
    """

    # Logging Configuration
    LOG_LEVEL: str = "INFO"
    SLOW_OPERATION_THRESHOLD_S: float = 60.0

    # Weighted LSR Configuration
    LSR_TOL: float = 1e-8
    LSR_MAX_ITER: int = 100
    STATIONARY_TOL: float = 1e-12
    STATIONARY_MAX_ITER_PER_ITEM: int = 100
    STATIONARY_MIN_ITER: int = 10_000
    WEIGHT_FLOOR_RATIO: float = 1e-12  # weights below ratio * max(w) ignored for connectivity

    # Spectral Clustering Configuration
    KMEANS_RESTARTS: int = 10
    KMEANS_MAX_ITER: int = 100
    SVD_DIRECT_MAX_DIM: int = 4096  # above this many pairs, decompose the Gram matrix
    SINGULAR_VALUE_RTOL: float = 1e-10

    # Least Squares Configuration
    MIN_CLAMP: float = 1e-6
    MAX_CLAMP: float = 0.25

    # EM Configuration
    EM_TOL: float = 1e-8
    MAX_EM_ITER: int = 200
    DEGENERATE_MASS_RATIO: float = 1e-8
    RESEED_SCALE: float = 0.1

    # Data Configuration
    TIE_MAX_EXPAND: int = 24

    # Experiment Configuration
    SWEEP_MAX_WORKERS: int = 4

    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", case_sensitive=False, extra="ignore"
    )

    @field_validator("LOG_LEVEL")
    @classmethod
    def parse_log_level(cls, v: str) -> str:
        """Normalize log level names, falling back to INFO for unknown values."""
        level = str(v).upper()
        if level not in logging.getLevelNamesMapping():
            return "INFO"
        return level

    @field_validator("MAX_CLAMP")
    @classmethod
    def check_max_clamp(cls, v: float) -> float:
        """Clamp must stay strictly inside (0, 0.5)."""
        if not 0.0 < v < 0.5:
            raise ValueError("MAX_CLAMP must lie in (0, 0.5)")
        return v


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """
    Get cached settings instance.

    Using lru_cache ensures settings are loaded once and reused.

    Returns:
        Settings: Application settings instance
    """
    return Settings()
