"""
Environment-driven settings.

Values come from the process environment (populated from `.env` by
`load_dotenv()` in main.py). Everything has a default so the library works
without any configuration.
"""

import logging
import os
from dataclasses import dataclass
from functools import lru_cache

from .errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Settings:
    threads: int
    site_budget: int
    mode_budget: int
    dense_limit: int
    kappa_max: int
    log_level: str
    config_dir: str


def _int_env(name: str, default: int, minimum: int = 1) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}", pointer=name)
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}", pointer=name)
    return value


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Read the settings once per process."""
    level = os.getenv("ADIABATLAB_LOG_LEVEL", "INFO").upper()
    if not isinstance(logging.getLevelName(level), int):
        raise ConfigError(f"Unknown log level {level!r}", pointer="ADIABATLAB_LOG_LEVEL")

    settings = Settings(
        threads=_int_env("ADIABATLAB_THREADS", max(1, os.cpu_count() or 1)),
        site_budget=_int_env("ADIABATLAB_SITE_BUDGET", 4096),
        mode_budget=_int_env("ADIABATLAB_MODE_BUDGET", 14),
        dense_limit=_int_env("ADIABATLAB_DENSE_LIMIT", 4096),
        kappa_max=_int_env("ADIABATLAB_KAPPA_MAX", 4),
        log_level=level,
        config_dir=os.getenv("ADIABATLAB_CONFIG_DIR", "config"),
    )
    logger.debug(f"Settings loaded: {settings}")
    return settings
