import os
import logging
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_POINTS = 16384


class Settings(BaseModel):
    model_config = ConfigDict(frozen=True)

    threads: int
    log_level: str = "WARNING"
    chunk_points: int = DEFAULT_CHUNK_POINTS


def _positive_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"Ignoring {name}={raw!r}: not an integer, using {default}")
        return default
    if value < 1:
        logger.warning(f"Ignoring {name}={raw!r}: must be positive, using {default}")
        return default
    return value


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Load settings from the environment (and a `.env` file if present)"""
    load_dotenv()
    level = os.getenv("GRIDOHM_LOG_LEVEL", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        logger.warning(f"Unknown GRIDOHM_LOG_LEVEL {level!r}, using WARNING")
        level = "WARNING"
    return Settings(
        threads=_positive_int("GRIDOHM_THREADS", os.cpu_count() or 1),
        log_level=level,
        chunk_points=_positive_int("GRIDOHM_CHUNK_POINTS", DEFAULT_CHUNK_POINTS),
    )
