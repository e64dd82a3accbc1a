"""Runtime settings, tolerances and logging setup."""

import logging
import os
import sys
from functools import lru_cache

import structlog
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from myller_geometry.errors import SchemaError


class Tolerances(BaseModel):
    """Numerical thresholds shared by the geometry modules."""

    model_config = ConfigDict(frozen=True)

    ortho: float = Field(default=1e-9, gt=0)
    k_min: float = Field(default=1e-8, gt=0)
    predicate: float = Field(default=1e-6, gt=0)
    fd_step: float = Field(default=1e-5, gt=0)
    gauge: float = Field(default=1e-6, gt=0)


DEFAULT_TOLERANCES = Tolerances()


class Settings(BaseModel):
    """Environment-derived settings."""

    model_config = ConfigDict(frozen=True)

    grid_size: int = Field(default=1024, ge=5)
    log_level: str = "WARNING"
    log_json: bool = True
    tolerances: Tolerances = DEFAULT_TOLERANCES


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Read settings from the environment (and a .env file if present)."""
    load_dotenv()

    raw_tolerances: dict[str, str] = {}
    if os.getenv("MYLLER_TOL_PREDICATE"):
        raw_tolerances["predicate"] = os.getenv("MYLLER_TOL_PREDICATE", "")
    if os.getenv("MYLLER_FD_STEP"):
        raw_tolerances["fd_step"] = os.getenv("MYLLER_FD_STEP", "")

    try:
        return Settings(
            grid_size=os.getenv("MYLLER_GRID_SIZE", "1024"),
            log_level=os.getenv("MYLLER_LOG_LEVEL", "WARNING").upper(),
            log_json=os.getenv("MYLLER_LOG_JSON", "true").lower() in ("1", "true", "yes"),
            tolerances=Tolerances(**raw_tolerances),
        )
    except ValidationError as e:
        loc = e.errors()[0]["loc"]
        raise SchemaError(f"Invalid environment setting: {e.errors()[0]['msg']}",
                          pointer="/" + "/".join(str(p) for p in loc)) from e


def configure_logging(level: str = "WARNING", json_logs: bool = True) -> None:
    """Configure structlog to write to stderr at the given level."""
    renderer = (
        structlog.processors.JSONRenderer()
        if json_logs
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.processors.TimeStamper(fmt="ISO"),
            structlog.processors.add_log_level,
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            getattr(logging, level.upper(), logging.WARNING),
        ),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=True,
    )
