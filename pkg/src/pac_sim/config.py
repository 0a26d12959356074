"""Environment-driven settings and logging setup."""

from __future__ import annotations

import logging
import os
import sys
from typing import Literal

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


class ConfigError(Exception):
    """Raised when environment settings are invalid."""


class Settings(BaseModel):
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "WARNING"
    workers: int = Field(4, ge=1)


def load_settings() -> Settings:
    """Read PAC_SIM_LOG and PAC_SIM_WORKERS, after loading a local .env."""
    load_dotenv()
    raw: dict[str, object] = {}
    if level := os.environ.get("PAC_SIM_LOG"):
        raw["log_level"] = level.strip().upper()
    if workers := os.environ.get("PAC_SIM_WORKERS"):
        raw["workers"] = workers.strip()
    try:
        return Settings.model_validate(raw)
    except ValidationError as e:
        fields = ", ".join(str(err["loc"][0]) for err in e.errors())
        raise ConfigError(f"invalid environment setting: {fields}") from e


def configure_logging(settings: Settings) -> None:
    root = logging.getLogger("pac_sim")
    if not root.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
    root.setLevel(settings.log_level)
