"""Environment-backed settings.

Values come from the process environment, optionally populated from a `.env`
file by `load_settings()`.
"""

import logging
import os
from dataclasses import dataclass

from dotenv import load_dotenv

SEED_ENV_VAR = "BROYDEN_LAB_SEED"
LOG_LEVEL_ENV_VAR = "BROYDEN_LAB_LOG_LEVEL"

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


@dataclass(frozen=True)
class Settings:
    seed_override: int | None
    log_level: str


def load_settings(dotenv: bool = True) -> Settings:
    if dotenv:
        load_dotenv()
    raw_seed = os.environ.get(SEED_ENV_VAR)
    seed_override = None
    if raw_seed is not None and raw_seed.strip():
        try:
            seed_override = int(raw_seed)
        except ValueError:
            logging.getLogger(__name__).warning(
                "Ignoring non-integer %s=%r", SEED_ENV_VAR, raw_seed
            )
    log_level = os.environ.get(LOG_LEVEL_ENV_VAR, "INFO").upper()
    return Settings(seed_override=seed_override, log_level=log_level)


def configure_logging(level: str = "INFO") -> None:
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT)
