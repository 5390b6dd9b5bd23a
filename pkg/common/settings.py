"""Module that loads runtime settings from the environment."""

import os
from dataclasses import dataclass

from dotenv import load_dotenv

from common.constants import group_enumeration_cap


@dataclass(frozen=True)
class Settings:
    """
    Runtime settings. Values come from the environment or a .env file.
    """

    threads: int
    database_path: str
    group_cap: int
    log_level: str
    log_file: str | None


def load_settings() -> Settings:
    """
    Loads ENV variables.
    :return: Settings
    """
    load_dotenv()
    threads = int(os.getenv("QFSLAB_THREADS", str(os.cpu_count() or 1)))
    return Settings(
        threads=max(1, threads),
        database_path=os.getenv("QFSLAB_DB_PATH", "qfslab.sqlite"),
        group_cap=int(os.getenv("QFSLAB_GROUP_CAP", str(group_enumeration_cap))),
        log_level=os.getenv("QFSLAB_LOG_LEVEL", "INFO").upper(),
        log_file=os.getenv("QFSLAB_LOG_FILE") or None,
    )
