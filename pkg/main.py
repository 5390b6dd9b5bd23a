"""Module that contains main application logic."""

import sys

from common.exceptions import QfsLabError
from common.settings import load_settings
from logger.logger import logger
from services.cli_service import run_cli


def main(argv: list[str] | None = None) -> int:
    """
    Main function.
    :param argv: command-line arguments without the program name
    :return: exit status
    """
    logger.debug("Application started.")

    # Load env variables.
    settings = load_settings()

    try:
        status = run_cli(argv, settings)
    except QfsLabError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return 2

    logger.debug("Application finished.")
    return status


if __name__ == "__main__":
    sys.exit(main())
