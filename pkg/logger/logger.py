"""Module that contains logging logic."""

import logging
import re
import sys
from enum import Enum

from common.settings import load_settings


class ColorCodes(Enum):
    """
    ANSI escape codes for colors.
    """

    GREY = "\x1b[38;21m"
    GREEN = "\x1b[1;32m"
    YELLOW = "\x1b[33;21m"
    RED = "\x1b[31;21m"
    BOLD_RED = "\x1b[31;1m"
    BLUE = "\x1b[1;34m"
    LIGHT_BLUE = "\x1b[1;36m"
    PURPLE = "\x1b[1;35m"
    RESET = "\x1b[0m"


class BraceFormatStyleFormatter(logging.Formatter):
    """
    A formatter that supports brace format style for log messages.
    """

    def __init__(self, fmt: str):
        super().__init__()
        self.formatter = logging.Formatter(fmt)

    @staticmethod
    def is_brace_format_style(record: logging.LogRecord) -> bool:
        """
        Check if the log record is in brace format style.
        :param record: Log record
        :return: bool
        """
        if not record.args or not isinstance(record.msg, str):
            return False

        msg = record.msg
        if "%" in msg:
            return False

        opening = msg.count("{")
        return opening == msg.count("}") == len(record.args)

    @staticmethod
    def rewrite_record(record: logging.LogRecord):
        """Rewrite log record to support brace format style."""
        if not BraceFormatStyleFormatter.is_brace_format_style(record):
            return

        record.msg = record.msg.format(*record.args)
        record.args = ()

    def format(self, record):
        orig_msg = record.msg
        orig_args = record.args
        self.rewrite_record(record)
        formatted = self.formatter.format(record)

        # Restore the record for the other handlers.
        record.msg = orig_msg
        record.args = orig_args
        return formatted


class ColorizedArgsFormatter(logging.Formatter):
    """
    A formatter that colorizes the level name and alternates colors of
    brace-style arguments.
    """

    arg_colors = [ColorCodes.PURPLE, ColorCodes.LIGHT_BLUE]
    level_fields = ["levelname", "levelno"]
    level_to_color = {
        logging.DEBUG: ColorCodes.GREY,
        logging.INFO: ColorCodes.GREEN,
        logging.WARNING: ColorCodes.YELLOW,
        logging.ERROR: ColorCodes.RED,
        logging.CRITICAL: ColorCodes.BOLD_RED,
    }

    def __init__(self, fmt: str):
        super().__init__()
        self.level_to_formatter = {}
        for level, color in ColorizedArgsFormatter.level_to_color.items():
            _format = fmt
            for fld in ColorizedArgsFormatter.level_fields:
                search = r"(%\(" + fld + r"\).*?s)"
                _format = re.sub(
                    search, f"{color.value}\\1{ColorCodes.RESET.value}", _format
                )
            self.level_to_formatter[level] = logging.Formatter(_format)

    @staticmethod
    def rewrite_record(record: logging.LogRecord):
        """
        Wraps every brace placeholder in alternating argument colors.
        :param record: Log record
        :return:
        """
        if not BraceFormatStyleFormatter.is_brace_format_style(record):
            return

        msg = record.msg.replace("{", "_{{").replace("}", "_}}")
        placeholder_count = 0
        while "_{{" in msg:
            color_index = placeholder_count % len(ColorizedArgsFormatter.arg_colors)
            color = ColorizedArgsFormatter.arg_colors[color_index].value
            msg = msg.replace("_{{", color + "{", 1)
            msg = msg.replace("_}}", "}" + ColorCodes.RESET.value, 1)
            placeholder_count += 1

        record.msg = msg.format(*record.args)
        record.args = ()

    def format(self, record):
        orig_msg = record.msg
        orig_args = record.args
        formatter = self.level_to_formatter.get(
            record.levelno, self.level_to_formatter[logging.INFO]
        )
        self.rewrite_record(record)
        formatted = formatter.format(record)
        record.msg = orig_msg
        record.args = orig_args
        return formatted


def init_logging(level: str = "INFO", log_file: str | None = None):
    """
    Initializes logging.
    :param level: console level name
    :param log_file: optional path of a plain-text log file at DEBUG
    :return: the handlers that were added
    """
    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG if log_file else level)
    handlers: list[logging.Handler] = []

    console_handler = logging.StreamHandler(stream=sys.stdout)
    console_handler.setLevel(level)
    console_format = "[%(asctime)s %(threadName)s %(levelname)s] %(message)s"
    console_handler.setFormatter(ColorizedArgsFormatter(console_format))
    root_logger.addHandler(console_handler)
    handlers.append(console_handler)

    if log_file:
        file_handler = logging.FileHandler(filename=log_file, encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)
        file_format = "[%(asctime)s %(threadName)s, %(levelname)s] %(message)s"
        file_handler.setFormatter(BraceFormatStyleFormatter(file_format))
        root_logger.addHandler(file_handler)
        handlers.append(file_handler)
    return handlers


_settings = load_settings()
init_logging(level=_settings.log_level, log_file=_settings.log_file)
logger = logging.getLogger(__name__)
logging.getLogger("sqlalchemy.engine").setLevel(logging.WARNING)
logging.getLogger("aiosqlite").setLevel(logging.WARNING)
logging.getLogger("asyncio").setLevel(logging.WARNING)
