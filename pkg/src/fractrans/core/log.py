"""Module responsible for defining logger."""

import logging
from typing import TextIO

LOG_FORMAT = "[%(asctime)s] [%(name)s] (%(levelname)s) %(message)s"
DATE_FORMAT = "%H:%M:%S"


class ColorFormatter(logging.Formatter):
    """Formatter highlighting the log level with ANSI colors."""

    # https://gist.github.com/fnky/458719343aabd01cfb17a3a4f7296797#colors--graphics-mode
    LEVEL_COLORS = {
        logging.DEBUG: "\x1b[38;5;39m",
        logging.INFO: "\x1b[38;21m",
        logging.WARNING: "\x1b[33m",
        logging.ERROR: "\x1b[31m",
        logging.CRITICAL: "\x1b[31;1m",
    }
    RESET = "\x1b[0m"

    def __init__(self) -> None:
        """Prepare one plain formatter per log level."""
        super().__init__(LOG_FORMAT, DATE_FORMAT)
        self._formatters = {
            level: logging.Formatter(color + LOG_FORMAT + self.RESET, DATE_FORMAT)
            for level, color in self.LEVEL_COLORS.items()
        }

    def format(self, record: logging.LogRecord) -> str:
        """Format the record using the color of its level."""
        formatter = self._formatters.get(record.levelno)
        if formatter is None:
            return super().format(record)
        return formatter.format(record)


def set_logging(use_debug: bool, stream: TextIO | None = None) -> None:
    """Configure the root logger to print colored records.

    Handlers installed by a previous call are replaced, so running several
    scenarios in one interpreter does not duplicate output.
    """
    root = logging.getLogger()
    level = logging.DEBUG if use_debug else logging.INFO
    root.setLevel(level)
    for handler in list(root.handlers):
        if isinstance(handler.formatter, ColorFormatter):
            root.removeHandler(handler)
    handler = logging.StreamHandler(stream)
    handler.setLevel(level)
    handler.setFormatter(ColorFormatter())
    root.addHandler(handler)
    # numpy floating point warnings end up in the same stream
    logging.captureWarnings(True)
