"""Package logger for wsnloc."""

import logging

import colorlog

from ..const import PACKAGE_NAME

_LOGGER: logging.Logger = logging.getLogger(PACKAGE_NAME)
INDENT = "  "

LOG_FORMAT = "%(log_color)s%(asctime)s %(levelname)-8s%(reset)s %(name)s: %(message)s"


def setup_console_logging(verbose: bool = False) -> None:
    """Attach a colored console handler to the package logger (CLI only)."""
    handler = colorlog.StreamHandler()
    handler.setFormatter(
        colorlog.ColoredFormatter(
            LOG_FORMAT,
            datefmt="%H:%M:%S",
            log_colors={
                "DEBUG": "cyan",
                "INFO": "green",
                "WARNING": "yellow",
                "ERROR": "red",
                "CRITICAL": "red,bg_white",
            },
        )
    )
    _LOGGER.handlers.clear()
    _LOGGER.addHandler(handler)
    _LOGGER.setLevel(logging.DEBUG if verbose else logging.INFO)
    _LOGGER.propagate = False
