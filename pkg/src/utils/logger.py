"""
Logging setup shared by the library and the CLI.
"""

import logging
import sys

from config.settings import LOG_LEVEL

_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
_configured = False


def configure(level: str | int | None = None) -> None:
    """Install one stderr handler on the package root logger (idempotent)."""
    global _configured
    root = logging.getLogger("wgm")
    if not _configured:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(_FORMAT))
        root.addHandler(handler)
        root.propagate = False
        _configured = True
    root.setLevel(level if level is not None else LOG_LEVEL)


def get_logger(name: str) -> logging.Logger:
    """
    Return a child of the package logger.

    Usage:
        log = get_logger(__name__)
        log.info("wrote %s", path)
    """
    if not _configured:
        configure()
    short = name.removeprefix("src.")
    return logging.getLogger(f"wgm.{short}")
