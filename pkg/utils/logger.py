"""
Centralized logging configuration for the DBM loss laboratory.
"""

import logging
import os
import sys
from typing import Optional


def _level_from_env(default: int) -> int:
    name = os.getenv("DBM_LAB_LOG_LEVEL")
    if not name:
        return default
    level = logging.getLevelName(name.upper())
    return level if isinstance(level, int) else default


def setup_logger(
        name: str = "dbm_lab",
        level: int = logging.INFO,
        format_string: Optional[str] = None
) -> logging.Logger:
    """
    Set up and configure a logger with consistent formatting.

    Args:
        name: Logger name
        level: Logging level, overridden by DBM_LAB_LOG_LEVEL when set
        format_string: Custom format string for logs

    Returns:
        Configured logger instance
    """
    if format_string is None:
        format_string = (
            "%(asctime)s - %(name)s - %(levelname)s - "
            "%(filename)s:%(lineno)d - %(message)s"
        )

    level = _level_from_env(level)
    logger = logging.getLogger(name)

    # Avoid adding handlers multiple times
    if not logger.handlers:
        logger.setLevel(level)

        # stdout carries command output (tables, reports)
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(level)
        console_handler.setFormatter(logging.Formatter(format_string))
        logger.addHandler(console_handler)

    return logger


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance under the application namespace.

    Args:
        name: Logger name (usually __name__)

    Returns:
        Logger instance
    """
    if name == "dbm_lab" or name.startswith("dbm_lab."):
        return logging.getLogger(name)
    return logging.getLogger(f"dbm_lab.{name}")
