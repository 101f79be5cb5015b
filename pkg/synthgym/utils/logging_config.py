"""Logging configuration for synthgym."""

import logging
import os
from pathlib import Path
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> logging.Logger:
    """Configure logging for the application.

    Level and file default to SYNTHGYM_LOG_LEVEL / SYNTHGYM_LOG_FILE. An empty
    log file name keeps output on the console only.
    """
    level = level or os.getenv('SYNTHGYM_LOG_LEVEL', 'INFO')
    if log_file is None:
        log_file = os.getenv('SYNTHGYM_LOG_FILE', 'synthgym.log')

    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(Path(log_file)))

    logging.basicConfig(
        level=level.upper(),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )

    return logging.getLogger('synthgym')


def set_verbose(verbose: bool):
    """Switch the package logger to DEBUG."""
    if verbose:
        logger.setLevel(logging.DEBUG)
        for handler in logging.getLogger().handlers:
            handler.setLevel(logging.DEBUG)
        logging.getLogger().setLevel(logging.DEBUG)


# Create logger instance
logger = setup_logging()
