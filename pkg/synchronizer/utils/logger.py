"""Logger setup for the CLI and the experiment runner.

Library modules only call ``logging.getLogger(__name__)``; handlers live on
the package logger 'synchronizer' and are attached here.
"""

import logging
import sys
from pathlib import Path
from typing import Optional, Union


DEFAULT_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')
# matplotlib logs font-cache rebuilds at INFO
QUIET_LOGGERS = ('matplotlib', 'PIL')


def parse_level(level: Union[int, str]) -> int:
    """'info' / 'INFO' / logging.INFO -> logging.INFO."""
    if isinstance(level, int):
        return level
    name = str(level).upper()
    if name not in LEVELS:
        raise ValueError(f"Unknown log level '{level}', expected one of {LEVELS}")
    return getattr(logging, name)


def verbosity_level(count: int) -> int:
    """CLI -v count: 0 -> WARNING, 1 -> INFO, 2+ -> DEBUG."""
    return (logging.WARNING, logging.INFO)[count] if count < 2 else logging.DEBUG


def setup_logger(
    name: str = 'synchronizer',
    log_file: Optional[Path] = None,
    level: Union[int, str] = logging.INFO,
    format_string: Optional[str] = None,
    console: bool = True,
) -> logging.Logger:
    """
    Configure the package logger with console and optional file output.

    Args:
        name: Logger name (package root so module loggers propagate into it)
        log_file: Run log, e.g. <output_dir>/experiment.log
        level: Level or level name
        format_string: Custom format string
        console: Attach a stdout handler

    Returns:
        Configured logger instance
    """
    level = parse_level(level)
    logger = logging.getLogger(name)
    logger.setLevel(level)
    close_file_handlers(logger)
    logger.handlers.clear()
    logger.propagate = False

    formatter = logging.Formatter(format_string or DEFAULT_FORMAT)
    handlers = []
    if console:
        handlers.append(logging.StreamHandler(sys.stdout))
    if log_file:
        log_file = Path(log_file)
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding='utf-8'))
    for handler in handlers:
        handler.setLevel(level)
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    for noisy in QUIET_LOGGERS:
        logging.getLogger(noisy).setLevel(max(level, logging.WARNING))
    return logger


def close_file_handlers(logger: logging.Logger) -> None:
    """Detach and close file handlers so output directories can be removed."""
    for handler in list(logger.handlers):
        if isinstance(handler, logging.FileHandler):
            handler.close()
            logger.removeHandler(handler)
