import logging
import sys
from pathlib import Path
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

ACCESS_LOGGER_NAME = "vre.access"


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


def setup_logging(level: str = "INFO", log_file: Optional[Path] = None):
    root = logging.getLogger()
    root.setLevel(level.upper())
    for h in list(root.handlers):
        root.removeHandler(h)

    console = Console(stderr=True)
    root.addHandler(RichHandler(console=console, show_path=False, rich_tracebacks=True))

    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(log_file)
        fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        root.addHandler(fh)


def format_access_line(method: str, path: str, status: int, elapsed_ms: float, size) -> str:
    return f"{method} {path} {status} {elapsed_ms:.3f} ms - {size if size is not None else '-'}"


def setup_access_log(log_file: Optional[Path] = None, to_stdout: bool = True) -> logging.Logger:
    """The access log keeps the bare '<METHOD> <path> <status> <ms> ms - <bytes>' line shape."""
    logger = logging.getLogger(ACCESS_LOGGER_NAME)
    logger.setLevel(logging.INFO)
    logger.propagate = False
    for h in list(logger.handlers):
        logger.removeHandler(h)
        h.close()

    plain = logging.Formatter("%(message)s")
    if to_stdout:
        sh = logging.StreamHandler(sys.stdout)
        sh.setFormatter(plain)
        logger.addHandler(sh)
    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(log_file)
        fh.setFormatter(plain)
        logger.addHandler(fh)
    return logger
