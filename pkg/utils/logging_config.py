import logging
import sys
from pathlib import Path
from typing import Optional

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def setup_logging(level: str = "WARNING", log_dir: Optional[str] = None):
    """Setup logging to stderr, plus irvo.log when a log directory is given.

    Standard output is left alone; it carries reports, models and DOT text.
    """
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_dir:
        directory = Path(log_dir)
        directory.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(directory / "irvo.log", encoding="utf-8"))

    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        format=LOG_FORMAT,
        datefmt=DATE_FORMAT,
        handlers=handlers,
        force=True,
    )

    # lark logs grammar construction at DEBUG
    logging.getLogger("lark").setLevel(logging.WARNING)

    perf_logger = logging.getLogger("performance")
    perf_logger.setLevel(logging.INFO if level.upper() in ("DEBUG", "INFO") else logging.WARNING)

    logging.debug("Logging configuration initialized")
