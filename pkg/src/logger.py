import logging
import os
from pathlib import Path

project_root = Path(__file__).parent.parent.absolute()

LOG_FILE = Path(os.environ.get("GRADEDMG_LOG_FILE", project_root / "graded-mg.log"))

FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
CONSOLE_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


def _console_level() -> int:
    level_name = os.environ.get("LOG_LEVEL", "INFO").upper()
    return getattr(logging, level_name, logging.INFO)


def setup_logger(name=__name__):
    """Return a module logger writing DEBUG to the log file and LOG_LEVEL to stderr.

    Console output goes to stderr so that JSON printed by the CLI on stdout stays parseable.
    """
    logger = logging.getLogger(name)
    logger.setLevel(logging.DEBUG)

    if not logger.handlers:
        try:
            fh = logging.FileHandler(LOG_FILE)
        except OSError:
            fh = None
        if fh is not None:
            fh.setLevel(logging.DEBUG)
            fh.setFormatter(logging.Formatter(FILE_FORMAT))
            logger.addHandler(fh)

        sh = logging.StreamHandler()
        sh.setLevel(_console_level())
        sh.setFormatter(logging.Formatter(CONSOLE_FORMAT))
        logger.addHandler(sh)
        logger.propagate = False

    return logger
