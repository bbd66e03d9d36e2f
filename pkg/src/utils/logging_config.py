from __future__ import annotations

import logging
import os
import sys
from typing import Optional, Union

from dotenv import load_dotenv

LOG_LEVEL_ENV = "TAYLORBF_LOG_LEVEL"
LOG_FORMAT = "[%(asctime)s] %(levelname)s %(name)s: %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
HANDLER_NAME = "taylorbf-console"


def resolve_level(level: Optional[Union[int, str]] = None) -> int:
    # flag > environment (.env included) > INFO
    if level is None:
        load_dotenv()
        level = os.getenv(LOG_LEVEL_ENV, "INFO")
    if isinstance(level, str):
        resolved = logging.getLevelName(level.strip().upper())
        return resolved if isinstance(resolved, int) else logging.INFO
    return level


def setup_logging(level: Optional[Union[int, str]] = None) -> logging.Handler:
    """Console handler on the root logger; calling again re-targets stdout and changes the level.

    numpy/scipy ``warnings`` are routed through logging as well.
    """
    root = logging.getLogger()
    handler = next((h for h in root.handlers if h.get_name() == HANDLER_NAME), None)
    if handler is None:
        handler = logging.StreamHandler(sys.stdout)
        handler.set_name(HANDLER_NAME)
        handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT))
        root.addHandler(handler)
    else:
        handler.setStream(sys.stdout)
    root.setLevel(resolve_level(level))
    logging.captureWarnings(True)
    return handler
