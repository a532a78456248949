# flowtopo/core/logging.py
import logging
import sys
from typing import Optional

from flowtopo.core.config import get_settings

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging once; progress goes to stderr, never stdout."""
    level_name = (level or get_settings().FLOWTOPO_LOG_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )
