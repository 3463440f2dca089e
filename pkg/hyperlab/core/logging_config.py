import logging
from typing import Optional

from hyperlab.core.config import LOG_LEVEL


def setup_logging(level: Optional[str] = None):
    LOG = logging.getLogger("hyperlab")
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
        format="%(levelname)s:%(name)s:%(message)s",
    )
    return LOG
