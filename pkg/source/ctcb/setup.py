"""Initialize ctcb."""
import logging
import os
from typing import Optional

from opentelemetry import trace

import ctcb

from .config import ENV_VAR_CTCB_LOG_LEVEL

tracer = trace.get_tracer(__name__, ctcb.__version_str__)


def _config_logging(level: str) -> None:
    """Configure logging."""
    logging.basicConfig(level=level.upper(), format="%(asctime)s %(process)d %(levelname)s %(message)s", force=True)


def init(level: Optional[str] = None) -> None:
    """Initialize ctcb logging. The level falls back to CTCB_LOG_LEVEL, then WARNING."""
    with tracer.start_as_current_span("ctcb.setup.init") as span:
        _config_logging(level or os.environ.get(ENV_VAR_CTCB_LOG_LEVEL, "WARNING"))
        logging.info("ctcb %s initialized", ctcb.__version_str__)
        span.add_event("ctcb initialized")
