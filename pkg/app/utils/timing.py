"""
Wall-clock timing of long-running operations.

Measures elapsed time of a block and logs it, warning when the block runs
longer than the slow-operation threshold.
"""

import logging
import time
from typing import Optional

from app.config import get_settings

logger = logging.getLogger(__name__)


class Timer:
    """
    Context manager tracking the processing time of a named operation.

    Example:
        with Timer("EM fit") as timer:
            ...
        timer.elapsed  # seconds
    """

    def __init__(self, label: str, threshold_s: Optional[float] = None):
        self.label = label
        self.threshold_s = (
            get_settings().SLOW_OPERATION_THRESHOLD_S if threshold_s is None else threshold_s
        )
        self.elapsed = 0.0
        self._start = 0.0

    def __enter__(self) -> "Timer":
        self._start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.elapsed = time.perf_counter() - self._start
        log_message = f"{self.label} - {self.elapsed:.3f}s"
        if exc_type is not None:
            logger.info(f"{log_message} (failed: {exc_type.__name__})")
        elif self.elapsed > self.threshold_s:
            logger.warning(f"SLOW OPERATION: {log_message}")
        else:
            logger.info(log_message)
