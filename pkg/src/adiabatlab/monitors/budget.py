"""
Budget monitor.
Enforces the --budget-seconds wall-clock limit of a run.
"""

import asyncio
import logging
import time
from typing import Optional

from ..errors import BudgetExceeded

logger = logging.getLogger(__name__)


class BudgetMonitor:
    """Wall-clock budget shared by all grid points of one run."""

    def __init__(self, seconds: Optional[float] = None):
        self.seconds = seconds
        self.started = time.monotonic()

    @property
    def elapsed(self) -> float:
        return time.monotonic() - self.started

    @property
    def remaining(self) -> Optional[float]:
        if self.seconds is None:
            return None
        return self.seconds - self.elapsed

    def check(self, what: str = "run"):
        """Raise BudgetExceeded once the budget is spent."""
        if self.seconds is not None and self.elapsed > self.seconds:
            raise BudgetExceeded(f"{what} exceeded the budget of {self.seconds:g} s after {self.elapsed:.1f} s")

    async def guard(self, coro, what: str = "run"):
        """Await `coro` with the remaining budget as timeout."""
        if self.seconds is None:
            return await coro
        try:
            return await asyncio.wait_for(coro, timeout=max(self.remaining, 0.0))
        except asyncio.TimeoutError:
            logger.warning(f"⏱️ Budget of {self.seconds:g} s exhausted during {what}")
            raise BudgetExceeded(f"{what} exceeded the budget of {self.seconds:g} s") from None
