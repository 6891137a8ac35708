"""
Gap monitor.
Checks the declared gap on every (k, t) point before an experiment runs.
"""

import asyncio
import logging
from typing import Iterable, List, Optional

from ..core.spectral import spectrum_rows, track_patches
from ..errors import GapError

logger = logging.getLogger(__name__)


class GapMonitor:
    """Verifies the gap condition of a model over a grid of boxes and times."""

    def __init__(self, model, run_logger=None):
        """
        Initialize the gap monitor.

        Args:
            model: the Model whose gap declaration is checked
            run_logger: optional RunLogger receiving gap events
        """
        self.model = model
        self.run_logger = run_logger
        self.rows: List[dict] = []
        self.checked = False

    def _check_point(self, k: int, t: float):
        es, patch = self.model.at(k).patch(t)
        return k, t, es, patch

    async def check(self, ks: Optional[Iterable[int]] = None, times: Optional[Iterable[float]] = None, semaphore: Optional[asyncio.Semaphore] = None) -> List[dict]:
        """Diagonalize H₀ on every grid point; raises a GapError on failure.

        Returns one row per (k, t) with g, κ and the patch edges.
        """
        ks = list(self.model.ks if ks is None else ks)
        times = list(self.model.config.time_grid if times is None else times)
        semaphore = semaphore or asyncio.Semaphore(1)

        async def run(k, t):
            async with semaphore:
                return await asyncio.to_thread(self._check_point, k, t)

        try:
            results = await asyncio.gather(*(run(k, t) for k in ks for t in times))
            track_patches([(k, t, patch) for k, t, _, patch in results])
        except GapError as e:
            if self.run_logger:
                await self.run_logger.log_event("gap", str(e), "critical")
            raise

        self.rows = []
        for k, t, es, patch in results:
            self.rows.append({
                "k": k,
                "t": t,
                "g": patch.g,
                "kappa": patch.kappa,
                "f_minus": patch.f_minus,
                "f_plus": patch.f_plus,
            })
        smallest = min(row["g"] for row in self.rows)
        logger.info(f"✅ Gap verified for {self.model.name} on {len(self.rows)} points (smallest g = {smallest:.4f})")
        if self.run_logger:
            await self.run_logger.log_event("gap", f"gap ≥ {smallest:.4f} on {len(self.rows)} points", "info")
        self.checked = True
        return self.rows

    def spectrum(self, k: int, t: float) -> List[dict]:
        es, patch = self.model.at(k).patch(t)
        return spectrum_rows(k, t, es, patch)
