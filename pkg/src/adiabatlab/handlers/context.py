"""
Shared state of one command run.
"""

import asyncio
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, List, Optional

import numpy as np

from ..models.config import ModelConfig
from ..models.model import Model
from ..monitors.budget import BudgetMonitor
from ..monitors.gap import GapMonitor
from ..services.report import RunReport
from ..services.results import ResultTable
from ..settings import get_settings
from ..utils.logger import RunLogger

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    """Everything a driver needs besides its own parameters."""

    config: ModelConfig
    out_dir: Path
    seed: int = 0
    plots: bool = False
    budget: BudgetMonitor = field(default_factory=BudgetMonitor)
    threads: Optional[int] = None
    report: Optional[RunReport] = None
    run_logger: Optional[RunLogger] = None

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        self.model = Model(self.config)
        self.threads = self.threads or get_settings().threads
        self.semaphore = asyncio.Semaphore(self.threads)
        if self.report is None:
            self.report = RunReport(self.config.name)
        if self.run_logger is None:
            self.run_logger = RunLogger(alert_callback=self.report.alert)
        self.tables: List[ResultTable] = []

    @property
    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def table(self, experiment: str) -> ResultTable:
        table = ResultTable(experiment, self.config.config_hash, self.seed)
        self.tables.append(table)
        return table

    async def verify_gap(self, ks: Optional[Iterable[int]] = None, times: Optional[Iterable[float]] = None) -> List[dict]:
        """Gap check that every experiment runs before spending its budget."""
        monitor = GapMonitor(self.model, self.run_logger)
        return await self.budget.guard(monitor.check(ks, times, self.semaphore), "gap check")

    async def map(self, fn: Callable[..., Any], items: Iterable[tuple]) -> List[Any]:
        """fn(*item) for every item in worker threads; results in item order."""

        async def run(item):
            async with self.semaphore:
                self.budget.check()
                return await asyncio.to_thread(fn, *item)

        return await self.budget.guard(asyncio.gather(*(run(item) for item in items)))

    async def write_all(self):
        for table in self.tables:
            await table.write(self.out_dir)
        await self.report.write(self.out_dir)
