import asyncio
import time

import pytest

from adiabatlab.errors import BudgetExceeded, GapError
from adiabatlab.models.config import ModelConfig
from adiabatlab.models.model import Model
from adiabatlab.monitors.budget import BudgetMonitor
from adiabatlab.monitors.gap import GapMonitor
from adiabatlab.utils.logger import RunLogger


def test_gap_rows(tiny_model):
    monitor = GapMonitor(tiny_model)
    rows = asyncio.run(monitor.check())
    assert len(rows) == 2 * 3
    assert all(row["kappa"] == 1 for row in rows)
    assert all(row["g"] >= 0.5 for row in rows)
    assert monitor.checked


def test_missing_gap_is_critical(tiny_data):
    tiny_data["gap"]["g"] = 5.0
    model = Model(ModelConfig.from_dict(tiny_data))
    run_logger = RunLogger()
    with pytest.raises(GapError):
        asyncio.run(GapMonitor(model, run_logger).check(ks=[1], times=[0.0]))
    assert run_logger.events("gap")[0]["severity"] == "critical"


def test_spectrum_rows(tiny_model):
    rows = GapMonitor(tiny_model).spectrum(1, 0.0)
    assert len(rows) == 8


def test_budget():
    assert BudgetMonitor().remaining is None
    BudgetMonitor().check()
    monitor = BudgetMonitor(0.01)
    time.sleep(0.02)
    with pytest.raises(BudgetExceeded):
        monitor.check("sweep")


def test_budget_guard():
    async def slow():
        await asyncio.sleep(1.0)

    async def fast():
        return 3

    monitor = BudgetMonitor(0.05)
    assert asyncio.run(monitor.guard(fast())) == 3
    with pytest.raises(BudgetExceeded):
        asyncio.run(monitor.guard(slow()))
