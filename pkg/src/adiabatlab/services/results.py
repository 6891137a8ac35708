"""
Result tables.
Tidy rows held in a pandas DataFrame, written as CSV plus a provenance file.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import aiofiles
import pandas as pd

from .. import __version__

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    """numpy scalars and complex numbers as CSV-friendly values."""
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        value = value.item()
    if isinstance(value, complex):
        return value.real if value.imag == 0 else str(value)
    return value


class ResultTable:
    """Rows of one experiment with their provenance."""

    def __init__(self, experiment: str, config_hash: Optional[str] = None, seed: Optional[int] = None):
        self.experiment = experiment
        self.config_hash = config_hash
        self.seed = seed
        self.rows: List[Dict[str, Any]] = []

    def __len__(self) -> int:
        return len(self.rows)

    def add(self, **row):
        self.rows.append({"experiment": self.experiment, **{key: _plain(value) for key, value in row.items()}})

    def add_metric(self, params: Dict[str, Any], metric: str, value: Any):
        """One tidy row (experiment, params..., metric, value)."""
        self.add(**params, metric=metric, value=value)

    def extend(self, rows: Iterable[Dict[str, Any]]):
        for row in rows:
            self.add(**row)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def metric(self, name: str) -> pd.DataFrame:
        frame = self.to_frame()
        if frame.empty or "metric" not in frame:
            return frame
        return frame[frame["metric"] == name].reset_index(drop=True)

    def to_csv(self) -> str:
        """RFC-4180 text: comma separated, CRLF line ends, repr floats."""
        frame = self.to_frame()
        if frame.empty:
            return ""
        return frame.to_csv(index=False, lineterminator="\r\n", float_format=None)

    def provenance(self) -> Dict[str, Any]:
        return {
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "code_version": __version__,
            "seed": self.seed,
            "rows": len(self.rows),
        }

    async def write(self, out_dir: Path, name: Optional[str] = None) -> Path:
        """Write <name>.csv and <name>.provenance.json under out_dir."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        name = name or self.experiment
        csv_path = out_dir / f"{name}.csv"
        async with aiofiles.open(csv_path, "wb") as f:
            await f.write(self.to_csv().encode("utf-8"))
        async with aiofiles.open(out_dir / f"{name}.provenance.json", "w", encoding="utf-8") as f:
            await f.write(json.dumps(self.provenance(), indent=2, sort_keys=True) + "\n")
        logger.info(f"Wrote {len(self.rows)} rows to {csv_path}")
        return csv_path
