import asyncio
import json

import numpy as np

from adiabatlab import __version__
from adiabatlab.services.results import ResultTable


def test_tidy_rows():
    table = ResultTable("sweep", "abc", 7)
    table.add_metric({"eps": 0.01, "eta": np.float64(0.1)}, "error", np.float64(1.5e-3))
    table.add_metric({"eps": 0.02, "eta": 0.1}, "slope", 1.9)
    assert len(table) == 2
    assert table.rows[0] == {"experiment": "sweep", "eps": 0.01, "eta": 0.1, "metric": "error", "value": 1.5e-3}
    assert list(table.metric("slope")["value"]) == [1.9]


def test_complex_values():
    table = ResultTable("kubo")
    table.add(value=complex(2.0, 0.0))
    table.add(value=complex(1.0, 2.0))
    assert table.rows[0]["value"] == 2.0
    assert table.rows[1]["value"] == "(1+2j)"


def test_csv_uses_crlf():
    table = ResultTable("gap")
    table.add_metric({"k": 2}, "g", 0.5)
    text = table.to_csv()
    assert text.startswith("experiment,k,metric,value\r\n")
    assert text.endswith("\r\n")
    assert ResultTable("empty").to_csv() == ""


def test_write_is_deterministic(tmp_path):
    def write(out):
        table = ResultTable("norms", "hash", 3)
        table.add_metric({"n": 0}, "interaction_norm", 1.25)
        return asyncio.run(table.write(out))

    first = write(tmp_path / "a")
    second = write(tmp_path / "b")
    assert first.read_bytes() == second.read_bytes()
    provenance = json.loads((tmp_path / "a" / "norms.provenance.json").read_text(encoding="utf-8"))
    assert provenance == {"experiment": "norms", "config_hash": "hash", "code_version": __version__, "seed": 3, "rows": 1}
