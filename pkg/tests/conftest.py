import copy
from pathlib import Path

import numpy as np
import pytest

from adiabatlab.models.config import ModelConfig
from adiabatlab.models.model import Model
from adiabatlab.settings import get_settings

ROOT = Path(__file__).resolve().parents[1]

# staggered mass ±1 with weak hopping: one filled level per odd site, gap ≈ 0.9
TINY = {
    "schema_version": 1,
    "name": "tiny",
    "lattice": {"d": 1, "k": [1, 2], "bc": "open"},
    "r": 1,
    "h0": [
        {"type": "on-site", "mu": 0.0, "staggered": 1.0},
        {"type": "hopping", "t": 0.2, "envelope": {"name": "ramp", "t_start": 0.0, "t_end": 1.0, "start": 0.5, "end": 1.0}},
    ],
    "h1": [],
    "potential": {"slope": 0.2, "axis": 0},
    "gap": {"g": 0.5, "g_tilde": 0.3, "kappa_max": 1, "mode": "bottom"},
    "time": {"t0": 0.0, "t1": 1.0, "points": 3},
    "decay": {"name": "exponential", "a": 1.0},
    "observables": {
        "density0": {"type": "density", "site": [0]},
        "current0": {"type": "current", "site": [0], "axis": 0},
        "identity": {"type": "identity"},
    },
}


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Each test sees the environment it sets, not a cached copy."""
    for name in (
        "ADIABATLAB_THREADS",
        "ADIABATLAB_MODE_BUDGET",
        "ADIABATLAB_SITE_BUDGET",
        "ADIABATLAB_DENSE_LIMIT",
        "ADIABATLAB_KAPPA_MAX",
        "ADIABATLAB_LOG_LEVEL",
    ):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("ADIABATLAB_CONFIG_DIR", str(ROOT / "config"))
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def tiny_data():
    return copy.deepcopy(TINY)


@pytest.fixture
def static_data(tiny_data):
    tiny_data["name"] = "tiny_static"
    del tiny_data["h0"][1]["envelope"]
    return tiny_data


@pytest.fixture
def tiny_model(tiny_data):
    return Model(ModelConfig.from_dict(tiny_data))


@pytest.fixture
def static_model(static_data):
    return Model(ModelConfig.from_dict(static_data))
