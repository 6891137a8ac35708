"""
Built-in model gallery.

M1  dimerized hopping chain with a staggered mass and a ramped dimerization
M2  M1 plus a weak nearest-neighbour density-density interaction
M3  static M1 with a linear potential and a short-range H₁ switched on
"""

import logging
from pathlib import Path
from typing import Dict, List

from ..errors import ConfigError
from ..settings import get_settings
from .config import ModelConfig, load_model_config
from .model import Model

logger = logging.getLogger(__name__)

GALLERY: Dict[str, str] = {
    "m1": "m1_dimerized",
    "m2": "m2_interacting",
    "m3": "m3_tilted",
}


def gallery_dir() -> Path:
    return Path(get_settings().config_dir) / "models"


def list_gallery() -> List[str]:
    return sorted(GALLERY)


def gallery_config(name: str) -> ModelConfig:
    """Config of a gallery model by short name ('m1') or file stem ('m1_dimerized')."""
    stem = GALLERY.get(name.lower(), name)
    if stem not in GALLERY.values():
        raise ConfigError(f"unknown gallery model {name!r}; choose from {list_gallery()}")
    path = gallery_dir() / f"{stem}.json"
    if not path.exists():
        raise ConfigError(f"gallery file {path} is missing")
    return load_model_config(path)


def gallery_model(name: str) -> Model:
    return Model(gallery_config(name))
