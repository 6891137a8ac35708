"""
Model configuration: JSON loading and schema validation.

Validation stops at the first problem and reports it with a JSON pointer
(`/h0/1/t2`), so a malformed file always names the offending key.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from ..core.lattice import BOUNDARY_CONDITIONS
from ..errors import ConfigError
from ..settings import get_settings

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

FAMILY_TYPES = {
    "hopping": {"t"},
    "dimerized-hopping": {"delta"},
    "density-density": {"u"},
    "on-site": {"mu", "staggered"},
}
FAMILY_OPTIONS = {"type", "envelope", "wrap", "scale", "axis"}
SCALES = ("none", "inverse-k")
OBSERVABLE_TYPES = {"density": {"site"}, "current": {"site", "axis"}, "identity": set()}
GAP_MODES = ("bottom", "window")
TOP_LEVEL = {"schema_version", "name", "lattice", "r", "h0", "h1", "potential", "gap", "time", "decay", "observables"}


def _require(condition: bool, message: str, pointer: str):
    if not condition:
        raise ConfigError(message, pointer)


def _number(value, pointer: str, positive: bool = False) -> float:
    _require(isinstance(value, (int, float)) and not isinstance(value, bool), f"expected a number, got {value!r}", pointer)
    if positive:
        _require(value > 0, f"expected a positive number, got {value}", pointer)
    return float(value)


def _integer(value, pointer: str, minimum: int = 0) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool), f"expected an integer, got {value!r}", pointer)
    _require(value >= minimum, f"expected an integer >= {minimum}, got {value}", pointer)
    return int(value)


def _object(value, pointer: str) -> Dict:
    _require(isinstance(value, dict), f"expected an object, got {type(value).__name__}", pointer)
    return value


def _validate_envelope(spec, pointer: str):
    if spec is None:
        return
    _object(spec, pointer)
    _require("name" in spec, "envelope needs a 'name'", pointer)
    for key, value in spec.items():
        if key != "name":
            _number(value, f"{pointer}/{key}")


def _validate_family(spec, pointer: str):
    _object(spec, pointer)
    kind = spec.get("type")
    _require(kind in FAMILY_TYPES, f"unknown family type {kind!r}; use one of {sorted(FAMILY_TYPES)}", pointer + "/type")
    allowed = FAMILY_TYPES[kind] | FAMILY_OPTIONS
    for key in spec:
        _require(key in allowed, f"unknown key {key!r} for a {kind} family", f"{pointer}/{key}")
    coefficients = FAMILY_TYPES[kind] - {"staggered"}
    for key in sorted(coefficients):
        _require(key in spec, f"{kind} family needs {key!r}", f"{pointer}/{key}")
        _number(spec[key], f"{pointer}/{key}")
    if "staggered" in spec:
        _number(spec["staggered"], pointer + "/staggered")
    if "wrap" in spec:
        _require(isinstance(spec["wrap"], bool), "wrap must be true or false", pointer + "/wrap")
    if "scale" in spec:
        _require(spec["scale"] in SCALES, f"scale must be one of {SCALES}", pointer + "/scale")
    if "axis" in spec:
        _integer(spec["axis"], pointer + "/axis")
    _validate_envelope(spec.get("envelope"), pointer + "/envelope")


def validate(data: Any) -> Dict:
    """Check a model description; returns it unchanged or raises ConfigError."""
    _object(data, "")
    for key in data:
        _require(key in TOP_LEVEL, f"unknown top-level key {key!r}", f"/{key}")
    version = data.get("schema_version", SCHEMA_VERSION)
    _require(version == SCHEMA_VERSION, f"unsupported schema_version {version!r}", "/schema_version")
    _require(isinstance(data.get("name"), str) and data["name"], "model needs a non-empty 'name'", "/name")

    lattice = _object(data.get("lattice"), "/lattice")
    d = _integer(lattice.get("d", 1), "/lattice/d", 1)
    ks = lattice.get("k")
    _require(isinstance(ks, list) and ks, "lattice.k must be a non-empty list", "/lattice/k")
    for i, k in enumerate(ks):
        _integer(k, f"/lattice/k/{i}", 1)
    _require(len(set(ks)) == len(ks), "lattice.k has repeated sizes", "/lattice/k")
    bc = lattice.get("bc", "open")
    _require(bc in BOUNDARY_CONDITIONS, f"bc must be one of {BOUNDARY_CONDITIONS}", "/lattice/bc")
    _require(d <= 2, "only d = 1 and d = 2 are supported", "/lattice/d")
    _integer(data.get("r", 1), "/r", 1)

    h0 = data.get("h0")
    _require(isinstance(h0, list) and h0, "h0 must be a non-empty list of families", "/h0")
    for i, family in enumerate(h0):
        _validate_family(family, f"/h0/{i}")
    h1 = data.get("h1", [])
    _require(isinstance(h1, list), "h1 must be a list of families", "/h1")
    for i, family in enumerate(h1):
        _validate_family(family, f"/h1/{i}")

    if data.get("potential") is not None:
        potential = _object(data["potential"], "/potential")
        _number(potential.get("slope"), "/potential/slope")
        _integer(potential.get("axis", 0), "/potential/axis")
        _require(potential.get("axis", 0) < d, "potential axis outside the lattice dimension", "/potential/axis")
        _validate_envelope(potential.get("envelope"), "/potential/envelope")
        _require(bc == "open", "a linear potential needs open boundary conditions", "/lattice/bc")

    gap = _object(data.get("gap"), "/gap")
    g = _number(gap.get("g"), "/gap/g", positive=True)
    g_tilde = _number(gap.get("g_tilde"), "/gap/g_tilde", positive=True)
    _require(g_tilde < g, f"need 0 < g_tilde < g, got g_tilde={g_tilde}, g={g}", "/gap/g_tilde")
    if "kappa_max" in gap:
        _integer(gap["kappa_max"], "/gap/kappa_max", 1)
    mode = gap.get("mode", "bottom")
    _require(mode in GAP_MODES, f"gap mode must be one of {GAP_MODES}", "/gap/mode")
    if mode == "window":
        window = gap.get("window")
        _require(isinstance(window, list) and len(window) == 2, "window mode needs window [lo, hi]", "/gap/window")
        lo = _number(window[0], "/gap/window/0")
        hi = _number(window[1], "/gap/window/1")
        _require(lo < hi, "window needs lo < hi", "/gap/window")

    time = _object(data.get("time"), "/time")
    t0 = _number(time.get("t0"), "/time/t0")
    t1 = _number(time.get("t1"), "/time/t1")
    _require(t1 > t0, "time interval needs t1 > t0", "/time/t1")
    _integer(time.get("points", 5), "/time/points", 2)

    if data.get("decay") is not None:
        decay = _object(data["decay"], "/decay")
        _require(decay.get("name") in ("constant", "exponential", "subexponential"), "unknown decay name", "/decay/name")

    observables = _object(data.get("observables", {}), "/observables")
    for name, spec in observables.items():
        pointer = f"/observables/{name}"
        _object(spec, pointer)
        kind = spec.get("type")
        _require(kind in OBSERVABLE_TYPES, f"unknown observable type {kind!r}", pointer + "/type")
        for key in sorted(OBSERVABLE_TYPES[kind]):
            _require(key in spec, f"{kind} observable needs {key!r}", f"{pointer}/{key}")
        if "site" in spec:
            site = spec["site"]
            _require(isinstance(site, list) and len(site) == d, f"site must be a list of {d} integers", pointer + "/site")
            for i, c in enumerate(site):
                _integer(c, f"{pointer}/site/{i}", -10 ** 6)
    return data


@dataclass
class ModelConfig:
    """A validated model description."""

    name: str
    d: int
    ks: List[int]
    bc: str
    r: int
    h0: List[Dict]
    h1: List[Dict]
    potential: Optional[Dict]
    g: float
    g_tilde: float
    kappa_max: int
    gap_mode: str
    window: Optional[Tuple[float, float]]
    t0: float
    t1: float
    points: int
    decay: Optional[Dict]
    observables: Dict[str, Dict]
    raw: Dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data: Dict) -> "ModelConfig":
        validate(data)
        lattice = data["lattice"]
        gap = data["gap"]
        window = tuple(gap["window"]) if gap.get("mode", "bottom") == "window" else None
        return cls(
            name=data["name"],
            d=lattice.get("d", 1),
            ks=sorted(lattice["k"]),
            bc=lattice.get("bc", "open"),
            r=data.get("r", 1),
            h0=list(data["h0"]),
            h1=list(data.get("h1", [])),
            potential=data.get("potential"),
            g=float(gap["g"]),
            g_tilde=float(gap["g_tilde"]),
            kappa_max=int(gap.get("kappa_max", get_settings().kappa_max)),
            gap_mode=gap.get("mode", "bottom"),
            window=window,
            t0=float(data["time"]["t0"]),
            t1=float(data["time"]["t1"]),
            points=int(data["time"].get("points", 5)),
            decay=data.get("decay"),
            observables=dict(data.get("observables", {})),
            raw=data,
        )

    @property
    def time_grid(self) -> List[float]:
        step = (self.t1 - self.t0) / (self.points - 1)
        return [self.t0 + i * step for i in range(self.points)]

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def with_gap(self, g: float, g_tilde: Optional[float] = None) -> "ModelConfig":
        """Copy with a different gap declaration."""
        raw = json.loads(json.dumps(self.raw))
        raw["gap"]["g"] = g
        if g_tilde is not None:
            raw["gap"]["g_tilde"] = g_tilde
        return ModelConfig.from_dict(raw)


def parse_model_json(text: str, source: str = "<string>") -> ModelConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}", "") from None
    return ModelConfig.from_dict(data)


def load_model_config(source: Union[str, Path, Dict]) -> ModelConfig:
    """Load from a dict, a file path, or a gallery name such as 'm1_dimerized'."""
    if isinstance(source, dict):
        return ModelConfig.from_dict(source)
    path = Path(source)
    if not path.exists():
        gallery = Path(get_settings().config_dir) / "models" / f"{source}.json"
        if gallery.exists():
            path = gallery
        else:
            raise ConfigError(f"model file {source} not found", "")
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    config = parse_model_json(text, str(path))
    logger.info(f"Loaded model {config.name} from {path}")
    return config
