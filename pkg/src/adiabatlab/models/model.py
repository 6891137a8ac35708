"""
Models built from a ModelConfig.

A `Model` owns the interactions Φ_{H₀}, Φ_{H₁}, the potential v and the gap
declaration on every configured box. `BoxModel` is the model on one box Λ_k
and is what the numerical core consumes: H^ε(t) = H₀(t) + ε(V_v(t) + H₁(t)).
"""

import logging
from collections import OrderedDict
from functools import cached_property
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ..core.envelopes import build_envelope
from ..core.fock import (
    FockOperator,
    FockSpace,
    car_operator,
    density_density_terms,
    density_terms,
    hopping_terms,
    number_operator,
)
from ..core.interaction import (
    DecayFunction,
    Interaction,
    LipschitzPotential,
    RecipeMap,
    TermFamily,
    assemble_potential,
    build_decay,
    linear_potential,
)
from ..core.invliou import WeightFunction, build_weight
from ..core.lattice import Box, Site, SiteSet, build_box
from ..core.spectral import EigenSystem, GappedPatch, diagonalize, find_gapped_patch
from ..errors import ConfigError
from .config import ModelConfig

logger = logging.getLogger(__name__)

MAX_CACHED_PATCHES = 256


def _unit(d: int, axis: int) -> Tuple[int, ...]:
    return tuple(1 if a == axis else 0 for a in range(d))


def _bonds(box: Box, axes: List[int], wrap: bool) -> List[Tuple[Site, Site, int]]:
    """Nearest-neighbour bonds (x, x + e_a, a); with wrap, also across the boundary."""
    bonds = []
    size = 2 * box.k + 1
    for x in box.sites:
        for axis in axes:
            y = tuple(c + e for c, e in zip(x, _unit(box.d, axis)))
            if y in box:
                bonds.append((x, y, axis))
            elif wrap:
                y = tuple(((c + box.k) % size) - box.k for c in y)
                bonds.append((x, y, axis))
    return bonds


def _axes(spec: Dict, d: int) -> List[int]:
    if "axis" in spec:
        if spec["axis"] >= d:
            raise ConfigError(f"axis {spec['axis']} outside d={d}")
        return [spec["axis"]]
    return list(range(d))


def family_builder(spec: Dict, r: int, bc: str) -> Callable[[Box], RecipeMap]:
    """Term recipes of one family, per box."""
    kind = spec["type"]
    wrap = spec.get("wrap", bc == "periodic")

    def hopping(box: Box) -> RecipeMap:
        out = {}
        for x, y, _ in _bonds(box, _axes(spec, box.d), wrap):
            out[SiteSet([x, y])] = hopping_terms(x, y, -spec["t"], r)
        return out

    def dimerized(box: Box) -> RecipeMap:
        out = {}
        for x, y, axis in _bonds(box, _axes(spec, box.d), wrap):
            sign = 1.0 if x[axis] % 2 == 0 else -1.0
            out[SiteSet([x, y])] = hopping_terms(x, y, -sign * spec["delta"], r)
        return out

    def density_density(box: Box) -> RecipeMap:
        out = {}
        for x, y, _ in _bonds(box, _axes(spec, box.d), wrap):
            out[SiteSet([x, y])] = density_density_terms(x, y, spec["u"], r)
        return out

    def on_site(box: Box) -> RecipeMap:
        out = {}
        for x in box.sites:
            value = spec["mu"] + spec.get("staggered", 0.0) * (-1) ** (sum(x) % 2)
            if value != 0:
                out[SiteSet([x])] = density_terms(x, value, r)
        return out

    builders = {
        "hopping": hopping,
        "dimerized-hopping": dimerized,
        "density-density": density_density,
        "on-site": on_site,
    }
    return builders[kind]


def build_family(spec: Dict, r: int, bc: str, pointer: str) -> TermFamily:
    envelope = build_envelope(spec.get("envelope"), pointer + "/envelope")
    if spec.get("scale", "none") == "inverse-k":
        scale = lambda k: 1.0 + 1.0 / k
    else:
        scale = lambda k: 1.0
    return TermFamily(f"{spec['type']}{pointer}", family_builder(spec, r, bc), envelope, scale)


def build_interaction(specs: List[Dict], boxes: List[Box], r: int, bc: str, name: str) -> Optional[Interaction]:
    if not specs:
        return None
    families = [build_family(spec, r, bc, f"/{name}/{i}") for i, spec in enumerate(specs)]
    return Interaction(boxes, families, r, name)


def build_observable(spec: Dict, space: FockSpace, name: str = "observable") -> FockOperator:
    """density n_x, current i(a†_y a_x − a†_x a_y) with y = x + e_axis, or 𝟙."""
    kind = spec["type"]
    if kind == "identity":
        return space.identity()
    x = tuple(spec["site"])
    if not space.contains([x]):
        raise ConfigError(f"observable {name!r}: site {list(x)} is outside the box", f"/observables/{name}/site")
    if kind == "density":
        return number_operator(space, [x])
    y = tuple(c + e for c, e in zip(x, _unit(len(x), spec["axis"])))
    if not space.contains([y]):
        raise ConfigError(f"observable {name!r}: bond leaves the box", f"/observables/{name}/site")
    return car_operator(space, hopping_terms(x, y, -1j, space.r), [x, y])


class Model:
    """All boxes of one configured model."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.name = config.name
        self.r = config.r
        self.boxes = [build_box(k, config.d, config.bc) for k in config.ks]
        self.phi0 = build_interaction(config.h0, self.boxes, config.r, config.bc, "h0")
        self.phi1 = build_interaction(config.h1, self.boxes, config.r, config.bc, "h1")
        self.potential: Optional[LipschitzPotential] = None
        if config.potential is not None:
            p = config.potential
            self.potential = linear_potential(p["slope"], p.get("axis", 0), build_envelope(p.get("envelope"), "/potential/envelope"))
        self.zeta: DecayFunction = build_decay(config.decay)
        self.weight: WeightFunction = build_weight(config.g, config.g_tilde)
        self._systems: Dict[int, "BoxModel"] = {}
        logger.info(f"Built model {self.name} on k={config.ks} (d={config.d}, bc={config.bc})")

    def __repr__(self) -> str:
        return f"Model({self.name}, k={self.config.ks})"

    @property
    def d(self) -> int:
        return self.config.d

    @property
    def ks(self) -> List[int]:
        return list(self.config.ks)

    def at(self, k: int) -> "BoxModel":
        if k not in self.config.ks:
            raise ConfigError(f"model {self.name} has no box Λ_{k}; configured sizes are {self.config.ks}", "/lattice/k")
        if k not in self._systems:
            self._systems[k] = BoxModel(self, k)
        return self._systems[k]

    @property
    def largest(self) -> "BoxModel":
        return self.at(max(self.config.ks))

    @property
    def envelopes(self) -> list:
        out = [family.envelope for family in self.phi0.families]
        if self.phi1 is not None:
            out += [family.envelope for family in self.phi1.families]
        if self.potential is not None:
            out.append(self.potential.envelope)
        return out


class BoxModel:
    """The model on Λ_k, with the interface used by the adiabatic machinery."""

    def __init__(self, model: Model, k: int):
        self.model = model
        self.k = k
        self.box = model.phi0.box(k)
        self.space = FockSpace.for_box(self.box, model.r)
        self.weight = model.weight
        self.zeta = model.zeta
        self._patches: "OrderedDict[float, Tuple[EigenSystem, GappedPatch]]" = OrderedDict()

    def __repr__(self) -> str:
        return f"BoxModel({self.model.name}, k={self.k}, dim={self.space.dim})"

    @property
    def d(self) -> int:
        return self.box.d

    @cached_property
    def static(self) -> bool:
        return all(env.name == "constant" for env in self.model.envelopes)

    def h0_operator(self, t: float, derivative: int = 0) -> FockOperator:
        return self.model.phi0.assemble(self.k, t, derivative, self.space)

    def h0(self, t: float, derivative: int = 0) -> np.ndarray:
        return self.h0_operator(t, derivative).dense()

    def perturbation(self, t: float, derivative: int = 0) -> np.ndarray:
        """V_v + H₁ (the ε-coefficient of H^ε)."""
        out = np.zeros((self.space.dim, self.space.dim), dtype=complex)
        if self.model.potential is not None:
            out += assemble_potential(self.model.potential, self.box, self.model.r, t, derivative, self.space).dense()
        if self.model.phi1 is not None:
            out += self.model.phi1.assemble(self.k, t, derivative, self.space).dense()
        return out

    def hamiltonian(self, eps: float) -> Callable[[float], np.ndarray]:
        return lambda t: self.h0(t) + eps * self.perturbation(t)

    def is_stationary(self, t: float, order: int) -> bool:
        return all(env.is_stationary(t, order) for env in self.model.envelopes)

    def patch(self, t: float) -> Tuple[EigenSystem, GappedPatch]:
        """Eigensystem of H₀(t) and its gapped patch (the last MAX_CACHED_PATCHES times are kept)."""
        t = float(t)
        if t in self._patches:
            self._patches.move_to_end(t)
            return self._patches[t]
        config = self.model.config
        es = diagonalize(self.h0_operator(t))
        patch = find_gapped_patch(es, config.g, config.g_tilde, config.gap_mode, config.window, config.kappa_max)
        self._patches[t] = (es, patch)
        while len(self._patches) > MAX_CACHED_PATCHES:
            self._patches.popitem(last=False)
        return es, patch

    def observable(self, name: str) -> FockOperator:
        specs = self.model.config.observables
        if name not in specs:
            raise ConfigError(f"unknown observable {name!r}; model defines {sorted(specs)}", "/observables")
        return build_observable(specs[name], self.space, name)

    def observables(self, names: Optional[List[str]] = None) -> Dict[str, FockOperator]:
        names = sorted(self.model.config.observables) if names is None else names
        return {name: self.observable(name) for name in names}

