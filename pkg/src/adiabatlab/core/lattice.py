"""
Finite boxes of Z^d, their metrics and set geometry.

Sites are integer tuples. A box Λ_k = {-k..k}^d carries either the open
(ℓ¹) metric or the graph metric of the torus obtained by making opposite
faces adjacent; both agree with the ℓ¹ distance up to distance k.
"""

import itertools
import logging
from functools import cached_property
from typing import Callable, Iterable, Optional, Tuple

import numpy as np

from ..errors import ConfigError, ResourceLimit
from ..settings import get_settings

logger = logging.getLogger(__name__)

Site = Tuple[int, ...]

BOUNDARY_CONDITIONS = ("open", "periodic")


class SiteSet(frozenset):
    """Finite subset of Z^d."""

    @classmethod
    def of(cls, points: Iterable[Iterable[int]]) -> "SiteSet":
        return cls(tuple(int(c) for c in p) for p in points)

    @property
    def diameter(self) -> int:
        return diameter(self)

    def sorted(self) -> Tuple[Site, ...]:
        return tuple(sorted(self))


def l1_distance(x: Site, y: Site) -> int:
    return sum(abs(a - b) for a, b in zip(x, y))


def diameter(points: Iterable[Site], metric: Optional[Callable[[Site, Site], float]] = None) -> float:
    """Largest pairwise distance; 0 for empty sets and singletons."""
    metric = metric or l1_distance
    pts = list(points)
    best = 0
    for a, b in itertools.combinations(pts, 2):
        best = max(best, metric(a, b))
    return best


def centred_sites(k: int, d: int) -> SiteSet:
    """The point set {-k..k}^d."""
    return SiteSet(itertools.product(range(-k, k + 1), repeat=d))


def _ball_offsets(delta: int, d: int):
    for offset in itertools.product(range(-delta, delta + 1), repeat=d):
        if sum(abs(c) for c in offset) <= delta:
            yield offset


def fatten(points: Iterable[Site], delta: int) -> SiteSet:
    """All z in Z^d with ℓ¹-distance at most delta from the set."""
    if delta < 0:
        raise ValueError(f"fattening radius must be >= 0, got {delta}")
    pts = [tuple(p) for p in points]
    if not pts:
        return SiteSet()
    if delta == 0:
        return SiteSet(pts)
    offsets = list(_ball_offsets(delta, len(pts[0])))
    return SiteSet(
        tuple(a + b for a, b in zip(p, off)) for p in pts for off in offsets
    )


class Box:
    """The centred box Λ_k with a boundary-condition dependent metric.

    Boxes are value objects: equality and hashing go through (k, d, bc), and
    the metric table is computed once at construction.
    """

    def __init__(self, k: int, d: int = 1, bc: str = "open"):
        self.k = k
        self.d = d
        self.bc = bc
        self.sites: Tuple[Site, ...] = tuple(itertools.product(range(-k, k + 1), repeat=d))
        self._index = {site: i for i, site in enumerate(self.sites)}
        coords = np.array(self.sites, dtype=np.int64).reshape(len(self.sites), d)
        diff = np.abs(coords[:, None, :] - coords[None, :, :])
        if bc == "periodic":
            diff = np.minimum(diff, 2 * k + 1 - diff)
        self.metric = diff.sum(axis=2)
        self.metric.setflags(write=False)

    def __repr__(self) -> str:
        return f"Box(k={self.k}, d={self.d}, bc={self.bc!r})"

    def _key(self):
        return (self.k, self.d, self.bc)

    def __eq__(self, other) -> bool:
        return isinstance(other, Box) and self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __len__(self) -> int:
        return len(self.sites)

    def __contains__(self, site) -> bool:
        return tuple(site) in self._index

    @cached_property
    def site_set(self) -> SiteSet:
        return SiteSet(self.sites)

    def index(self, site: Site) -> int:
        try:
            return self._index[tuple(site)]
        except KeyError:
            raise ValueError(f"site {site} is not in {self}") from None

    def distance(self, x: Site, y: Site) -> int:
        return int(self.metric[self.index(x), self.index(y)])

    def diameter(self, points: Iterable[Site]) -> int:
        """Diameter measured with the box metric."""
        idx = [self.index(p) for p in points]
        if len(idx) < 2:
            return 0
        return int(self.metric[np.ix_(idx, idx)].max())

    def contains_all(self, points: Iterable[Site]) -> bool:
        return all(tuple(p) in self._index for p in points)

    def subbox(self, m: int) -> SiteSet:
        """Λ_m as a subset of this box."""
        if m > self.k:
            raise ValueError(f"Λ_{m} is not contained in Λ_{self.k}")
        return centred_sites(m, self.d)

    def fatten(self, points: Iterable[Site], delta: int) -> SiteSet:
        """Y_δ ∩ Λ_k."""
        return SiteSet(p for p in fatten(points, delta) if p in self._index)

    def distance_sum(self, xs: Iterable[Site], ys: Iterable[Site], weight: Callable[[np.ndarray], np.ndarray]) -> float:
        """Σ_{x∈X, y∈Y} weight(d(x, y)) with the box metric."""
        ix = [self.index(x) for x in xs]
        iy = [self.index(y) for y in ys]
        if not ix or not iy:
            return 0.0
        return float(np.sum(weight(self.metric[np.ix_(ix, iy)].astype(float))))


def build_box(k: int, d: int = 1, bc: str = "open", site_budget: Optional[int] = None) -> Box:
    """Build Λ_k after checking the arguments and the site budget."""
    if k < 1 or d < 1:
        raise ConfigError(f"box needs k >= 1 and d >= 1, got k={k}, d={d}")
    if bc not in BOUNDARY_CONDITIONS:
        raise ConfigError(f"unknown boundary condition {bc!r}; use one of {BOUNDARY_CONDITIONS}")
    budget = site_budget if site_budget is not None else get_settings().site_budget
    n_sites = (2 * k + 1) ** d
    if n_sites > budget:
        raise ResourceLimit(f"Λ_{k} in d={d} has {n_sites} sites, above the site budget {budget}")
    box = Box(k, d, bc)
    logger.debug(f"Built {box} with {n_sites} sites")
    return box
