"""
Interactions, decay functions, Lipschitz potentials and their norms.

An `Interaction` is built from term families. A family maps a box to
CAR-polynomial recipes per support set X and carries one scalar time
envelope, so every time derivative of a term is exact. Recipes are realised
on whatever Fock space is needed: the box space for assembly, the local
space of X for norms and for comparisons between boxes.

`OperatorFamily` holds terms that only exist as matrices on one box
(commutator interactions, interactions of I_H(B)).
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from ..errors import ConfigError, ShapeMismatch, TermValidationError
from .envelopes import Envelope, constant
from .fock import (
    CarTerm,
    FockOperator,
    FockSpace,
    car_operator,
    classify_parity,
    is_hermitian_matrix,
    is_number_conserving,
    operator_norm,
)
from .lattice import Box, Site, SiteSet, centred_sites

logger = logging.getLogger(__name__)

DECAY_GRID = np.arange(0, 201, dtype=float)


class DecayFunction:
    """A decay function ζ with the class flags it claims."""

    def __init__(self, name: str, evaluator: Callable[[np.ndarray], np.ndarray], claims: Iterable[str], params: Optional[Dict] = None):
        self.name = name
        self.evaluator = evaluator
        self.claims = frozenset(claims)
        self.params = dict(params or {})

    def __repr__(self) -> str:
        return f"DecayFunction({self.name}, {self.params})"

    def __call__(self, r):
        return self.evaluator(np.asarray(r, dtype=float))

    def f(self, r, d: int):
        return f_zeta(self, r, d)

    def check_claims(self, grid: Optional[np.ndarray] = None, n_max: int = 8) -> Dict[str, bool]:
        """Check every claimed flag on a sampled grid."""
        grid = DECAY_GRID if grid is None else np.asarray(grid, dtype=float)
        values = self(grid)
        results = {}
        if "bounded" in self.claims:
            results["bounded"] = bool(np.all(np.isfinite(values)) and np.all(values > 0))
        if "non-increasing" in self.claims:
            results["non-increasing"] = bool(np.all(np.diff(values) <= 1e-15))
        if "log-superadditive" in self.claims:
            r, s = np.meshgrid(grid[:50], grid[:50])
            lhs = self(r + s)
            rhs = self(r) * self(s)
            results["log-superadditive"] = bool(np.all(lhs >= rhs * (1 - 1e-12)))
        if "class-S" in self.claims:
            # sub-exponential moments peak far out; extend the grid geometrically
            far = np.max(grid) * 2.0 ** np.arange(1, 11)
            tail = np.concatenate([grid, far])
            tail_values = self(tail)
            ok = True
            for n in range(n_max + 1):
                moment = tail ** n * tail_values
                if not (np.all(np.isfinite(moment)) and moment[-1] < np.max(moment)):
                    ok = False
            results["class-S"] = ok
        return results


def constant_decay() -> DecayFunction:
    return DecayFunction(
        "constant",
        lambda r: np.ones_like(r),
        ["bounded", "non-increasing", "log-superadditive"],
    )


def exponential_decay(a: float = 1.0) -> DecayFunction:
    if a <= 0:
        raise ConfigError(f"exponential decay rate must be positive, got {a}")
    return DecayFunction(
        "exponential",
        lambda r: np.exp(-a * r),
        ["bounded", "non-increasing", "log-superadditive", "class-S"],
        {"a": a},
    )


def subexponential_decay(a: float = 1.0, beta: float = 0.5) -> DecayFunction:
    """exp(−a r^β), 0 < β < 1."""
    if a <= 0 or not 0 < beta < 1:
        raise ConfigError(f"sub-exponential decay needs a > 0 and 0 < beta < 1, got a={a}, beta={beta}")
    return DecayFunction(
        "subexponential",
        lambda r: np.exp(-a * r ** beta),
        ["bounded", "non-increasing", "log-superadditive", "class-S"],
        {"a": a, "beta": beta},
    )


def build_decay(spec: Optional[Dict], pointer: str = "/decay") -> DecayFunction:
    if spec is None:
        return constant_decay()
    name = spec.get("name")
    params = {key: value for key, value in spec.items() if key != "name"}
    builders = {
        "constant": constant_decay,
        "exponential": exponential_decay,
        "subexponential": subexponential_decay,
    }
    if name not in builders:
        raise ConfigError(f"unknown decay function {name!r}; use one of {sorted(builders)}", pointer + "/name")
    try:
        return builders[name](**params)
    except TypeError as e:
        raise ConfigError(f"bad decay parameters: {e}", pointer) from None


def f_zeta(zeta: DecayFunction, r, d: int):
    """F_ζ(r) = ζ(r)/(1+r)^(d+1)."""
    r = np.asarray(r, dtype=float)
    out = zeta(r) / (1.0 + r) ** (d + 1)
    return float(out) if out.ndim == 0 else out


RecipeMap = Dict[SiteSet, List[CarTerm]]


@dataclass
class TermFamily:
    """Recipes per support set for each box, times one envelope."""

    name: str
    builder: Callable[[Box], RecipeMap]
    envelope: Envelope = field(default_factory=constant)
    scale: Callable[[int], float] = lambda k: 1.0

    def recipes(self, box: Box) -> RecipeMap:
        factor = self.scale(box.k)
        out = {}
        for X, terms in self.builder(box).items():
            out[SiteSet(X)] = [(factor * c, ladders) for c, ladders in terms]
        return out


def _space_key(space: FockSpace):
    return (space.sites, space.r)


class Interaction:
    """Interaction Φ = (Φ^{Λk}) on a finite set of boxes."""

    def __init__(self, boxes: Sequence[Box], families: Sequence[TermFamily], r: int = 1, name: str = "interaction", validate: bool = True):
        if not boxes:
            raise ConfigError("an interaction needs at least one box")
        self.boxes: Tuple[Box, ...] = tuple(boxes)
        self.families: Tuple[TermFamily, ...] = tuple(families)
        self.r = r
        self.name = name
        self._by_k = {box.k: box for box in self.boxes}
        self._recipes: Dict[Tuple[int, int], RecipeMap] = {}
        self._local: Dict[Tuple[int, int, SiteSet], np.ndarray] = {}
        self._realized: Dict[tuple, FockOperator] = {}
        if validate:
            for box in self.boxes:
                self.validate(box.k)

    def __repr__(self) -> str:
        return f"Interaction({self.name}, families={[f.name for f in self.families]}, k={sorted(self._by_k)})"

    @property
    def k_values(self) -> List[int]:
        return sorted(self._by_k)

    def box(self, k: int) -> Box:
        if k not in self._by_k:
            raise ShapeMismatch(f"{self.name} is not defined on Λ_{k}; boxes are {self.k_values}")
        return self._by_k[k]

    def family_recipes(self, k: int, index: int) -> RecipeMap:
        key = (k, index)
        if key not in self._recipes:
            box = self.box(k)
            recipes = self.families[index].recipes(box)
            for X in recipes:
                if not box.contains_all(X):
                    raise TermValidationError(f"{self.families[index].name}: term support {sorted(X)} leaves Λ_{k}")
            self._recipes[key] = recipes
        return self._recipes[key]

    def supports(self, k: int) -> List[SiteSet]:
        found = set()
        for index in range(len(self.families)):
            found.update(self.family_recipes(k, index))
        return sorted(found, key=lambda X: (len(X), sorted(X)))

    def weights(self, t: float, derivative: int = 0) -> List[float]:
        return [family.envelope(t, derivative) for family in self.families]

    def is_stationary(self, t: float, order: int) -> bool:
        return all(family.envelope.is_stationary(t, order) for family in self.families)

    def _local_matrix(self, k: int, index: int, X: SiteSet) -> np.ndarray:
        key = (k, index, X)
        if key not in self._local:
            space = FockSpace.local(X, self.r)
            recipes = self.family_recipes(k, index).get(X, [])
            self._local[key] = car_operator(space, recipes, X).dense()
        return self._local[key]

    def local_term(self, k: int, X: SiteSet, t: float = 0.0, derivative: int = 0) -> np.ndarray:
        """Φ^{Λk}(X) (or its time derivative) on the Fock space of X alone."""
        X = SiteSet(X)
        dim = 2 ** (self.r * len(X))
        out = np.zeros((dim, dim), dtype=complex)
        for index, weight in enumerate(self.weights(t, derivative)):
            if weight != 0 and X in self.family_recipes(k, index):
                out += weight * self._local_matrix(k, index, X)
        return out

    def term_norms(self, k: int, t: float = 0.0, derivative: int = 0) -> Dict[SiteSet, float]:
        norms = {}
        for X in self.supports(k):
            matrix = self.local_term(k, X, t, derivative)
            norms[X] = operator_norm(matrix, hermitian=True)
        return norms

    def validate(self, k: int):
        """Each term is Hermitian, even and number conserving."""
        for X in self.supports(k):
            for index in range(len(self.families)):
                if X not in self.family_recipes(k, index):
                    continue
                matrix = self._local_matrix(k, index, X)
                op = FockOperator.from_matrix(matrix, X)
                problem = None
                if not is_hermitian_matrix(matrix):
                    problem = "not Hermitian"
                elif classify_parity(matrix) != "even":
                    problem = "not even"
                elif not is_number_conserving(op):
                    problem = "not number conserving"
                if problem:
                    raise TermValidationError(f"{self.families[index].name}: term on {sorted(X)} in Λ_{k} is {problem}")

    def _family_operator(self, k: int, index: int, space: FockSpace) -> FockOperator:
        key = (k, index, _space_key(space))
        if key not in self._realized:
            recipes = self.family_recipes(k, index)
            all_terms = [term for terms in recipes.values() for term in terms]
            support = set().union(*recipes) if recipes else set()
            self._realized[key] = car_operator(space, all_terms, support)
        return self._realized[key]

    def terms(self, k: int, t: float = 0.0, derivative: int = 0, space: Optional[FockSpace] = None) -> Dict[SiteSet, FockOperator]:
        """Terms Φ^{Λk}(X) realised on `space` (default: the Fock space of Λ_k)."""
        space = space or FockSpace.for_box(self.box(k), self.r)
        weights = self.weights(t, derivative)
        out = {}
        for X in self.supports(k):
            recipes = []
            for index, weight in enumerate(weights):
                for c, ladders in self.family_recipes(k, index).get(X, []):
                    recipes.append((weight * c, ladders))
            out[X] = car_operator(space, recipes, X)
        return out

    def assemble(self, k: int, t: float = 0.0, derivative: int = 0, space: Optional[FockSpace] = None) -> FockOperator:
        space = space or FockSpace.for_box(self.box(k), self.r)
        total = space.zero()
        for index, weight in enumerate(self.weights(t, derivative)):
            if weight != 0:
                total = total + weight * self._family_operator(k, index, space)
        return FockOperator(total.matrix, total.support, "even", True)

    def __add__(self, other: "Interaction") -> "Interaction":
        if set(self.boxes) != set(other.boxes) or self.r != other.r:
            raise ShapeMismatch(f"cannot add {self} and {other}: different boxes or r")
        return Interaction(self.boxes, self.families + other.families, self.r, f"{self.name}+{other.name}", validate=False)


class OperatorFamily:
    """Terms materialised as operators on the Fock space of a single box."""

    def __init__(self, box: Box, space: FockSpace, terms: Dict[SiteSet, FockOperator], name: str = "operator-family"):
        self.box_ = box
        self.boxes = (box,)
        self.space = space
        self.r = space.r
        self.name = name
        self._terms = {SiteSet(X): op for X, op in terms.items()}
        self._norms: Optional[Dict[SiteSet, float]] = None

    def __repr__(self) -> str:
        return f"OperatorFamily({self.name}, k={self.box_.k}, terms={len(self._terms)})"

    @property
    def k_values(self) -> List[int]:
        return [self.box_.k]

    def box(self, k: int) -> Box:
        if k != self.box_.k:
            raise ShapeMismatch(f"{self.name} lives on Λ_{self.box_.k}, not Λ_{k}")
        return self.box_

    def supports(self, k: int) -> List[SiteSet]:
        self.box(k)
        return sorted(self._terms, key=lambda X: (len(X), sorted(X)))

    def _static(self, derivative: int):
        if derivative != 0:
            raise ValueError(f"{self.name} is a snapshot at one time; derivatives are not available")

    def terms(self, k: int, t: float = 0.0, derivative: int = 0, space: Optional[FockSpace] = None) -> Dict[SiteSet, FockOperator]:
        self.box(k)
        self._static(derivative)
        if space is not None and _space_key(space) != _space_key(self.space):
            raise ShapeMismatch(f"{self.name} terms exist only on the space of Λ_{k}")
        return dict(self._terms)

    def term_norms(self, k: int, t: float = 0.0, derivative: int = 0) -> Dict[SiteSet, float]:
        self.box(k)
        self._static(derivative)
        if self._norms is None:
            self._norms = {X: op.norm() for X, op in self._terms.items()}
        return dict(self._norms)

    def assemble(self, k: int, t: float = 0.0, derivative: int = 0, space: Optional[FockSpace] = None) -> FockOperator:
        total = self.space.zero()
        for op in self.terms(k, t, derivative, space).values():
            total = total + op
        return total

    def validate(self, k: int):
        for X, op in self.terms(k).items():
            if op.parity != "even" or not is_number_conserving(op):
                raise TermValidationError(f"{self.name}: term on {sorted(X)} is not even and number conserving")


def _resolve_k_range(phi, k_range: Optional[Iterable[int]]) -> List[int]:
    ks = list(phi.k_values if k_range is None else k_range)
    if not ks:
        raise ConfigError("k_range is empty")
    return ks


def _pair_norm(points: Sequence[Site], dist: np.ndarray, norms: Dict[SiteSet, float], zeta: DecayFunction, n: int, d: int) -> float:
    """sup_{x,y} Σ_{X∋x,y} diam(X)^n ‖Φ(X)‖ / F(d(x,y)); pairs without terms add 0."""
    index = {p: i for i, p in enumerate(points)}
    sums = np.zeros(dist.shape)
    for X, weight in norms.items():
        if weight == 0.0:
            continue
        idx = [index[x] for x in X]
        diam = dist[np.ix_(idx, idx)].max() if len(idx) > 1 else 0
        sums[np.ix_(idx, idx)] += float(diam) ** n * weight
    return float(np.max(sums / f_zeta(zeta, dist, d))) if sums.size else 0.0


def _l1_table(points: Sequence[Site]) -> np.ndarray:
    coords = np.array(points, dtype=np.int64)
    return np.abs(coords[:, None, :] - coords[None, :, :]).sum(axis=2)


def interaction_norm(phi, zeta: DecayFunction, n: int, k_range: Optional[Iterable[int]] = None, t: float = 0.0, derivative: int = 0) -> float:
    """‖Φ‖_{ζ,n}: sup over boxes of the pair sums with the box metric."""
    best = 0.0
    for k in _resolve_k_range(phi, k_range):
        box = phi.box(k)
        norms = phi.term_norms(k, t, derivative)
        best = max(best, _pair_norm(box.sites, box.metric, norms, zeta, n, box.d))
    return best


def bulk_norm(phi, zeta: DecayFunction, n: int, k_range: Optional[Iterable[int]] = None, t: float = 0.0, derivative: int = 0) -> float:
    """‖Φ‖°_{ζ,n}: as interaction_norm with ℓ¹ distances and diameters."""
    best = 0.0
    for k in _resolve_k_range(phi, k_range):
        box = phi.box(k)
        norms = phi.term_norms(k, t, derivative)
        best = max(best, _pair_norm(box.sites, _l1_table(box.sites), norms, zeta, n, box.d))
    return best


def _restricted(norms: Dict[SiteSet, float], d: int, M: int, zeta: DecayFunction, n: int) -> float:
    region = centred_sites(M, d)
    points = sorted(region)
    inside = {X: w for X, w in norms.items() if X <= region}
    return _pair_norm(points, _l1_table(points), inside, zeta, n, d)


def restricted_norm(phi, k: int, zeta: DecayFunction, n: int, M: int, t: float = 0.0, derivative: int = 0) -> float:
    """‖Φ^{Λk}‖_{ζ,n,Λ_M}: only X ⊆ Λ_M, ℓ¹ metric."""
    box = phi.box(k)
    if M > k:
        raise ShapeMismatch(f"Λ_{M} is not inside Λ_{k}")
    return _restricted(phi.term_norms(k, t, derivative), box.d, M, zeta, n)


def time_norm(phi, zeta: DecayFunction, n: int, grid: Iterable[float], derivative: int = 0, k_range: Optional[Iterable[int]] = None) -> float:
    """sup over the time grid of ‖Φ^{(derivative)}(t)‖_{ζ,n}."""
    return max(interaction_norm(phi, zeta, n, k_range, t, derivative) for t in grid)


def assemble(phi, k: int, t: float = 0.0, derivative: int = 0, space: Optional[FockSpace] = None) -> FockOperator:
    return phi.assemble(k, t, derivative, space)


def commutator_interaction(phi_a, phi_b, k: int, t: float = 0.0) -> OperatorFamily:
    """Φ_{[A,B]}(Z) = Σ_{X∪Y=Z, X∩Y≠∅} [Φ_A(X), Φ_B(Y)] on Λ_k at time t."""
    box = phi_a.box(k)
    if phi_b.box(k) != box or phi_a.r != phi_b.r:
        raise ShapeMismatch(f"{phi_a} and {phi_b} live on different boxes")
    space = phi_a.space if isinstance(phi_a, OperatorFamily) else FockSpace.for_box(box, phi_a.r)
    terms_a = phi_a.terms(k, t, space=space)
    terms_b = phi_b.terms(k, t, space=space)
    out: Dict[SiteSet, FockOperator] = {}
    for (X, A), (Y, B) in itertools.product(terms_a.items(), terms_b.items()):
        if not X & Y:
            continue
        c = A.commutator(B)
        Z = SiteSet(X | Y)
        out[Z] = out[Z] + c if Z in out else c
    out = {Z: FockOperator(op.matrix, Z, "even", False) for Z, op in out.items()}
    return OperatorFamily(box, space, out, f"[{phi_a.name},{phi_b.name}]")


def cauchy_deficit(phi: Interaction, k: int, l: int, M: int, zeta: DecayFunction, n: int, derivative: int = 0, grid: Iterable[float] = (0.0,)) -> float:
    """sup_t ‖(d/dt)^i (Φ^{Λl} − Φ^{Λk})(t)‖_{ζ,n,Λ_M}."""
    if not M <= k <= l:
        raise ShapeMismatch(f"need M <= k <= l, got M={M}, k={k}, l={l}")
    if not isinstance(phi, Interaction):
        raise ShapeMismatch("cauchy_deficit needs an interaction defined on several boxes")
    d = phi.box(k).d
    region = centred_sites(M, d)
    supports = {X for X in phi.supports(k) + phi.supports(l) if X <= region}
    best = 0.0
    for t in grid:
        norms = {}
        for X in supports:
            diff = phi.local_term(l, X, t, derivative) - phi.local_term(k, X, t, derivative)
            norms[X] = operator_norm(diff, hermitian=True)
        best = max(best, _restricted(norms, d, M, zeta, n))
    return best


def lr_constant(zeta: DecayFunction, box: Box) -> float:
    """C_ζ = sup_{x,y} Σ_z F(d(x,z)) F(d(z,y)) / F(d(x,y)) on the box."""
    F = f_zeta(zeta, box.metric, box.d)
    return float(np.max((F @ F) / F))


def f_gamma_norm(zeta: DecayFunction, box: Box) -> float:
    """‖F_ζ‖ = sup_y Σ_x F(d(x,y)) on the box."""
    F = f_zeta(zeta, box.metric, box.d)
    return float(np.max(F.sum(axis=0)))


class LipschitzPotential:
    """On-site potential v^{Λk} with a time envelope."""

    def __init__(self, site_map: Callable[[Box, Site], float], envelope: Optional[Envelope] = None, name: str = "potential"):
        self.site_map = site_map
        self.envelope = envelope or constant()
        self.name = name

    def __repr__(self) -> str:
        return f"LipschitzPotential({self.name})"

    def values(self, box: Box) -> np.ndarray:
        return np.array([self.site_map(box, x) for x in box.sites], dtype=float)

    def value(self, box: Box, x: Site, t: float = 0.0, derivative: int = 0) -> float:
        return self.envelope(t, derivative) * self.site_map(box, tuple(x))

    def as_interaction(self, boxes: Sequence[Box], r: int = 1) -> Interaction:
        """The on-site interaction Φ({x}) = v(x) n_x."""

        def builder(box: Box) -> RecipeMap:
            out = {}
            for x in box.sites:
                v = self.site_map(box, x)
                if v != 0:
                    out[SiteSet([x])] = [(v, ((x, i, True), (x, i, False))) for i in range(1, r + 1)]
            return out

        family = TermFamily(self.name, builder, self.envelope)
        return Interaction(boxes, [family], r, self.name, validate=False)


def linear_potential(slope: float = 1.0, axis: int = 0, envelope: Optional[Envelope] = None) -> LipschitzPotential:
    """v(x) = slope · x_axis, the same on every box."""
    return LipschitzPotential(lambda box, x: slope * x[axis], envelope, f"linear({slope})")


def assemble_potential(v: LipschitzPotential, box: Box, r: int = 1, t: float = 0.0, derivative: int = 0, space: Optional[FockSpace] = None) -> FockOperator:
    """V = Σ_x v(x) Σ_i a†_{x,i} a_{x,i}."""
    space = space or FockSpace.for_box(box, r)
    weight = v.envelope(t, derivative)
    occ = space.occupations
    diag = np.zeros(space.dim)
    for x, value in zip(box.sites, v.values(box)):
        if value != 0:
            modes = space.modes_of([x])
            diag += value * occ[:, modes].sum(axis=1)
    matrix = sparse.diags(weight * diag.astype(complex), format="csr")
    if space.dense:
        matrix = matrix.toarray()
    return FockOperator(matrix, box.site_set, "even", True)


def lipschitz_constant(v: LipschitzPotential, boxes: Iterable[Box]) -> float:
    """sup over boxes and distinct pairs of |v(x) − v(y)| / d^{Λk}(x, y)."""
    best = 0.0
    for box in boxes:
        values = v.values(box)
        diff = np.abs(values[:, None] - values[None, :])
        mask = box.metric > 0
        if mask.any():
            best = max(best, float(np.max(diff[mask] / box.metric[mask])))
    return best


def potential_limit_box(v: LipschitzPotential, boxes: Iterable[Box], M: int) -> Optional[int]:
    """Smallest k from which v^{Λk} restricted to Λ_M no longer depends on k."""
    boxes = sorted((b for b in boxes if b.k >= M), key=lambda b: b.k)
    if not boxes:
        return None
    restricted = []
    for box in boxes:
        region = sorted(box.subbox(M))
        restricted.append(np.array([v.site_map(box, x) for x in region]))
    found = None
    for i in range(len(boxes) - 1, -1, -1):
        if all(np.array_equal(restricted[i], later) for later in restricted[i + 1:]):
            found = boxes[i].k
        else:
            break
    return found

