"""
Fermionic conditional expectations on even observables and locality norms.

E_X^Z keeps exactly the Majorana monomials of an even operator that are
supported in X. The working route applies the twirl A ↦ (A + γAγ)/2 for
every Majorana γ of Z∖X; `majorana_expansion` is the literal
Hilbert-Schmidt projection and serves as the oracle on small spaces.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import BoundViolation, ConfigError, ResourceLimit, ShapeMismatch
from .fock import FockOperator, FockSpace, operator_norm, require_even
from .lattice import Box, Site, SiteSet, centred_sites

logger = logging.getLogger(__name__)

CONTRACTION_TOL = 1e-10
ORACLE_MODE_LIMIT = 6
DEFAULT_MONOMIAL_LIMIT = 4096


def _complement_majoranas(space: FockSpace, X: Iterable[Site]) -> List[Tuple[int, int]]:
    X = SiteSet(tuple(x) for x in X)
    if not space.contains(X):
        raise ShapeMismatch(f"region {sorted(X)} is not inside the Fock space")
    rest = [x for x in space.sites if x not in X]
    return [(m, which) for m in space.modes_of(rest) for which in (0, 1)]


def _twirl(matrix: np.ndarray, perm: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """(A + γAγ)/2 for γ|b⟩ = s(b)|π(b)⟩, π an involution."""
    conj = signs[perm][:, None] * matrix[np.ix_(perm, perm)] * signs[None, :]
    return 0.5 * (matrix + conj)


def conditional_expectation(A: FockOperator, X: Iterable[Site], space: FockSpace) -> FockOperator:
    """E_X^Z(A) for an even A on the Fock space of Z."""
    require_even(A, "conditional expectation input")
    X = SiteSet(tuple(x) for x in X)
    matrix = A.dense()
    for m, which in _complement_majoranas(space, X):
        perm, signs = space.majorana_action(m, which)
        matrix = _twirl(matrix, perm, signs)
    return FockOperator(matrix, A.support & X, "even", A.hermitian)


def _monomial_action(space: FockSpace, indices: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """γ_{i1} γ_{i2} ... as a signed permutation."""
    perm = np.arange(space.dim, dtype=np.int64)
    signs = np.ones(space.dim, dtype=complex)
    for index in reversed(indices):
        p, s = space.majorana_action(index // 2, index % 2)
        signs = signs * s[perm]
        perm = p[perm]
    return perm, signs


def _monomial_matrix(space: FockSpace, indices: Sequence[int]) -> np.ndarray:
    perm, signs = _monomial_action(space, indices)
    out = np.zeros((space.dim, space.dim), dtype=complex)
    out[perm, np.arange(space.dim)] = signs
    return out


def majorana_expansion(A: FockOperator, space: FockSpace) -> Dict[Tuple[int, ...], complex]:
    """Coefficients c_S = tr(γ_S† A)/dim over all Majorana monomials."""
    if space.n_modes > ORACLE_MODE_LIMIT:
        raise ResourceLimit(f"Majorana expansion is limited to {ORACLE_MODE_LIMIT} modes")
    matrix = A.dense()
    cols = np.arange(space.dim)
    coefficients = {}
    for size in range(2 * space.n_modes + 1):
        for indices in itertools.combinations(range(2 * space.n_modes), size):
            perm, signs = _monomial_action(space, indices)
            c = np.sum(np.conj(signs) * matrix[perm, cols]) / space.dim
            if abs(c) > 1e-15:
                coefficients[indices] = complex(c)
    return coefficients


def conditional_expectation_oracle(A: FockOperator, X: Iterable[Site], space: FockSpace) -> FockOperator:
    """E_X by expanding in Majorana monomials and keeping those inside X."""
    require_even(A, "conditional expectation input")
    X = SiteSet(tuple(x) for x in X)
    allowed = {2 * m + w for m in space.modes_of([x for x in space.sites if x in X]) for w in (0, 1)}
    out = np.zeros((space.dim, space.dim), dtype=complex)
    for indices, c in majorana_expansion(A, space).items():
        if set(indices) <= allowed:
            out += c * _monomial_matrix(space, indices)
    return FockOperator(out, A.support & X, "even", A.hermitian)


def partial_trace_expectation(A: FockOperator, n_keep: int, space: FockSpace) -> FockOperator:
    """tr_R(A)/dim(R) ⊗ 𝟙 for X = the first n_keep modes.

    Agrees with E_X on even A only when X is an initial segment of the mode
    order, where the Jordan-Wigner strings of X stay inside X.
    """
    d_keep = 2 ** n_keep
    d_rest = space.dim // d_keep
    matrix = A.dense().reshape(d_keep, d_rest, d_keep, d_rest)
    reduced = np.trace(matrix, axis1=1, axis2=3) / d_rest
    return FockOperator(np.kron(reduced, np.eye(d_rest)), A.support, "even", A.hermitian)


@dataclass
class FNorm:
    value: float
    norm: float
    argmax_k: Optional[int]
    terms: Dict[int, float] = field(default_factory=dict)


def f_norm(A: FockOperator, f: Callable[[int], float], space: FockSpace, box: Box, k_range: Optional[Iterable[int]] = None) -> FNorm:
    """‖A‖_f = ‖A‖ + sup_k ‖A − E_{Λk}(A)‖ / f(k) over the k range."""
    require_even(A, "f-norm input")
    ks = list(range(1, box.k + 1) if k_range is None else k_range)
    dense = A.dense()
    norm = operator_norm(dense, hermitian=A.hermitian)
    terms = {}
    for k in ks:
        region = centred_sites(k, box.d)
        diff = dense - conditional_expectation(A, region, space).matrix
        terms[k] = operator_norm(diff, hermitian=A.hermitian) / f(k)
    argmax = max(terms, key=terms.get) if terms and max(terms.values()) > 0 else None
    sup = max(terms.values(), default=0.0)
    return FNorm(norm + sup, norm, argmax, terms)


def quasilocality_certificate(A: FockOperator, X: Iterable[Site], space: FockSpace, max_monomials: int = DEFAULT_MONOMIAL_LIMIT) -> float:
    """η = max_S ‖[A, γ_S]‖/‖A‖ over Majorana monomials γ_S of Z∖X.

    E_X^Z(A) is the average of γ_S A γ_S† over these monomials, so
    ‖A − E_X^Z(A)‖ ≤ η‖A‖; the inequality is checked before returning.
    """
    require_even(A, "certificate input")
    majoranas = [2 * m + which for m, which in _complement_majoranas(space, X)]
    count = 2 ** len(majoranas) - 1
    if count > max_monomials:
        raise ResourceLimit(f"{count} monomials exceed the certificate limit {max_monomials}")
    matrix = A.dense()
    norm = operator_norm(matrix, hermitian=A.hermitian)
    if norm == 0.0:
        raise ConfigError("quasi-locality certificate needs a non-zero operator")
    eta = 0.0
    for size in range(1, len(majoranas) + 1):
        for indices in itertools.combinations(majoranas, size):
            perm, signs = _monomial_action(space, indices)
            right = matrix[:, perm] * signs[None, :]
            left = signs[perm][:, None] * matrix[perm, :]
            comm = right - left
            eta = max(eta, float(np.linalg.norm(comm, 2)) / norm)
    residual = operator_norm(matrix - conditional_expectation(A, X, space).matrix, hermitian=A.hermitian)
    if residual > eta * norm + CONTRACTION_TOL:
        raise BoundViolation(f"‖A − E_X(A)‖ = {residual:.3e} exceeds η‖A‖ = {eta * norm:.3e}")
    return eta


def extension_constant(f: Callable[[int], float], b: float, d: int, j_max: int) -> float:
    """C_{b,f} = |Λ_1|^b + 2 Σ_{j=1}^{j_max} f(j) |Λ_{j+1}|^b."""
    size = lambda j: float((2 * j + 1) ** d)
    return size(1) ** b + 2.0 * sum(f(j) * size(j + 1) ** b for j in range(1, j_max + 1))


def extension_bound(
    functional: Callable[[np.ndarray], complex],
    A: FockOperator,
    f: Callable[[int], float],
    b: float,
    C: float,
    space: FockSpace,
    box: Box,
) -> Dict[str, float]:
    """Telescope A over Λ_1 ⊆ Λ_2 ⊆ ... and compare with C·C_{b,f}·‖A‖_f.

    `functional` is ω∘T acting on matrices; it must satisfy
    |ω(T(B))| ≤ C‖B‖|Y|^b for B strictly local in Y.
    """
    lhs = abs(functional(A.dense()))
    layers = [conditional_expectation(A, centred_sites(j, box.d), space).dense() for j in range(1, box.k + 1)]
    telescoped = abs(functional(layers[0]))
    for inner, outer in zip(layers, layers[1:]):
        telescoped += abs(functional(outer - inner))
    constant = extension_constant(f, b, box.d, box.k - 1)
    fnorm = f_norm(A, f, space, box).value
    bound = C * constant * fnorm
    return {"lhs": lhs, "telescoped": telescoped, "c_bf": constant, "f_norm": fnorm, "bound": bound, "holds": bool(lhs <= bound + 1e-10)}
