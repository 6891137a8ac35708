"""
Fermionic Fock space over a finite set of sites.

Modes are ordered (site, internal index) lexicographically, sites in the
order given by the box. Mode m is the (m+1)-th tensor factor of the
Jordan-Wigner representation, i.e. bit (n_modes - 1 - m) of a basis index,
and a_m carries the sign string (-1)^(number of occupied modes before m).

Every operator is built on one space; its support is metadata only.
Physical terms that have to be compared across boxes are kept as CAR
polynomials (`CarTerm`) and realised on each space separately.
"""

import json
import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from ..errors import ParityError, ResourceLimit, ShapeMismatch
from ..settings import get_settings
from .lattice import Box, Site, SiteSet

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
PARITY_TOL = 1e-12

# (site, internal index 1..r, dagger)
Ladder = Tuple[Site, int, bool]
# coefficient times an ordered product of ladder operators
CarTerm = Tuple[complex, Tuple[Ladder, ...]]

Matrix = Union[np.ndarray, sparse.spmatrix]


@lru_cache(maxsize=32)
def _occupations(n_modes: int) -> np.ndarray:
    """occ[state, m] = occupation of mode m in basis state `state`."""
    states = np.arange(2 ** n_modes, dtype=np.int64)
    shifts = n_modes - 1 - np.arange(n_modes)
    return ((states[:, None] >> shifts[None, :]) & 1).astype(np.int8)


@lru_cache(maxsize=32)
def parity_diagonal(dim: int) -> np.ndarray:
    """Diagonal of (-1)^N for a Fock space of dimension dim."""
    n_modes = int(dim).bit_length() - 1
    if 2 ** n_modes != dim:
        raise ShapeMismatch(f"dimension {dim} is not a power of two")
    counts = _occupations(n_modes).sum(axis=1)
    out = np.where(counts % 2 == 0, 1.0, -1.0)
    out.setflags(write=False)
    return out


def is_sparse(matrix: Matrix) -> bool:
    return sparse.issparse(matrix)


def to_dense(matrix: Matrix) -> np.ndarray:
    if is_sparse(matrix):
        return matrix.toarray()
    return np.asarray(matrix)


def max_abs(matrix: Matrix) -> float:
    """Largest absolute entry; 0 for empty sparse matrices."""
    if is_sparse(matrix):
        data = matrix.tocsr().data
        return float(np.max(np.abs(data))) if data.size else 0.0
    return float(np.max(np.abs(matrix))) if matrix.size else 0.0


def frobenius(matrix: Matrix) -> float:
    if is_sparse(matrix):
        return float(sparse_linalg.norm(matrix))
    return float(np.linalg.norm(matrix))


def operator_norm(matrix: Matrix, hermitian: bool = False) -> float:
    """Spectral norm, dense below the dense limit and Lanczos/ARPACK above."""
    dim = matrix.shape[0]
    if dim == 0:
        return 0.0
    if is_sparse(matrix):
        if matrix.nnz == 0:
            return 0.0
        if dim <= get_settings().dense_limit:
            matrix = matrix.toarray()
        elif hermitian:
            vals = sparse_linalg.eigsh(matrix, k=1, which="LM", return_eigenvectors=False)
            return float(np.max(np.abs(vals)))
        else:
            vals = sparse_linalg.svds(matrix, k=1, return_singular_vectors=False)
            return float(np.max(vals))
    if hermitian:
        return float(np.max(np.abs(np.linalg.eigvalsh(matrix))))
    return float(np.linalg.norm(matrix, 2))


def _sigma(matrix: Matrix) -> Matrix:
    p = parity_diagonal(matrix.shape[0])
    if is_sparse(matrix):
        d = sparse.diags(p)
        return (d @ matrix @ d).tocsr()
    return p[:, None] * matrix * p[None, :]


def classify_parity(matrix: Matrix) -> str:
    even = 0.5 * (matrix + _sigma(matrix))
    odd = 0.5 * (matrix - _sigma(matrix))
    scale = max(frobenius(matrix), 1.0)
    odd_size = frobenius(odd)
    even_size = frobenius(even)
    if odd_size <= PARITY_TOL * scale:
        return "even"
    if even_size <= PARITY_TOL * scale:
        return "odd"
    return "mixed"


def is_hermitian_matrix(matrix: Matrix) -> bool:
    diff = matrix - matrix.conj().T
    return frobenius(diff) <= HERMITIAN_TOL * max(frobenius(matrix), 1e-300)


@dataclass(frozen=True, eq=False)
class FockOperator:
    """An operator on a Fock space with support and parity metadata."""

    matrix: Matrix
    support: SiteSet
    parity: str
    hermitian: bool

    @classmethod
    def from_matrix(
        cls,
        matrix: Matrix,
        support: Iterable[Site] = (),
        parity: Optional[str] = None,
        hermitian: Optional[bool] = None,
    ) -> "FockOperator":
        if is_sparse(matrix):
            matrix = matrix.tocsr().astype(complex)
        else:
            matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ShapeMismatch(f"operator matrix must be square, got shape {matrix.shape}")
        if parity is None:
            parity = classify_parity(matrix)
        if hermitian is None:
            hermitian = is_hermitian_matrix(matrix)
        return cls(matrix, SiteSet(tuple(s) for s in support), parity, hermitian)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return is_sparse(self.matrix)

    def dense(self) -> np.ndarray:
        return to_dense(self.matrix)

    def norm(self) -> float:
        return operator_norm(self.matrix, hermitian=self.hermitian)

    def adjoint(self) -> "FockOperator":
        return FockOperator(self.matrix.conj().T.copy(), self.support, self.parity, self.hermitian)

    def _check(self, other: "FockOperator"):
        if not isinstance(other, FockOperator):
            raise TypeError(f"expected FockOperator, got {type(other).__name__}")
        if other.dim != self.dim:
            raise ShapeMismatch(f"dimension mismatch: {self.dim} vs {other.dim}")

    def _combine(self, other: "FockOperator", matrix: Matrix) -> "FockOperator":
        return FockOperator.from_matrix(matrix, self.support | other.support)

    def __add__(self, other: "FockOperator") -> "FockOperator":
        self._check(other)
        return self._combine(other, _add(self.matrix, other.matrix))

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        self._check(other)
        return self._combine(other, _add(self.matrix, -other.matrix))

    def __neg__(self) -> "FockOperator":
        return FockOperator(-self.matrix, self.support, self.parity, self.hermitian)

    def __mul__(self, scalar: complex) -> "FockOperator":
        if isinstance(scalar, FockOperator):
            raise TypeError("use @ for operator products")
        hermitian = self.hermitian and complex(scalar).imag == 0
        return FockOperator(self.matrix * scalar, self.support, self.parity, hermitian)

    __rmul__ = __mul__

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        self._check(other)
        return self._combine(other, _matmul(self.matrix, other.matrix))

    def commutator(self, other: "FockOperator") -> "FockOperator":
        self._check(other)
        ab = _matmul(self.matrix, other.matrix)
        ba = _matmul(other.matrix, self.matrix)
        return self._combine(other, _add(ab, -ba))

    def anticommutator(self, other: "FockOperator") -> "FockOperator":
        self._check(other)
        ab = _matmul(self.matrix, other.matrix)
        ba = _matmul(other.matrix, self.matrix)
        return self._combine(other, _add(ab, ba))

    def expectation(self, rho: np.ndarray) -> complex:
        """tr(ρ A)."""
        if self.is_sparse:
            return complex((self.matrix.T.multiply(rho)).sum())
        return complex(np.sum(self.matrix.T * rho))


def _add(a: Matrix, b: Matrix) -> Matrix:
    if is_sparse(a) and is_sparse(b):
        return (a + b).tocsr()
    return to_dense(a) + to_dense(b)


def _matmul(a: Matrix, b: Matrix) -> Matrix:
    if is_sparse(a) and is_sparse(b):
        return (a @ b).tocsr()
    return to_dense(a) @ to_dense(b)


class FockSpace:
    """Fock space of r fermionic modes per site over an ordered site list."""

    def __init__(self, sites: Sequence[Site], r: int = 1, box: Optional[Box] = None, mode_budget: Optional[int] = None):
        if r < 1:
            raise ValueError(f"need r >= 1, got {r}")
        self.sites: Tuple[Site, ...] = tuple(tuple(s) for s in sites)
        self.r = r
        self.box = box
        self.n_modes = r * len(self.sites)
        budget = mode_budget if mode_budget is not None else get_settings().mode_budget
        if self.n_modes > budget:
            raise ResourceLimit(f"{self.n_modes} modes exceed the mode budget {budget}")
        self.dim = 2 ** self.n_modes
        self._site_index = {s: i for i, s in enumerate(self.sites)}

    @classmethod
    def for_box(cls, box: Box, r: int = 1) -> "FockSpace":
        return cls(box.sites, r=r, box=box)

    @classmethod
    def local(cls, points: Iterable[Site], r: int = 1) -> "FockSpace":
        """Space over a finite site set, sites in sorted order."""
        return cls(sorted(tuple(p) for p in points), r=r)

    def __repr__(self) -> str:
        return f"FockSpace(n_sites={len(self.sites)}, r={self.r}, dim={self.dim})"

    @cached_property
    def site_set(self) -> SiteSet:
        return SiteSet(self.sites)

    @property
    def dense(self) -> bool:
        return self.dim <= get_settings().dense_limit

    def mode(self, x: Site, i: int = 1) -> int:
        x = tuple(x)
        if x not in self._site_index:
            raise ValueError(f"site {x} is not in this Fock space")
        if not 1 <= i <= self.r:
            raise ValueError(f"internal index must satisfy 1 <= i <= {self.r}, got {i}")
        return self._site_index[x] * self.r + (i - 1)

    def modes_of(self, points: Iterable[Site]) -> list:
        return [self.mode(x, i) for x in points for i in range(1, self.r + 1)]

    def contains(self, points: Iterable[Site]) -> bool:
        return all(tuple(p) in self._site_index for p in points)

    @cached_property
    def occupations(self) -> np.ndarray:
        return _occupations(self.n_modes)

    def _jw_sign(self, m: int) -> np.ndarray:
        before = self.occupations[:, :m].sum(axis=1)
        return np.where(before % 2 == 0, 1.0, -1.0)

    @lru_cache(maxsize=None)
    def annihilation_matrix(self, m: int) -> sparse.csr_matrix:
        occ = self.occupations[:, m].astype(bool)
        states = np.arange(self.dim, dtype=np.int64)[occ]
        bit = 1 << (self.n_modes - 1 - m)
        data = self._jw_sign(m)[occ].astype(complex)
        return sparse.csr_matrix((data, (states ^ bit, states)), shape=(self.dim, self.dim))

    @lru_cache(maxsize=None)
    def majorana_action(self, m: int, which: int) -> Tuple[np.ndarray, np.ndarray]:
        """Signed permutation of γ_{2m+which}: γ|b⟩ = s(b)|π(b)⟩.

        γ_{2m} = a + a†, γ_{2m+1} = i(a† − a).
        """
        bit = 1 << (self.n_modes - 1 - m)
        perm = np.arange(self.dim, dtype=np.int64) ^ bit
        signs = self._jw_sign(m).astype(complex)
        if which == 1:
            occ = self.occupations[:, m]
            signs = signs * 1j * (1 - 2 * occ)
        return perm, signs

    def identity(self) -> FockOperator:
        matrix = sparse.identity(self.dim, dtype=complex, format="csr")
        if self.dense:
            matrix = matrix.toarray()
        return FockOperator(matrix, SiteSet(), "even", True)

    def zero(self) -> FockOperator:
        matrix = sparse.csr_matrix((self.dim, self.dim), dtype=complex)
        if self.dense:
            matrix = matrix.toarray()
        return FockOperator(matrix, SiteSet(), "even", True)


def annihilation(space: FockSpace, x: Site, i: int = 1) -> FockOperator:
    matrix = space.annihilation_matrix(space.mode(x, i))
    return FockOperator(matrix, SiteSet([tuple(x)]), "odd", False)


def creation(space: FockSpace, x: Site, i: int = 1) -> FockOperator:
    matrix = space.annihilation_matrix(space.mode(x, i)).conj().T.tocsr()
    return FockOperator(matrix, SiteSet([tuple(x)]), "odd", False)


def number_operator(space: FockSpace, points: Optional[Iterable[Site]] = None) -> FockOperator:
    """N_X = Σ_{x∈X} Σ_i a†_{x,i} a_{x,i}; X defaults to all sites."""
    pts = space.sites if points is None else [tuple(p) for p in points]
    if not space.contains(pts):
        raise ValueError("number operator region is not contained in the space")
    modes = space.modes_of(pts)
    diag = space.occupations[:, modes].sum(axis=1).astype(complex) if modes else np.zeros(space.dim, complex)
    matrix = sparse.diags(diag, format="csr")
    if space.dense:
        matrix = matrix.toarray()
    return FockOperator(matrix, SiteSet(pts), "even", True)


def parity_operator(space: FockSpace) -> FockOperator:
    matrix = sparse.diags(parity_diagonal(space.dim).astype(complex), format="csr")
    return FockOperator(matrix, space.site_set, "even", True)


def majorana(space: FockSpace, x: Site, i: int = 1, which: int = 0) -> FockOperator:
    perm, signs = space.majorana_action(space.mode(x, i), which)
    cols = np.arange(space.dim)
    matrix = sparse.csr_matrix((signs, (perm, cols)), shape=(space.dim, space.dim))
    return FockOperator(matrix, SiteSet([tuple(x)]), "odd", True)


def sigma(op: FockOperator) -> FockOperator:
    """The parity automorphism A ↦ (−1)^N A (−1)^N."""
    return FockOperator(_sigma(op.matrix), op.support, op.parity, op.hermitian)


def even_part(op: FockOperator) -> FockOperator:
    matrix = 0.5 * _add(op.matrix, _sigma(op.matrix))
    return FockOperator(matrix, op.support, "even", op.hermitian)


def odd_part(op: FockOperator) -> FockOperator:
    matrix = 0.5 * _add(op.matrix, -_sigma(op.matrix))
    return FockOperator(matrix, op.support, "odd", op.hermitian)


def require_even(op: FockOperator, what: str = "operator"):
    if op.parity != "even":
        raise ParityError(f"{what} must be even, got parity {op.parity!r}")


def is_number_conserving(op: FockOperator, tol: float = 1e-12) -> bool:
    """[A, N] = 0 on the whole space."""
    n_modes = int(op.dim).bit_length() - 1
    counts = _occupations(n_modes).sum(axis=1)
    if op.is_sparse:
        coo = op.matrix.tocoo()
        bad = coo.data[counts[coo.row] != counts[coo.col]]
        return bool(bad.size == 0 or np.max(np.abs(bad)) <= tol * max(1.0, max_abs(op.matrix)))
    mask = counts[:, None] != counts[None, :]
    return bool(np.max(np.abs(op.matrix[mask]), initial=0.0) <= tol * max(1.0, max_abs(op.matrix)))


def car_operator(space: FockSpace, terms: Iterable[CarTerm], support: Optional[Iterable[Site]] = None) -> FockOperator:
    """Realise a CAR polynomial Σ c · (ordered ladder product) on a space."""
    total = sparse.csr_matrix((space.dim, space.dim), dtype=complex)
    sites = set()
    for coefficient, ladders in terms:
        product = sparse.identity(space.dim, dtype=complex, format="csr")
        for x, i, dagger in ladders:
            sites.add(tuple(x))
            a = space.annihilation_matrix(space.mode(x, i))
            product = product @ (a.conj().T if dagger else a)
        total = total + coefficient * product
    total = total.tocsr()
    total.eliminate_zeros()
    matrix = total.toarray() if space.dense else total
    return FockOperator.from_matrix(matrix, support if support is not None else sites)


def hopping_terms(x: Site, y: Site, amplitude: complex, r: int = 1) -> list:
    """amplitude·Σ_i a†_{x,i} a_{y,i} + h.c."""
    terms = []
    for i in range(1, r + 1):
        terms.append((amplitude, ((x, i, True), (y, i, False))))
        terms.append((np.conj(amplitude), ((y, i, True), (x, i, False))))
    return terms


def density_terms(x: Site, value: float = 1.0, r: int = 1) -> list:
    """value·n_x."""
    return [(value, ((x, i, True), (x, i, False))) for i in range(1, r + 1)]


def density_density_terms(x: Site, y: Site, value: float, r: int = 1) -> list:
    """value·n_x n_y."""
    return [
        (value, ((x, i, True), (x, i, False), (y, j, True), (y, j, False)))
        for i in range(1, r + 1)
        for j in range(1, r + 1)
    ]


def save_operator(path: Union[str, Path], op: FockOperator):
    """Write an operator as a JSON header line plus row-major (re, im) pairs."""
    dense = op.dense()
    header = {
        "dim": op.dim,
        "support": sorted(list(s) for s in op.support),
        "parity": op.parity,
        "hermitian": op.hermitian,
    }
    pairs = np.empty((op.dim, 2 * op.dim))
    pairs[:, 0::2] = dense.real
    pairs[:, 1::2] = dense.imag
    with open(path, "w", encoding="utf-8") as f:
        f.write("# " + json.dumps(header, sort_keys=True) + "\n")
        np.savetxt(f, pairs, fmt="%.17g")


def load_operator(path: Union[str, Path]) -> FockOperator:
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path} has no operator header")
        header = json.loads(first[2:])
        pairs = np.loadtxt(f, ndmin=2)
    dim = header["dim"]
    if pairs.shape != (dim, 2 * dim):
        raise ShapeMismatch(f"{path}: expected {dim}x{2 * dim} values, got {pairs.shape}")
    matrix = pairs[:, 0::2] + 1j * pairs[:, 1::2]
    return FockOperator(matrix, SiteSet(tuple(s) for s in header["support"]), header["parity"], header["hermitian"])
