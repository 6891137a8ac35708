"""
Super-adiabatic perturbation theory at finite volume.

The dressing generator is kept as a bivariate series

    X = εS = Σ_{i,p} ε^i η^p X_(i,p),    A_{j,i} = X_(i, j−i),

so ε = 0 and η = 0 are ordinary points. Conjugating the Schrödinger
generator with ψ = e^{iX}φ gives

    H̃ = Σ_k (−i)^k/k! ad_X^k(H₀ + εV) + η Σ_k (−i)^k/(k+1)! ad_X^k(Ẋ).

Degree by degree the residual R = H̃ − ηK is split into P_*-diagonal
parts h_(i,p) and off-diagonal parts, and X_(i,p) = I_{H₀}(−B) removes the
off-diagonal part, B being R_(i,p) before X_(i,p) is added. Time
derivatives of lower-degree coefficients come from central difference
stencils over re-evaluated constructions, and are exactly zero at times
where the model is stationary.
"""

import itertools
import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..errors import BoundViolation, ConfigError, NotHermitian, NotPatchSupported, ToleranceError
from .invliou import WeightFunction, inverse_matrix
from .propagator import propagate
from .spectral import EigenSystem, GappedPatch

logger = logging.getLogger(__name__)

Degree = Tuple[int, int]
Series = Dict[Degree, np.ndarray]

MAX_ORDER = 4
DEFAULT_STENCIL = 3
DEFAULT_STEP = 2e-2
OFF_DIAGONAL_TOL = 1e-8
UNITARITY_TOL = 1e-12
PATCH_SUPPORT_TOL = 1e-10
MAX_CACHED_TIMES = 32

# central first-derivative weights, half-width 1..4
_STENCILS = {
    1: [-1 / 2, 0, 1 / 2],
    2: [1 / 12, -2 / 3, 0, 2 / 3, -1 / 12],
    3: [-1 / 60, 3 / 20, -3 / 4, 0, 3 / 4, -3 / 20, 1 / 60],
    4: [1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5, 4 / 105, -1 / 280],
}


class DrivenSystem(Protocol):
    """A gapped Hamiltonian H₀(t) with a perturbation V(t) on one box."""

    def h0(self, t: float, derivative: int = 0) -> np.ndarray: ...

    def perturbation(self, t: float, derivative: int = 0) -> np.ndarray: ...

    def patch(self, t: float) -> Tuple[EigenSystem, GappedPatch]: ...

    def is_stationary(self, t: float, order: int) -> bool: ...


def degrees(j: int) -> List[Degree]:
    """(i, p) with i + p = j, ordered by i."""
    return [(i, j - i) for i in range(j + 1)]


def _add(series: Series, key: Degree, value: np.ndarray):
    if key in series:
        series[key] = series[key] + value
    else:
        series[key] = value


def _bracket(x: Series, y: Series, max_degree: int, factor: complex) -> Series:
    """factor·[x, y] truncated at total degree max_degree."""
    out: Series = {}
    for (kx, a), (ky, b) in itertools.product(x.items(), y.items()):
        key = (kx[0] + ky[0], kx[1] + ky[1])
        if sum(key) <= max_degree:
            _add(out, key, factor * (a @ b - b @ a))
    return out


def conjugation_series(X: Series, A: Series, max_degree: int) -> Series:
    """e^{−iX} A e^{iX} = Σ_k (−i)^k/k! ad_X^k(A) as a series."""
    total = dict(A)
    current = dict(A)
    for k in range(1, max_degree + 1):
        current = _bracket(X, current, max_degree, -1j / k)
        if not current:
            break
        for key, value in current.items():
            _add(total, key, value)
    return total


def _derivative_series(X: Series, Xdot: Series, max_degree: int) -> Series:
    """η Σ_k (−i)^k/(k+1)! ad_X^k(Ẋ), the η shifting p by one."""
    shifted = {(i, p + 1): value for (i, p), value in Xdot.items() if i + p + 1 <= max_degree}
    total = dict(shifted)
    current = dict(shifted)
    for k in range(1, max_degree + 1):
        current = _bracket(X, current, max_degree, -1j / (k + 1))
        if not current:
            break
        for key, value in current.items():
            _add(total, key, value)
    return total


def block_diagonal(P: np.ndarray, C: np.ndarray) -> np.ndarray:
    """PCP + QCQ with Q = 𝟙 − P."""
    PC = P @ C
    CP = C @ P
    return C - PC - CP + 2.0 * (PC @ P)


@dataclass
class OrderTerms:
    """The construction at one time."""

    t: float
    X: Series
    h: Series
    K: np.ndarray
    es: EigenSystem
    patch: GappedPatch
    off_diagonal: float = 0.0


def _remember(cache: OrderedDict, key, value, limit: int):
    cache[key] = value
    while len(cache) > limit:
        cache.popitem(last=False)


class SaptCoefficients:
    """A_{j,i}(t), h_(i,p)(t) and K(t) for one driven system, built on demand.

    Args:
        system: the driven system.
        n: highest total degree.
        w: gap filter used for every inverse Liouvillian.
        stencil: half-width of the difference stencil for Ẋ.
        step: stencil spacing.
        max_times: number of base times whose constructions stay cached;
            the least recently used one is dropped first.
    """

    def __init__(
        self,
        system: DrivenSystem,
        n: int,
        w: WeightFunction,
        stencil: int = DEFAULT_STENCIL,
        step: float = DEFAULT_STEP,
        max_times: int = MAX_CACHED_TIMES,
    ):
        if not 0 <= n <= MAX_ORDER:
            raise ConfigError(f"order n must be between 0 and {MAX_ORDER}, got {n}")
        if stencil not in _STENCILS:
            raise ConfigError(f"stencil half-width must be one of {sorted(_STENCILS)}")
        if max_times < 1:
            raise ConfigError(f"max_times must be >= 1, got {max_times}")
        self.system = system
        self.n = n
        self.w = w
        self.stencil = stencil
        self.step = step
        self.max_times = max_times
        self._levels: "OrderedDict[float, Dict[Tuple[int, int], OrderTerms]]" = OrderedDict()
        self._patches: "OrderedDict[float, Tuple[EigenSystem, GappedPatch]]" = OrderedDict()

    def __repr__(self) -> str:
        return f"SaptCoefficients(n={self.n}, {self.w})"

    def _patch(self, t: float):
        if t in self._patches:
            self._patches.move_to_end(t)
        else:
            # every base time touches offsets up to ±n·stencil
            _remember(self._patches, t, self.system.patch(t), self.max_times * (2 * self.n * self.stencil + 1))
        return self._patches[t]

    def _group(self, t0: float) -> Dict[Tuple[int, int], OrderTerms]:
        if t0 in self._levels:
            self._levels.move_to_end(t0)
        else:
            _remember(self._levels, t0, {}, self.max_times)
        return self._levels[t0]

    def _level(self, t0: float, offset: int, level: int) -> OrderTerms:
        group = self._group(t0)
        key = (offset, level)
        if key in group:
            return group[key]
        t = t0 + offset * self.step
        es, patch = self._patch(t)
        H0 = self.system.h0(t)
        P = patch.projector_matrix
        if level == 0:
            K = inverse_matrix(es, self.system.h0(t, 1), self.w) if not self.system.is_stationary(t, 1) else np.zeros_like(H0)
            terms = OrderTerms(t, {}, {(0, 0): H0}, K, es, patch)
            group[key] = terms
            return terms

        previous = self._level(t0, offset, level - 1)
        X = dict(previous.X)
        h = dict(previous.h)
        Xdot = self._derivatives(t0, offset, level - 1, t)
        base = {(0, 0): H0, (1, 0): self.system.perturbation(t)}
        residual = conjugation_series(X, base, level)
        for degree, value in _derivative_series(X, Xdot, level).items():
            _add(residual, degree, value)
        _add(residual, (0, 1), -previous.K)

        worst = previous.off_diagonal
        for degree in degrees(level):
            B = residual.get(degree, np.zeros_like(H0))
            A = inverse_matrix(es, -B, self.w)
            A = 0.5 * (A + A.conj().T)
            corrected = B + 1j * (H0 @ A - A @ H0)
            diagonal = block_diagonal(P, corrected)
            worst = max(worst, float(np.max(np.abs(corrected - diagonal), initial=0.0)))
            X[degree] = A
            h[degree] = 0.5 * (diagonal + diagonal.conj().T)
        scale = max(1.0, float(np.max(np.abs(H0))))
        if worst > OFF_DIAGONAL_TOL * scale:
            raise ToleranceError(f"off-diagonal residual {worst:.2e} left at degree {level}, t={t}")
        terms = OrderTerms(t, X, h, previous.K, es, patch, worst)
        group[key] = terms
        return terms

    def _derivatives(self, t0: float, offset: int, level: int, t: float) -> Series:
        """Ẋ_(i,p) for all degrees ≤ level at t0 + offset·step."""
        if level == 0:
            return {}
        if self.system.is_stationary(t, self.n):
            return {}
        weights = _STENCILS[self.stencil]
        m = self.stencil
        out: Series = {}
        for q, weight in zip(range(-m, m + 1), weights):
            if weight == 0:
                continue
            shifted = self._level(t0, offset + q, level)
            for key, value in shifted.X.items():
                _add(out, key, (weight / self.step) * value)
        return out

    def at(self, t: float) -> OrderTerms:
        return self._level(float(t), 0, self.n)

    def a(self, j: int, i: int, t: float) -> np.ndarray:
        """A_{j,i}(t), the coefficient of ε^i η^{j−i} in εS."""
        if not 1 <= j <= self.n or not 0 <= i <= j:
            raise ConfigError(f"A_{{{j},{i}}} is outside the constructed order {self.n}")
        return self.at(t).X[(i, j - i)]

    def h(self, i: int, p: int, t: float) -> np.ndarray:
        return self.at(t).h[(i, p)]

    def patch(self, t: float) -> GappedPatch:
        return self._patch(float(t))[1]

    def summary_rows(self, grid: Iterable[float]) -> List[dict]:
        """(t, j, i, ‖A_{j,i}‖, ‖h_(i,j−i)‖) rows."""
        rows = []
        for t in grid:
            terms = self.at(t)
            for j in range(1, self.n + 1):
                for i, p in degrees(j):
                    rows.append({
                        "t": float(t),
                        "j": j,
                        "i": i,
                        "norm_a": float(np.linalg.norm(terms.X[(i, p)], 2)),
                        "norm_h": float(np.linalg.norm(terms.h[(i, p)], 2)),
                    })
        return rows


def construct_sapt(
    system: DrivenSystem,
    n: int,
    w: WeightFunction,
    stencil: int = DEFAULT_STENCIL,
    step: float = DEFAULT_STEP,
    max_times: int = MAX_CACHED_TIMES,
) -> SaptCoefficients:
    return SaptCoefficients(system, n, w, stencil, step, max_times)


def s_n(coeffs: SaptCoefficients, eps: float, eta: float, t: float, order: Optional[int] = None) -> np.ndarray:
    """εS_n = Σ_{j≤n} Σ_i ε^i η^{j−i} A_{j,i}(t)."""
    order = coeffs.n if order is None else order
    if order > coeffs.n:
        raise ConfigError(f"order {order} exceeds the constructed order {coeffs.n}")
    dim = coeffs.system.h0(t).shape[0]
    out = np.zeros((dim, dim), dtype=complex)
    if order == 0:
        return out
    terms = coeffs.at(t)
    for j in range(1, order + 1):
        for i, p in degrees(j):
            out += eps ** i * eta ** p * terms.X[(i, p)]
    return out


def dressed_generator(coeffs: SaptCoefficients, eps: float, eta: float, t: float) -> np.ndarray:
    """ηK + Σ ε^i η^p h_(i,p), the generator of the effective transport."""
    terms = coeffs.at(t)
    out = eta * terms.K
    for (i, p), value in terms.h.items():
        out = out + eps ** i * eta ** p * value
    return out


class ResummedGenerator:
    """εS = Σ_j χ(ε/δ_j) χ(η/δ_j) Σ_i ε^i η^{j−i} A_{j,i}, χ = 1 on [0, 1]."""

    def __init__(self, coeffs: SaptCoefficients, grid: Sequence[float]):
        self.coeffs = coeffs
        self.grid = [float(t) for t in grid]
        self.norms: List[float] = []
        self.deltas: List[float] = []
        previous = np.inf
        for j in range(1, coeffs.n + 1):
            norm = max(
                float(np.linalg.norm(coeffs.a(j, i, t), 2))
                for t in self.grid
                for i in range(j + 1)
            )
            half = 0.5 ** j
            delta = min(half / norm if norm > 0 else np.inf, half, previous)
            self.norms.append(norm)
            self.deltas.append(delta)
            previous = delta

    @property
    def j_max(self) -> int:
        return self.coeffs.n

    def active_orders(self, eps: float, eta: float) -> List[int]:
        return [j for j, delta in enumerate(self.deltas, start=1) if eps <= delta and eta <= delta]

    def __call__(self, eps: float, eta: float, t: float) -> np.ndarray:
        dim = self.coeffs.system.h0(t).shape[0]
        out = np.zeros((dim, dim), dtype=complex)
        active = self.active_orders(eps, eta)
        if not active:
            return out
        terms = self.coeffs.at(t)
        for j in active:
            for i, p in degrees(j):
                out += eps ** i * eta ** p * terms.X[(i, p)]
        return out

    def constant(self, n: int) -> float:
        """C_n with ‖εS − εS_n‖ ≤ C_n max(ε, η)^n for ε, η ≤ 1."""
        total = (n + 3) / 2.0 ** n
        for j in range(1, min(n, self.j_max) + 1):
            delta = self.deltas[j - 1]
            total += (j + 1) * self.norms[j - 1] * delta ** (-n)
        return total


def resummed_s(generator: ResummedGenerator, eps: float, eta: float, t: float) -> np.ndarray:
    return generator(eps, eta, t)


def _check_hermitian(S: np.ndarray, what: str):
    scale = max(float(np.max(np.abs(S), initial=0.0)), 1e-300)
    if float(np.max(np.abs(S - S.conj().T), initial=0.0)) > 1e-10 * max(scale, 1.0):
        raise NotHermitian(f"{what} must be Hermitian")


def dressing_unitary(S: np.ndarray, eps: float = 1.0) -> np.ndarray:
    """e^{i eps S} for Hermitian S, with a unitarity re-check."""
    _check_hermitian(S, "dressing generator")
    evals, evecs = scipy.linalg.eigh(0.5 * (S + S.conj().T))
    U = (evecs * np.exp(1j * eps * evals)) @ evecs.conj().T
    defect = float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))
    if defect > UNITARITY_TOL:
        raise ToleranceError(f"dressing unitary defect {defect:.2e}")
    return U


def neass(rho: np.ndarray, S: np.ndarray, eps: float = 1.0) -> np.ndarray:
    """e^{iεS} ρ e^{−iεS}."""
    U = dressing_unitary(S, eps)
    return U @ rho @ U.conj().T


def expansion_series(coeffs: SaptCoefficients, A: np.ndarray, t: float) -> Series:
    """Series of e^{−iX} A e^{iX}, the coefficient of ε^i η^p at (i, p)."""
    return conjugation_series(coeffs.at(t).X, {(0, 0): np.asarray(A)}, coeffs.n)


def expansion_map(coeffs: SaptCoefficients, A: np.ndarray, j: int, t: float, ratio: float = 0.0) -> np.ndarray:
    """K_j(A) at η = ratio·ε: Σ_p ratio^p [e^{−iX}Ae^{iX}]_(j−p, p)."""
    if j > coeffs.n:
        raise ConfigError(f"K_{j} needs order {j}, constructed order is {coeffs.n}")
    series = expansion_series(coeffs, A, t)
    out = np.zeros_like(np.asarray(A), dtype=complex)
    for i, p in degrees(j):
        if (i, p) in series:
            out = out + ratio ** p * series[(i, p)]
    return out


def expansion_expectation(coeffs: SaptCoefficients, A: np.ndarray, j: int, t: float, ratio: float = 0.0) -> complex:
    """tr(P_* K_j(A))/κ."""
    patch = coeffs.patch(t)
    return patch.expectation(expansion_map(coeffs, A, j, t, ratio))


def kubo_coefficient(coeffs: SaptCoefficients, A: np.ndarray, t: float) -> complex:
    """σ_{A,1} = −i tr(P_*[A₁, A])/κ with A₁ = A_{1,1} = −I_{H₀}(V)."""
    A1 = coeffs.a(1, 1, t)
    patch = coeffs.patch(t)
    return -1j * patch.expectation(A1 @ A - A @ A1)


def parallel_transport(
    coeffs: SaptCoefficients,
    rho0: np.ndarray,
    eps: float,
    eta: float,
    t0: float,
    t: float,
    transport: str = "integrate",
    tol: float = 1e-10,
) -> np.ndarray:
    """P_n(t) = V ρ₀ V† with iη V' = (ηK + Σ ε^i η^p h_(i,p)) V.

    "exact" uses that the solution for ρ₀ = P_*(t₀)/κ is P_*(t)/κ.
    """
    patch0 = coeffs.patch(t0)
    P0 = patch0.projector_matrix
    if float(np.max(np.abs(rho0 - P0 @ rho0 @ P0), initial=0.0)) > PATCH_SUPPORT_TOL:
        raise NotPatchSupported("initial state is not supported in the gapped patch")
    if t == t0:
        return np.array(rho0, copy=True)
    if transport == "exact":
        if float(np.max(np.abs(rho0 - patch0.state()))) > PATCH_SUPPORT_TOL:
            raise ConfigError("exact transport needs ρ₀ = P_*(t₀)/κ")
        return coeffs.patch(t).state()
    if transport != "integrate":
        raise ConfigError(f"unknown transport {transport!r}")
    evals, evecs = scipy.linalg.eigh(0.5 * (rho0 + rho0.conj().T))
    keep = evals > 1e-14
    block = evecs[:, keep] * np.sqrt(evals[keep])
    prop = propagate(lambda s: dressed_generator(coeffs, eps, eta, s), eta, t0, t, tol=tol, initial=block)
    out = prop.U
    return out @ out.conj().T


def transport_defect(coeffs: SaptCoefficients, rho: np.ndarray, t: float) -> float:
    """‖P_* ρ P_* − ρ‖."""
    P = coeffs.patch(t).projector_matrix
    return float(np.linalg.norm(P @ rho @ P - rho, 2))


def stationarity_defect(H: np.ndarray, rho: np.ndarray) -> float:
    """‖[H, ρ]‖."""
    return float(np.linalg.norm(H @ rho - rho @ H, 2))


def check_first_order(coeffs: SaptCoefficients, t: float, tol: float = 1e-9) -> float:
    """Compare A₁ with I((η/ε)I(Ḣ₀) − V) slot by slot; returns the deviation."""
    terms = coeffs.at(t)
    es = terms.es
    expected_eta = inverse_matrix(es, inverse_matrix(es, coeffs.system.h0(t, 1), coeffs.w), coeffs.w)
    expected_eps = -inverse_matrix(es, coeffs.system.perturbation(t), coeffs.w)
    if coeffs.system.is_stationary(t, 1):
        expected_eta = np.zeros_like(expected_eta)
    deviation = max(
        float(np.linalg.norm(terms.X[(0, 1)] - expected_eta, 2)),
        float(np.linalg.norm(terms.X[(1, 0)] - expected_eps, 2)),
    )
    if deviation > tol:
        raise BoundViolation(f"first-order coefficient deviates by {deviation:.2e} at t={t}")
    return deviation
