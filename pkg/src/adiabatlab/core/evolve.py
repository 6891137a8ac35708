"""
Adiabatic tracking, Lieb-Robinson data and finite-volume dynamics comparison.

Times are macroscopic: the evolution solves iη U' = H(t) U, so a macroscopic
interval |t − s| corresponds to |t − s|/η in the units the bounds use.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import BoundViolation, ShapeMismatch
from .fock import FockOperator, FockSpace, operator_norm
from .interaction import (
    DecayFunction,
    Interaction,
    LipschitzPotential,
    constant_decay,
    cauchy_deficit,
    f_gamma_norm,
    f_zeta,
    lr_constant,
    potential_limit_box,
    time_norm,
)
from .invliou import WeightFunction
from .lattice import Box, SiteSet, centred_sites
from .propagator import heisenberg, propagate, propagate_many
from .sapt import DrivenSystem, SaptCoefficients, construct_sapt, dressing_unitary, neass, s_n

logger = logging.getLogger(__name__)

BOUND_TOL = 1e-8


def _static(system) -> bool:
    return bool(getattr(system, "static", False))


def _hamiltonian(system: DrivenSystem, eps: float) -> Callable[[float], np.ndarray]:
    if eps == 0:
        return lambda t: system.h0(t)
    return lambda t: system.h0(t) + eps * system.perturbation(t)


def _dense(A) -> np.ndarray:
    return A.dense() if isinstance(A, FockOperator) else np.asarray(A, dtype=complex)


@dataclass
class TrackingResult:
    t0: float
    t: float
    eps: float
    eta: float
    n: int
    error: float
    value: complex
    reference: complex


def super_adiabatic_state(coeffs: SaptCoefficients, eps: float, eta: float, t: float) -> np.ndarray:
    """Π_n(t) = e^{iεS_n} P_*(t) e^{−iεS_n} / κ."""
    return neass(coeffs.patch(t).state(), s_n(coeffs, eps, eta, t))


def tracking_error(
    system: DrivenSystem,
    n: int,
    eps: float,
    eta: float,
    A,
    t0: float,
    t: float,
    w: Optional[WeightFunction] = None,
    coeffs: Optional[SaptCoefficients] = None,
    tol: float = 1e-10,
) -> TrackingResult:
    """|tr((ρ(t) − Π_n(t)) A)| with ρ the Schrödinger evolution of Π_n(t₀).

    Only the κ vectors spanning Π_n(t₀) are propagated.
    """
    if coeffs is None:
        coeffs = construct_sapt(system, n, w or system.weight)
    A = _dense(A)
    patch0 = coeffs.patch(t0)
    block = dressing_unitary(s_n(coeffs, eps, eta, t0, n)) @ patch0.vectors
    prop = propagate(_hamiltonian(system, eps), eta, t0, t, tol=tol, initial=block, static=_static(system) and eps == 0)
    evolved = prop.U
    value = complex(np.trace(evolved.conj().T @ A @ evolved)) / patch0.kappa
    target = neass(coeffs.patch(t).state(), s_n(coeffs, eps, eta, t, n))
    reference = complex(np.trace(target @ A))
    error = abs(value - reference)
    logger.debug(f"tracking error n={n} ε={eps:g} η={eta:g} t={t:g}: {error:.3e}")
    return TrackingResult(t0, t, eps, eta, n, error, value, reference)


def tracking_bound(constant: float, n: int, eps: float, eta: float, d: int) -> float:
    """C_n (ε^{n+1} + η^{n+1}) / η^{d+1}."""
    return constant * (eps ** (n + 1) + eta ** (n + 1)) / eta ** (d + 1)


def calibrate_constant(results: Iterable[TrackingResult], d: int) -> float:
    """Smallest C_n with error ≤ C_n (ε^{n+1}+η^{n+1})/η^{d+1} on all runs."""
    best = 0.0
    for r in results:
        best = max(best, r.error / tracking_bound(1.0, r.n, r.eps, r.eta, d))
    return best


def check_tracking(results: Iterable[TrackingResult], constant: float, d: int) -> Tuple[List[dict], Optional[BoundViolation]]:
    """Compare each run with the calibrated bound.

    Every run gets a row with its bound and a `within_bound` flag; the first
    excess is returned as a BoundViolation for the caller to raise once the
    rows are emitted.
    """
    rows = []
    violation = None
    for r in results:
        bound = tracking_bound(constant, r.n, r.eps, r.eta, d)
        within = r.error <= bound + BOUND_TOL
        rows.append({"t": r.t, "eps": r.eps, "eta": r.eta, "n": r.n, "error": r.error, "bound": bound, "within_bound": within})
        if not within and violation is None:
            violation = BoundViolation(f"tracking error {r.error:.3e} exceeds C_n-bound {bound:.3e} at ε={r.eps:g}, η={r.eta:g}")
    return rows, violation


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


def trajectory_rows(
    system: DrivenSystem,
    eps: float,
    eta: float,
    times: Sequence[float],
    observables: Dict[str, object],
    coeffs: Optional[SaptCoefficients] = None,
    tol: float = 1e-10,
) -> List[dict]:
    """(t, observable, value, error) rows of one trajectory.

    The trajectory starts in Π_n(times[0]) when `coeffs` is given, and in
    P_*(times[0])/κ otherwise; the error column compares with Π_n(t).
    """
    t0 = float(times[0])
    patch0 = system.patch(t0)[1]
    if coeffs is None:
        block = patch0.vectors
    else:
        block = dressing_unitary(s_n(coeffs, eps, eta, t0)) @ patch0.vectors
    props = propagate_many(_hamiltonian(system, eps), eta, times, tol=tol, initial=block, static=_static(system) and eps == 0)
    rows = []
    for prop in props:
        evolved = prop.U
        reference = super_adiabatic_state(coeffs, eps, eta, prop.t1) if coeffs is not None else None
        for name, A in observables.items():
            A = _dense(A)
            value = complex(np.trace(evolved.conj().T @ A @ evolved)) / patch0.kappa
            error = abs(value - complex(np.trace(reference @ A))) if reference is not None else None
            rows.append({"t": prop.t1, "observable": name, "value": value.real, "error": error})
    return rows


@dataclass
class LRRow:
    t: float
    lhs: float
    rhs_general: float
    rhs_exp: Optional[float]

    @property
    def rhs(self) -> float:
        return self.rhs_general if self.rhs_exp is None else min(self.rhs_general, self.rhs_exp)


@dataclass
class LRData:
    rows: List[LRRow]
    norm: float
    c_zeta: float
    f_sum: float
    distance: int
    velocity: Optional[float] = None
    params: Dict = field(default_factory=dict)


def _check_disjoint(X: SiteSet, Y: SiteSet, box: Box):
    if X & Y:
        raise ShapeMismatch(f"supports {sorted(X)} and {sorted(Y)} overlap")
    if not X or not Y:
        raise ShapeMismatch("both observables need a non-empty support")
    if len(X) >= len(box) or len(Y) >= len(box):
        raise ShapeMismatch("supports must be proper subsets of the box")


def _lr_rows(props, A: FockOperator, B: FockOperator, s: float, eta: float, zeta: DecayFunction, norm: float, box: Box) -> LRData:
    X, Y = SiteSet(A.support), SiteSet(B.support)
    _check_disjoint(X, Y, box)
    c_zeta = lr_constant(zeta, box)
    f_sum = box.distance_sum(X, Y, lambda r: f_zeta(zeta, r, box.d))
    distance = int(min(box.distance(x, y) for x in X for y in Y))
    a_norm = A.norm()
    b_norm = B.norm()
    velocity = None
    if zeta.name == "exponential":
        a = float(zeta.params["a"])
        velocity = 2.0 / a * c_zeta * norm
        prefactor_exp = 2.0 * a_norm * b_norm * f_gamma_norm(constant_decay(), box) / c_zeta * min(len(X), len(Y))
    Bm = B.dense()
    rows = []
    for prop in props:
        evolved = heisenberg(prop, A).dense()
        lhs = float(np.linalg.norm(evolved @ Bm - Bm @ evolved, 2))
        tau = abs(prop.t1 - s) / eta
        rhs_general = 2.0 * a_norm * b_norm / c_zeta * np.expm1(2.0 * c_zeta * tau * norm) * f_sum
        rhs_exp = None
        if velocity is not None:
            rhs_exp = prefactor_exp * float(np.exp(a * (velocity * tau - distance)))
        row = LRRow(prop.t1, lhs, float(rhs_general), rhs_exp)
        if lhs > row.rhs + BOUND_TOL:
            raise BoundViolation(f"Lieb-Robinson bound fails at t={prop.t1:g}: {lhs:.3e} > {row.rhs:.3e}")
        rows.append(row)
    return LRData(rows, norm, c_zeta, f_sum, distance, velocity, {"eta": eta, "s": s, "zeta": zeta.name})


def lr_light_cone(
    system: DrivenSystem,
    A: FockOperator,
    Bs: Sequence[FockOperator],
    eta: float,
    times: Sequence[float],
    zeta: DecayFunction,
    phi: Interaction,
    s: Optional[float] = None,
    tol: float = 1e-10,
) -> List[LRData]:
    """LR data of one evolved A against several B, sharing the propagation.

    `phi` is the interaction of H₀; its ζ-norm is the supremum over `times`.
    The exponential form of the bound is added when ζ = e^{−a·}.
    """
    box: Box = system.box
    s = float(times[0]) if s is None else float(s)
    for B in Bs:
        _check_disjoint(SiteSet(A.support), SiteSet(B.support), box)
    norm = time_norm(phi, zeta, 0, times, k_range=[box.k])
    props = propagate_many(lambda t: system.h0(t), eta, [s] + [float(t) for t in times], tol=tol, static=_static(system))
    return [_lr_rows(props[1:], A, B, s, eta, zeta, norm, box) for B in Bs]


def lr_data(
    system: DrivenSystem,
    A: FockOperator,
    B: FockOperator,
    eta: float,
    times: Sequence[float],
    zeta: DecayFunction,
    phi: Interaction,
    s: Optional[float] = None,
    tol: float = 1e-10,
) -> LRData:
    """‖[𝔘_{t,s}(A), B]‖ against the Lieb-Robinson bounds on the system's box.

    Raises BoundViolation at the first grid point where the commutator
    exceeds the smaller of the two bounds.
    """
    return lr_light_cone(system, A, [B], eta, times, zeta, phi, s, tol)[0]


def restricted_hamiltonian(
    phi: Interaction,
    v: Optional[LipschitzPotential],
    k: int,
    M: int,
    space: FockSpace,
    t: float = 0.0,
) -> np.ndarray:
    """H^{Λk}|_{Λ_M}: terms Φ^{Λk}(X) with X ⊆ Λ_M and v^{Λk} on Λ_M, on `space`."""
    box = phi.box(k)
    region = centred_sites(M, box.d)
    out = np.zeros((space.dim, space.dim), dtype=complex)
    for X, op in phi.terms(k, t, space=space).items():
        if X <= region:
            out += op.dense()
    if v is not None:
        weight = v.envelope(t)
        occ = space.occupations
        diag = np.zeros(space.dim)
        for x in sorted(region):
            value = v.site_map(box, x)
            if value != 0:
                diag += value * occ[:, space.modes_of([x])].sum(axis=1)
        out += np.diag(weight * diag)
    return out


def full_hamiltonian(phi: Interaction, v: Optional[LipschitzPotential], k: int, space: FockSpace, t: float = 0.0) -> np.ndarray:
    return restricted_hamiltonian(phi, v, k, k, space, t)


@dataclass
class DynamicsComparison:
    difference_i: float
    bound_i: float
    difference_ii: float
    bound_ii: float
    premise_k: Optional[int]
    deficit: float
    norm: float

    @property
    def ratio_ii(self) -> float:
        return self.difference_ii / self.bound_ii if self.bound_ii > 0 else 0.0


def _evolve_observable(hfun, eta, s, t, A: np.ndarray, tol: float, static: bool) -> np.ndarray:
    prop = propagate(hfun, eta, s, t, tol=tol, static=static)
    return prop.U.conj().T @ A @ prop.U


def dynamics_comparison(
    phi: Interaction,
    v: Optional[LipschitzPotential],
    k: int,
    l: int,
    M: int,
    observable: Callable[[FockSpace], FockOperator],
    eta: float,
    t: float,
    zeta: DecayFunction,
    s: float = 0.0,
    grid: Optional[Sequence[float]] = None,
    tol: float = 1e-10,
) -> DynamicsComparison:
    """Exact differences of finite-volume dynamics and the two comparison bounds.

    (i) compares the dynamics of H^{Λl}|_{Λ_M} and H^{Λk}|_{Λ_M}; its bound
    only applies from the box where the potential stops changing on Λ_M,
    reported as `premise_k` (the bound is inf below it). (ii) compares H^{Λk}
    with H^{Λk}|_{Λ_M} on the Fock space of Λ_k.
    """
    if not M <= k <= l:
        raise ShapeMismatch(f"need M <= k <= l, got M={M}, k={k}, l={l}")
    grid = list(grid) if grid is not None else [s, 0.5 * (s + t), t]
    box_k = phi.box(k)
    d = box_k.d
    region = centred_sites(M, d)
    static = phi.is_stationary(s, 1) and phi.is_stationary(t, 1) and (v is None or v.envelope.is_stationary(t, 1))
    tau = abs(t - s) / eta

    small = FockSpace.local(region, phi.r)
    A_small = observable(small)
    X = SiteSet(A_small.support)
    if not X <= region:
        raise ShapeMismatch(f"observable support {sorted(X)} is not inside Λ_{M}")
    a_norm = A_small.norm()
    Am = A_small.dense()
    ev_l = _evolve_observable(lambda u: restricted_hamiltonian(phi, v, l, M, small, u), eta, s, t, Am, tol, static)
    ev_k = _evolve_observable(lambda u: restricted_hamiltonian(phi, v, k, M, small, u), eta, s, t, Am, tol, static)
    difference_i = operator_norm(ev_l - ev_k, hermitian=True)

    norm = max(time_norm(phi, zeta, 0, grid, k_range=[k, l]), 0.0)
    growth = 2.0 * a_norm * np.exp(4.0 * tau * norm) * tau
    premise_k = M if v is None else potential_limit_box(v, phi.boxes, M)
    deficit = cauchy_deficit(phi, k, l, M, zeta, 0, grid=grid)
    if premise_k is not None and k >= premise_k:
        small_box = Box(M, d, "open")
        f_sum_i = small_box.distance_sum(X, region, lambda r: f_zeta(zeta, r, d))
        bound_i = float(growth * deficit * f_sum_i)
    else:
        bound_i = float("inf")

    big = FockSpace.for_box(box_k, phi.r)
    A_big = observable(big).dense()
    ev_full = _evolve_observable(lambda u: full_hamiltonian(phi, v, k, big, u), eta, s, t, A_big, tol, static)
    ev_cut = _evolve_observable(lambda u: restricted_hamiltonian(phi, v, k, M, big, u), eta, s, t, A_big, tol, static)
    difference_ii = operator_norm(ev_full - ev_cut, hermitian=True)
    outside = [y for y in box_k.sites if y not in region]
    f_sum_ii = box_k.distance_sum(X, outside, lambda r: f_zeta(zeta, r, d))
    bound_ii = float(growth * norm * f_sum_ii)

    for name, diff, bound in (("(i)", difference_i, bound_i), ("(ii)", difference_ii, bound_ii)):
        if diff > bound + BOUND_TOL:
            raise BoundViolation(f"dynamics comparison {name}: {diff:.3e} exceeds {bound:.3e}")
    logger.info(f"Dynamics comparison M={M} k={k} l={l}: (i) {difference_i:.3e} ≤ {bound_i:.3e}, (ii) {difference_ii:.3e} ≤ {bound_ii:.3e}")
    return DynamicsComparison(difference_i, bound_i, difference_ii, bound_ii, premise_k, deficit, norm)
