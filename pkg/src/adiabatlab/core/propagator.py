"""
Fourth-order commutator-free propagation of iη U' = H(t) U.

One step of length h uses the Gauss-Legendre times t + c_{1,2}·h and two
exponentials:

    U ← exp(−i h (a1 H1 + a2 H2)/η) · exp(−i h (a2 H1 + a1 H2)/η) · U,
    a1 = (3 − 2√3)/12, a2 = (3 + 2√3)/12, c_{1,2} = 1/2 ∓ √3/6.

Exponentials of the Hermitian combinations go through eigh, so every step
is unitary to rounding. The step size is controlled by step doubling.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from ..errors import ConfigError, PropagationError, ToleranceError
from .fock import FockOperator

logger = logging.getLogger(__name__)

A1 = (3.0 - 2.0 * np.sqrt(3.0)) / 12.0
A2 = (3.0 + 2.0 * np.sqrt(3.0)) / 12.0
C1 = 0.5 - np.sqrt(3.0) / 6.0
C2 = 0.5 + np.sqrt(3.0) / 6.0

UNITARITY_TOL = 1e-9
DEFAULT_TOL = 1e-10
DEFAULT_STEP_CAP = 4.0
MIN_STEP_FRACTION = 1e-12

Hamiltonian = Callable[[float], Union[np.ndarray, FockOperator]]


def _dense(op) -> np.ndarray:
    return op.dense() if isinstance(op, FockOperator) else np.asarray(op, dtype=complex)


def hermitian_exp(H: np.ndarray, tau: float) -> np.ndarray:
    """exp(−iτH) for Hermitian H."""
    evals, evecs = scipy.linalg.eigh(H)
    return (evecs * np.exp(-1j * tau * evals)) @ evecs.conj().T


def cf4_step(hfun: Hamiltonian, eta: float, t: float, h: float, state: np.ndarray) -> np.ndarray:
    H1 = _dense(hfun(t + C1 * h))
    H2 = _dense(hfun(t + C2 * h))
    first = hermitian_exp(A2 * H1 + A1 * H2, h / eta)
    second = hermitian_exp(A1 * H1 + A2 * H2, h / eta)
    return second @ (first @ state)


def unitarity_defect(U: np.ndarray) -> float:
    return float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[1]), 2))


@dataclass
class Propagator:
    """U(t1, t0) (or the propagated block) with its step log."""

    U: np.ndarray
    eta: float
    t0: float
    t1: float
    steps: int = 0
    rejected: int = 0
    max_defect: float = 0.0


def _propagate_interval(hfun, eta, t0, t1, state, tol, h, step_cap, counters):
    span = t1 - t0
    if span == 0.0:
        return state, h
    h_max = min(abs(span), step_cap * eta)
    h = min(h, h_max)
    h_min = MIN_STEP_FRACTION * max(abs(span), 1.0)
    t = t0
    direction = 1.0 if span > 0 else -1.0
    while direction * (t1 - t) > 1e-15 * max(1.0, abs(t1)):
        step = min(h, abs(t1 - t))
        big = cf4_step(hfun, eta, t, direction * step, state)
        half = cf4_step(hfun, eta, t, direction * step / 2, state)
        small = cf4_step(hfun, eta, t + direction * step / 2, direction * step / 2, half)
        err = float(np.max(np.abs(big - small)))
        if err <= tol:
            t += direction * step
            state = small
            counters["steps"] += 1
            factor = 2.0 if err == 0 else min(2.0, max(0.2, 0.9 * (tol / err) ** 0.2))
            h = min(step * factor, h_max) if step == h else h
        else:
            counters["rejected"] += 1
            h = step * max(0.2, 0.9 * (tol / err) ** 0.2)
            if h < h_min:
                raise PropagationError(f"step size underflow at t={t:.6g} (h={h:.3e}, error={err:.3e})")
    return state, h


def propagate_many(
    hfun: Hamiltonian,
    eta: float,
    times: Sequence[float],
    tol: float = DEFAULT_TOL,
    initial: Optional[np.ndarray] = None,
    static: bool = False,
    step_cap: float = DEFAULT_STEP_CAP,
) -> List[Propagator]:
    """Propagators from times[0] to each of the times.

    With `initial` (dim × m) only that block is propagated; otherwise the
    full unitary is built.
    """
    if eta <= 0:
        raise ConfigError(f"eta must be positive, got {eta}")
    t0 = float(times[0])
    H0 = _dense(hfun(t0))
    state = np.eye(H0.shape[0], dtype=complex) if initial is None else np.array(initial, dtype=complex)
    out = []
    if static:
        evals, evecs = scipy.linalg.eigh(H0)
        rotated = evecs.conj().T @ state
        for t in times:
            phase = np.exp(-1j * (t - t0) * evals / eta)
            out.append(Propagator(evecs @ (phase[:, None] * rotated), eta, t0, float(t)))
        return out

    counters = {"steps": 0, "rejected": 0}
    h = 0.1 * eta
    current = t0
    for t in times:
        state, h = _propagate_interval(hfun, eta, current, float(t), state, tol, h, step_cap, counters)
        current = float(t)
        defect = unitarity_defect(state) if initial is None else 0.0
        if defect > UNITARITY_TOL:
            raise ToleranceError(f"unitarity defect {defect:.2e} above {UNITARITY_TOL}")
        out.append(Propagator(state.copy(), eta, t0, current, counters["steps"], counters["rejected"], defect))
    logger.debug(f"Propagated {t0} → {current} with η={eta}: {counters['steps']} steps, {counters['rejected']} rejected")
    return out


def propagate(
    hfun: Hamiltonian,
    eta: float,
    t0: float,
    t1: float,
    tol: float = DEFAULT_TOL,
    initial: Optional[np.ndarray] = None,
    static: bool = False,
    step_cap: float = DEFAULT_STEP_CAP,
) -> Propagator:
    """Solve iη U' = H(t) U from t0 to t1."""
    return propagate_many(hfun, eta, [t0, t1], tol, initial, static, step_cap)[-1]


def heisenberg(U: Propagator, A) -> FockOperator:
    """U† A U."""
    matrix = U.U.conj().T @ _dense(A) @ U.U
    if isinstance(A, FockOperator):
        return FockOperator(matrix, A.support, A.parity, A.hermitian)
    return FockOperator.from_matrix(matrix)


def propagate_fixed(hfun: Hamiltonian, eta: float, t0: float, t1: float, steps: int, initial: Optional[np.ndarray] = None) -> np.ndarray:
    """Fixed-step integration, used to measure the order of the scheme."""
    if steps < 1:
        raise ConfigError(f"need at least one step, got {steps}")
    h = (t1 - t0) / steps
    state = None if initial is None else np.array(initial, dtype=complex)
    for j in range(steps):
        if state is None:
            state = np.eye(_dense(hfun(t0)).shape[0], dtype=complex)
        state = cf4_step(hfun, eta, t0 + j * h, h, state)
    return state


def convergence_ratio(hfun: Hamiltonian, eta: float, t0: float, t1: float, steps: int = 8) -> float:
    """err(steps)/err(2·steps) against a 16·steps reference; ≈ 16 for a fourth-order scheme."""
    reference = propagate_fixed(hfun, eta, t0, t1, 16 * steps)
    coarse = np.linalg.norm(propagate_fixed(hfun, eta, t0, t1, steps) - reference, 2)
    fine = np.linalg.norm(propagate_fixed(hfun, eta, t0, t1, 2 * steps) - reference, 2)
    return float(coarse / fine) if fine > 0 else float("inf")
