"""
The gap filter W_{g,g̃} and the inverse Liouvillian I_H.

Fourier convention: Ŵ(ω) = (2π)^{-1/2} ∫ W(s) e^{iωs} ds. With
Ŵ = χ·(−i/(√(2π) ω)) the eigenbasis kernel of
I_H(A) = ∫ W(s) e^{isH} A e^{−isH} ds is c(E_m − E_n), c(ω) = −iχ(ω)/ω,
so that P·I([H, A])·Q = −i·PAQ and i[H, I(A)] = A on the off-diagonal
blocks. K = I_H(Ḣ) is then Kato's generator, iṖ = [K, P].
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import sici

from ..errors import ConfigError, ShapeMismatch, ToleranceError
from .envelopes import smooth_step
from .fock import FockOperator, FockSpace, operator_norm, require_even
from .interaction import OperatorFamily
from .lattice import Box, Site, SiteSet
from .locality import conditional_expectation
from .spectral import EigenSystem

logger = logging.getLogger(__name__)

SQRT_2PI = np.sqrt(2.0 * np.pi)
DEFAULT_TOLERANCE = 1e-8
MAX_TRUNCATION = 4000.0


class WeightFunction:
    """W_{g,g̃}: odd, real, Ŵ = −i/(√(2π)ω) for |ω| ≥ g and 0 on [−g̃, g̃]."""

    def __init__(self, g: float, g_tilde: float):
        if not 0 < g_tilde < g:
            raise ConfigError(f"weight function needs 0 < g_tilde < g, got g={g}, g_tilde={g_tilde}")
        self.g = float(g)
        self.g_tilde = float(g_tilde)

    def __repr__(self) -> str:
        return f"WeightFunction(g={self.g}, g_tilde={self.g_tilde})"

    def chi(self, omega) -> np.ndarray:
        omega = np.abs(np.asarray(omega, dtype=float))
        return smooth_step((omega - self.g_tilde) / (self.g - self.g_tilde))

    def kernel(self, omega) -> np.ndarray:
        """c(ω) = ∫ W(s) e^{isω} ds = −iχ(ω)/ω, with c(0) = 0."""
        omega = np.asarray(omega, dtype=float)
        safe = np.where(omega == 0, 1.0, omega)
        return np.where(omega == 0, 0.0, -1j * self.chi(omega) / safe)

    def what(self, omega) -> np.ndarray:
        return self.kernel(omega) / SQRT_2PI

    def __call__(self, s) -> np.ndarray:
        """W(s) = −sgn(s)/2 + [Si(g̃s) + ∫_{g̃}^{g} (1−χ(ω)) sin(ωs)/ω dω]/π."""
        s = np.asarray(s, dtype=float)
        flat = s.ravel()
        span = self.g - self.g_tilde
        n_nodes = 64 + int(np.ceil(span * (np.max(np.abs(flat)) if flat.size else 0.0)))
        x, wts = leggauss(n_nodes)
        omega = self.g_tilde + 0.5 * span * (x + 1.0)
        weights = 0.5 * span * wts * (1.0 - self.chi(omega)) / omega
        transition = np.sin(np.outer(flat, omega)) @ weights
        si, _ = sici(self.g_tilde * flat)
        out = -0.5 * np.sign(flat) + (si + transition) / np.pi
        return out.reshape(s.shape)

    def tail(self, T: float, factor: float = 8.0, nodes_per_unit: float = 4.0) -> float:
        """∫_{|s|>T} |W(s)| ds, integrated out to factor·T."""
        length = (factor - 1.0) * T
        n = 64 + int(np.ceil(nodes_per_unit * self.g * length))
        x, wts = leggauss(n)
        s = T + 0.5 * length * (x + 1.0)
        return float(2.0 * 0.5 * length * np.sum(wts * np.abs(self(s))))

    def default_truncation(self) -> float:
        return 20.0 / (self.g - self.g_tilde)


def build_weight(g: float, g_tilde: float) -> WeightFunction:
    return WeightFunction(g, g_tilde)


def _as_matrix(A) -> np.ndarray:
    return A.dense() if isinstance(A, FockOperator) else np.asarray(A)


def inverse_matrix(es: EigenSystem, matrix: np.ndarray, w: WeightFunction) -> np.ndarray:
    """I_H on a plain matrix, H given by its eigensystem."""
    if matrix.shape != (es.dim, es.dim):
        raise ShapeMismatch(f"operator of shape {matrix.shape} does not match H of dimension {es.dim}")
    ev = es.eigenvalues
    kernel = w.kernel(ev[:, None] - ev[None, :])
    return es.from_eigenbasis(es.to_eigenbasis(matrix) * kernel)


def inv_liouvillian_spectral(es: EigenSystem, A, w: WeightFunction) -> FockOperator:
    """I_H(A) with matrix elements A_mn · c(E_m − E_n) in the eigenbasis."""
    out = inverse_matrix(es, _as_matrix(A), w)
    if isinstance(A, FockOperator):
        return FockOperator.from_matrix(out, A.support, hermitian=A.hermitian or None)
    return FockOperator.from_matrix(out)


@dataclass
class TimeQuadrature:
    operator: FockOperator
    tail: float
    quadrature_error: float
    T: float
    nodes: int

    @property
    def budget(self) -> float:
        return self.tail + self.quadrature_error


def _time_nodes(w: WeightFunction, es: EigenSystem, T: float, nodes: Optional[int]) -> int:
    if nodes is not None:
        return nodes
    omega_max = float(es.eigenvalues[-1] - es.eigenvalues[0]) if es.dim else 0.0
    return 64 + int(np.ceil(0.75 * (omega_max + w.g) * T))


def _time_kernel(w: WeightFunction, ev: np.ndarray, T: float, n: int) -> np.ndarray:
    """2i Σ_q w_q W(s_q) sin(s_q ω_mn) on [0, T]."""
    x, wts = leggauss(n)
    s = 0.5 * T * (x + 1.0)
    weights = 0.5 * T * wts * w(s)
    omega = ev[:, None] - ev[None, :]
    out = np.zeros(omega.shape, dtype=complex)
    for sq, wq in zip(s, weights):
        out += wq * np.sin(sq * omega)
    return 2j * out


def inv_liouvillian_time(
    es: EigenSystem,
    A,
    w: WeightFunction,
    T: Optional[float] = None,
    nodes: Optional[int] = None,
    tolerance: float = DEFAULT_TOLERANCE,
) -> TimeQuadrature:
    """Gauss-Legendre evaluation of ∫_{−T}^{T} W(s) e^{isH} A e^{−isH} ds.

    W is odd, so the integral is folded onto [0, T]. When T is not given it
    grows until the tail bound 2‖A‖∫_{|s|>T}|W| drops below `tolerance`.
    """
    matrix = _as_matrix(A)
    norm_a = operator_norm(matrix)
    fixed = T is not None
    T = T if fixed else w.default_truncation()
    while True:
        tail = 2.0 * norm_a * w.tail(T)
        if tail <= tolerance or fixed or T >= MAX_TRUNCATION:
            break
        T *= 1.5
    if tail > tolerance:
        raise ToleranceError(f"tail bound {tail:.3e} at T={T:.1f} exceeds the tolerance {tolerance:.1e}")

    n = _time_nodes(w, es, T, nodes)
    rotated = es.to_eigenbasis(matrix)
    coarse = rotated * _time_kernel(w, es.eigenvalues, T, n)
    fine = rotated * _time_kernel(w, es.eigenvalues, T, 2 * n)
    quadrature_error = operator_norm(fine - coarse)
    out = es.from_eigenbasis(fine)
    support = A.support if isinstance(A, FockOperator) else ()
    logger.debug(f"Time-path inverse: T={T:.1f}, nodes={2 * n}, tail={tail:.2e}, quad={quadrature_error:.2e}")
    return TimeQuadrature(FockOperator.from_matrix(out, support), tail, quadrature_error, T, 2 * n)


def fattening_sequence(box: Box, Y: Iterable[Site]) -> List[SiteSet]:
    """Y_0 = Y, Y_m = Y fattened by m inside the box, up to saturation."""
    Y = SiteSet(tuple(y) for y in Y)
    if not box.contains_all(Y):
        raise ShapeMismatch(f"region {sorted(Y)} is not inside {box}")
    sequence = [Y]
    while len(sequence[-1]) < len(box):
        sequence.append(box.fatten(Y, len(sequence)))
    return sequence


def local_decomposition(
    es: EigenSystem,
    A: FockOperator,
    Y: Iterable[Site],
    w: WeightFunction,
    space: FockSpace,
    box: Box,
    method: str = "spectral",
    tolerance: float = DEFAULT_TOLERANCE,
) -> List[FockOperator]:
    """Δ_0 = E_{Y_0}(I(A)), Δ_m = (E_{Y_m} − E_{Y_{m−1}})(I(A)).

    "spectral" uses that E_{Y_m} is linear and bounded and so commutes with
    the s-integral; "time" applies E_{Y_m} at every quadrature node.
    """
    require_even(A, "local decomposition input")
    regions = fattening_sequence(box, Y)
    if method == "spectral":
        total = inv_liouvillian_spectral(es, A, w)
        layers = [conditional_expectation(total, Ym, space).dense() for Ym in regions]
    elif method == "time":
        layers = _time_layers(es, A, w, space, regions, tolerance)
    else:
        raise ConfigError(f"unknown decomposition method {method!r}")
    out = []
    previous = np.zeros_like(layers[0])
    for Ym, layer in zip(regions, layers):
        out.append(FockOperator(layer - previous, Ym, "even", A.hermitian))
        previous = layer
    return out


def _time_layers(es, A, w, space, regions, tolerance) -> List[np.ndarray]:
    norm_a = A.norm()
    T = w.default_truncation()
    while 2.0 * norm_a * w.tail(T) > tolerance and T < MAX_TRUNCATION:
        T *= 1.5
    n = _time_nodes(w, es, T, None)
    x, wts = leggauss(n)
    s_nodes = 0.5 * T * (x + 1.0)
    weights = 0.5 * T * wts * w(s_nodes)
    rotated = es.to_eigenbasis(A.dense())
    ev = es.eigenvalues
    layers = [np.zeros((es.dim, es.dim), dtype=complex) for _ in regions]
    for s, weight in zip(s_nodes, weights):
        phase = np.exp(1j * s * ev)
        forward = es.from_eigenbasis(phase[:, None] * rotated * phase.conj()[None, :])
        backward = es.from_eigenbasis(phase.conj()[:, None] * rotated * phase[None, :])
        evolved = FockOperator(forward - backward, A.support, "even", False)
        for m, Ym in enumerate(regions):
            layers[m] += weight * conditional_expectation(evolved, Ym, space).dense()
    return layers


def interaction_of_inverse(phi_b, k: int, es: EigenSystem, w: WeightFunction, t: float = 0.0, method: str = "spectral") -> OperatorFamily:
    """Φ_{I(B)}(Z) = Σ_m Σ_{Y: Y_m = Z} Δ_m(Φ_B(Y)) on Λ_k."""
    box = phi_b.box(k)
    space = phi_b.space if isinstance(phi_b, OperatorFamily) else FockSpace.for_box(box, phi_b.r)
    terms: Dict[SiteSet, np.ndarray] = {}
    for Y, term in phi_b.terms(k, t, space=space).items():
        for delta in local_decomposition(es, term, Y, w, space, box, method):
            if np.max(np.abs(delta.matrix), initial=0.0) < 1e-14:
                continue
            Z = delta.support
            terms[Z] = terms[Z] + delta.matrix if Z in terms else delta.matrix
    ops = {Z: FockOperator(m, Z, "even", True) for Z, m in terms.items()}
    return OperatorFamily(box, space, ops, f"I({phi_b.name})")


def weight_tables(w: WeightFunction, s_max: float = 40.0, s_points: int = 401, omega_points: int = 401) -> Tuple[List[dict], List[dict]]:
    """Rows (s, W) and (ω, Re Ŵ, Im Ŵ) for plotting."""
    s = np.linspace(-s_max, s_max, s_points)
    omega = np.linspace(-2.0 * w.g, 2.0 * w.g, omega_points)
    values = w(s)
    what = w.what(omega)
    time_rows = [{"s": float(a), "W": float(b)} for a, b in zip(s, values)]
    freq_rows = [{"omega": float(a), "re_what": float(b.real), "im_what": float(b.imag)} for a, b in zip(omega, what)]
    return time_rows, freq_rows
