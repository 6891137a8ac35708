"""
Exact diagonalization and gapped spectral patches.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, Optional, Tuple

import numpy as np
import scipy.linalg

from ..errors import ConfigError, GapContinuityError, MultiplicityExceeded, NoGap, NotHermitian, ToleranceError
from ..settings import get_settings
from .fock import FockOperator

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class EigenSystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues))) if self.dim else 0.0

    def to_eigenbasis(self, matrix: np.ndarray) -> np.ndarray:
        return self.eigenvectors.conj().T @ matrix @ self.eigenvectors

    def from_eigenbasis(self, matrix: np.ndarray) -> np.ndarray:
        return self.eigenvectors @ matrix @ self.eigenvectors.conj().T


def diagonalize(H: FockOperator) -> EigenSystem:
    """Full eigendecomposition of a Hermitian operator."""
    if not H.hermitian:
        raise NotHermitian("diagonalize needs a Hermitian operator")
    matrix = H.dense()
    eigenvalues, eigenvectors = scipy.linalg.eigh(matrix)
    residual = float(np.max(np.linalg.norm(matrix @ eigenvectors - eigenvectors * eigenvalues, axis=0))) if len(eigenvalues) else 0.0
    scale = float(np.max(np.abs(eigenvalues))) if len(eigenvalues) else 0.0
    if residual > RESIDUAL_TOL * max(scale, 1.0):
        raise ToleranceError(f"eigen-residual {residual:.3e} above {RESIDUAL_TOL}·‖H‖")
    return EigenSystem(eigenvalues, eigenvectors, residual)


@dataclass(frozen=True, eq=False)
class GappedPatch:
    """A spectral island σ_* with its gap data."""

    start: int
    stop: int
    f_minus: float
    f_plus: float
    g: float
    g_tilde: float
    kappa: int
    vectors: np.ndarray

    @property
    def indices(self) -> range:
        return range(self.start, self.stop)

    @cached_property
    def projector_matrix(self) -> np.ndarray:
        return self.vectors @ self.vectors.conj().T

    @cached_property
    def projection(self) -> FockOperator:
        return FockOperator.from_matrix(self.projector_matrix, hermitian=True)

    def state(self) -> np.ndarray:
        """P_*/κ as a density matrix."""
        return self.projector_matrix / self.kappa

    def expectation(self, A: np.ndarray) -> complex:
        """tr(P_* A)/κ."""
        return complex(np.trace(self.vectors.conj().T @ A @ self.vectors)) / self.kappa


def _patch(es: EigenSystem, start: int, stop: int, separation: float, g_tilde: float) -> GappedPatch:
    ev = es.eigenvalues
    spread = ev[stop - 1] - ev[start]
    pad = max((g_tilde - spread) / 2.0, 0.0)
    return GappedPatch(
        start=start,
        stop=stop,
        f_minus=float(ev[start] - pad),
        f_plus=float(ev[stop - 1] + pad),
        g=float(separation),
        g_tilde=g_tilde,
        kappa=stop - start,
        vectors=es.eigenvectors[:, start:stop],
    )


def find_gapped_patch(
    es: EigenSystem,
    g_min: float,
    g_tilde: float,
    mode: str = "bottom",
    window: Optional[Tuple[float, float]] = None,
    kappa_max: Optional[int] = None,
) -> GappedPatch:
    """Locate σ_* in a sorted spectrum.

    Args:
        es: eigen-system of H.
        g_min: required distance between σ_* and the rest of the spectrum.
        g_tilde: bound on the width of σ_*.
        mode: "bottom" (smallest initial cluster) or "window".
        window: (f_minus, f_plus) for window mode.
        kappa_max: multiplicity bound, defaults to the configured one.
    """
    if not g_min > g_tilde > 0:
        raise ConfigError(f"need g > g_tilde > 0, got g={g_min}, g_tilde={g_tilde}")
    kappa_max = kappa_max if kappa_max is not None else get_settings().kappa_max
    ev = es.eigenvalues
    dim = len(ev)

    if mode == "bottom":
        found = None
        for kappa in range(1, dim + 1):
            spread = ev[kappa - 1] - ev[0]
            if spread > g_tilde:
                break
            separation = ev[kappa] - ev[kappa - 1] if kappa < dim else np.inf
            if separation <= DEGENERACY_TOL:
                continue
            if separation >= g_min:
                found = _patch(es, 0, kappa, separation, g_tilde)
                break
        if found is None:
            raise NoGap(f"no initial cluster of width <= {g_tilde} is separated by >= {g_min}")
    elif mode == "window":
        if window is None:
            raise ConfigError("window mode needs (f_minus, f_plus)")
        lo, hi = window
        if hi - lo > g_tilde:
            raise ConfigError(f"window width {hi - lo} exceeds g_tilde={g_tilde}")
        inside = np.nonzero((ev >= lo) & (ev <= hi))[0]
        if inside.size == 0:
            raise NoGap(f"no eigenvalue in the window [{lo}, {hi}]")
        start, stop = int(inside[0]), int(inside[-1]) + 1
        below = ev[start] - ev[start - 1] if start > 0 else np.inf
        above = ev[stop] - ev[stop - 1] if stop < dim else np.inf
        separation = min(below, above)
        if separation < g_min:
            raise NoGap(f"window patch is only {separation:.3e} away from the rest of the spectrum")
        found = _patch(es, start, stop, separation, g_tilde)
        found = GappedPatch(found.start, found.stop, lo, hi, found.g, g_tilde, found.kappa, found.vectors)
    else:
        raise ConfigError(f"unknown patch mode {mode!r}")

    if found.kappa > kappa_max:
        raise MultiplicityExceeded(f"patch multiplicity {found.kappa} exceeds kappa_max={kappa_max}")
    logger.debug(f"Gapped patch: kappa={found.kappa}, gap={found.g:.4f}, f=[{found.f_minus:.4f}, {found.f_plus:.4f}]")
    return found


def spectrum_rows(k: int, t: float, es: EigenSystem, patch: Optional[GappedPatch] = None) -> List[dict]:
    """Rows (k, t, index, eigenvalue, in_patch) for the spectrum CSV."""
    inside = set(patch.indices) if patch is not None else set()
    return [
        {"k": k, "t": t, "index": i, "eigenvalue": float(value), "in_patch": i in inside}
        for i, value in enumerate(es.eigenvalues)
    ]


def track_patches(points: Iterable[Tuple[int, float, GappedPatch]]) -> List[Tuple[int, float, GappedPatch]]:
    """Check that κ is constant along each box's time grid.

    `points` are (k, t, patch) triples; grids are taken in increasing t per k.
    """
    ordered = sorted(points, key=lambda item: (item[0], item[1]))
    for (k0, t0, p0), (k1, t1, p1) in zip(ordered, ordered[1:]):
        if k0 == k1 and p0.kappa != p1.kappa:
            raise GapContinuityError(f"κ jumps from {p0.kappa} to {p1.kappa} between t={t0} and t={t1} on Λ_{k0}")
    return ordered
