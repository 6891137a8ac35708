"""
Smooth scalar time envelopes with exact derivatives.

Envelopes are sympy expressions in t; derivatives are taken symbolically
and lambdified once per order. The C∞ step is h(x) = B(x)/(B(x)+B(1−x)),
B(x) = exp(−1/x), flat outside [0, 1].
"""

import logging
from typing import Callable, Dict, Optional

import numpy as np
import sympy as sym

from ..errors import ConfigError

logger = logging.getLogger(__name__)

ts = sym.Symbol("t", real=True)

STATIONARY_TOL = 1e-14
# h and all its derivatives up to order ~16 are below 1e-170 closer than this to the plateau
_FLAT_MARGIN = 2e-3


def _step_expr(x):
    b = sym.exp(-1 / x)
    c = sym.exp(-1 / (1 - x))
    return b / (b + c)


class Envelope:
    """A scalar function of time with cached exact derivatives.

    `flat` = (lo, hi, value_lo, value_hi) marks the envelope as constant
    outside [lo, hi]; inside, `expr` is evaluated.
    """

    def __init__(self, name: str, expr: sym.Expr, params: Dict, flat: Optional[tuple] = None):
        self.name = name
        self.expr = expr
        self.params = dict(params)
        self.flat = flat
        self._compiled: Dict[int, Callable] = {}

    def __repr__(self) -> str:
        return f"Envelope({self.name}, {self.params})"

    def _derivative_fn(self, order: int) -> Callable:
        if order not in self._compiled:
            self._compiled[order] = sym.lambdify(ts, sym.diff(self.expr, ts, order), modules="math")
        return self._compiled[order]

    def __call__(self, t: float, derivative: int = 0) -> float:
        if derivative < 0:
            raise ValueError(f"derivative order must be >= 0, got {derivative}")
        if self.flat is not None:
            lo, hi, value_lo, value_hi = self.flat
            width = hi - lo
            if t <= lo + _FLAT_MARGIN * width:
                return float(value_lo) if derivative == 0 else 0.0
            if t >= hi - _FLAT_MARGIN * width:
                return float(value_hi) if derivative == 0 else 0.0
        return float(self._derivative_fn(derivative)(t))

    def is_stationary(self, t: float, order: int) -> bool:
        """All derivatives of order 1..order vanish at t."""
        return all(abs(self(t, j)) <= STATIONARY_TOL for j in range(1, order + 1))

    def to_dict(self) -> Dict:
        return {"name": self.name, **self.params}


def constant(value: float = 1.0) -> Envelope:
    return Envelope("constant", sym.Float(value), {"value": value}, flat=None)


def ramp(t_start: float, t_end: float, start: float = 0.0, end: float = 1.0) -> Envelope:
    """C∞ monotone transition from `start` (t ≤ t_start) to `end` (t ≥ t_end)."""
    if not t_end > t_start:
        raise ConfigError(f"ramp needs t_end > t_start, got {t_start}, {t_end}")
    x = (ts - t_start) / (t_end - t_start)
    expr = start + (end - start) * _step_expr(x)
    params = {"t_start": t_start, "t_end": t_end, "start": start, "end": end}
    return Envelope("ramp", expr, params, flat=(t_start, t_end, start, end))


def switch() -> Envelope:
    """The switching function: 0 for t ≤ −1, 1 for t ≥ 0."""
    env = ramp(-1.0, 0.0, 0.0, 1.0)
    env.name = "switch"
    env.params = {}
    return env


def sine(amplitude: float = 1.0, omega: float = 1.0, phase: float = 0.0, offset: float = 0.0) -> Envelope:
    expr = offset + amplitude * sym.sin(omega * ts + phase)
    params = {"amplitude": amplitude, "omega": omega, "phase": phase, "offset": offset}
    return Envelope("sine", expr, params)


def step_function(x: float, derivative: int = 0) -> float:
    """h^(derivative)(x) for the C∞ step on [0, 1]."""
    return _STEP(x, derivative)


_STEP = Envelope("step", _step_expr(ts), {}, flat=(0.0, 1.0, 0.0, 1.0))

_BUILDERS = {
    "constant": constant,
    "ramp": ramp,
    "switch": switch,
    "sine": sine,
}


def build_envelope(spec: Optional[Dict], pointer: str = "/envelope") -> Envelope:
    """Build an envelope from its JSON description; None means constant 1."""
    if spec is None:
        return constant(1.0)
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError("envelope must be an object with a 'name'", pointer)
    params = {key: value for key, value in spec.items() if key != "name"}
    builder = _BUILDERS.get(spec["name"])
    if builder is None:
        raise ConfigError(f"unknown envelope {spec['name']!r}; use one of {sorted(_BUILDERS)}", pointer + "/name")
    try:
        return builder(**params)
    except TypeError as e:
        raise ConfigError(f"bad envelope parameters: {e}", pointer) from None


def smooth_step(x):
    """Vectorised C∞ step h(x) on arrays: 0 for x ≤ 0, 1 for x ≥ 1."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    safe = np.where(inside, x, 0.5)
    b = np.exp(-1.0 / safe)
    c = np.exp(-1.0 / (1.0 - safe))
    return np.where(inside, b / (b + c), np.where(x >= 1, 1.0, 0.0))
