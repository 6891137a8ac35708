"""
Thermodynamic-limit runs: ground-state expectations over growing boxes,
Cauchy deficits of Φ_{H₀} and finite-volume dynamics comparisons.
"""

import logging
from typing import List, Optional

import numpy as np

from ..core.evolve import dynamics_comparison
from ..core.interaction import cauchy_deficit
from ..errors import ConfigError
from ..models.model import build_observable
from .context import RunContext

logger = logging.getLogger(__name__)


async def run_tdl(
    ctx: RunContext,
    M: int,
    observables: Optional[List[str]] = None,
    eta: float = 1.0,
    tau: float = 1.0,
    t: Optional[float] = None,
):
    """ω_k(A) = tr(P_*^{Λk} A)/κ over the configured boxes, plus deficits and comparisons.

    The dynamics comparisons run from t to t + η·tau on consecutive (k, l)
    pairs with M ≤ k.
    """
    config = ctx.config
    ks = sorted(config.ks)
    if len(ks) < 3:
        raise ConfigError("tdl needs at least three box sizes", "/lattice/k")
    if M > ks[0]:
        raise ConfigError(f"M={M} must not exceed the smallest box k={ks[0]}")
    t = config.t0 if t is None else t
    names = observables or sorted(config.observables)
    await ctx.verify_gap(ks, [t])
    model = ctx.model
    table = ctx.table("tdl")

    for name in names:
        values = []
        for k in ks:
            system = model.at(k)
            patch = system.patch(t)[1]
            value = patch.expectation(system.observable(name).dense()).real
            values.append(value)
            table.add_metric({"k": k, "observable": name, "t": t}, "omega", value)
        differences = [abs(b - a) for a, b in zip(values, values[1:])]
        for k, diff in zip(ks, differences):
            table.add_metric({"k": k, "observable": name, "t": t}, "omega_difference", diff)
        monotone = all(b <= a + 1e-14 for a, b in zip(differences, differences[1:]))
        table.add_metric({"observable": name}, "monotone_decrease", int(monotone))
        if not monotone:
            await ctx.run_logger.log_event("tdl", f"{name}: successive differences are not decreasing", "warning")

    grid = config.time_grid
    for k, l in zip(ks, ks[1:]):
        if k < M:
            continue
        deficit = cauchy_deficit(model.phi0, k, l, M, model.zeta, 0, grid=grid)
        table.add_metric({"k": k, "l": l, "M": M}, "cauchy_deficit", deficit)

    def compare(k, l, name):
        spec = config.observables[name]
        builder = lambda space: build_observable(spec, space, name)
        return k, l, name, dynamics_comparison(model.phi0, model.potential, k, l, M, builder, eta, t + eta * tau, model.zeta, s=t)

    pairs = [(k, l, name) for k, l in zip(ks, ks[1:]) if k >= M for name in names]
    for k, l, name, result in await ctx.map(compare, pairs):
        params = {"k": k, "l": l, "M": M, "observable": name, "eta": eta, "tau": tau}
        table.add_metric(params, "difference_i", result.difference_i)
        table.add_metric(params, "bound_i", result.bound_i)
        table.add_metric(params, "difference_ii", result.difference_ii)
        table.add_metric(params, "bound_ii", result.bound_ii)
        table.add_metric(params, "premise_k", result.premise_k if result.premise_k is not None else np.nan)
    ctx.report.add_table("Límite termodinámico", table.rows)
    return table
