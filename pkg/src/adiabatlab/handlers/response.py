"""
Response runs: switched-on perturbations, Kubo coefficients and NEASS checks.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from ..core.evolve import loglog_slope, trajectory_rows
from ..core.sapt import construct_sapt, expansion_expectation, kubo_coefficient, neass, s_n, stationarity_defect
from ..errors import BoundViolation, ConfigError
from ..services import plots
from .context import RunContext

logger = logging.getLogger(__name__)

SWITCH_START = -1.0


def _require_static_h0(ctx: RunContext):
    model = ctx.model
    for family in model.phi0.families:
        if family.envelope.name != "constant":
            raise ConfigError(f"response runs need a time-independent H₀; family {family.name} has envelope {family.envelope.name}", "/h0")
    perturbation = [] if model.phi1 is None else [f.envelope for f in model.phi1.families]
    if model.potential is not None:
        perturbation.append(model.potential.envelope)
    if not perturbation:
        raise ConfigError("response runs need a potential or an H₁", "/h1")
    for envelope in perturbation:
        if envelope.name not in ("switch", "constant"):
            raise ConfigError(f"perturbation envelope must be the switch, got {envelope.name}", "/h1")


async def run_response(
    ctx: RunContext,
    n: int,
    eps_grid: Sequence[float],
    observable: str,
    times: Optional[Sequence[float]] = None,
    exponent: float = 0.75,
    k: Optional[int] = None,
):
    """σ_A^{ε,η}(t) for the switched perturbation with η = ε^exponent.

    The state starts as P_*/κ at t = −1 and is evolved under H₀ + εf(t)(V + H₁).
    The residual is sup_t |σ_A(t) − Σ_{j≤n} ε^j σ_{A,j}| over t ≥ 0.
    """
    _require_static_h0(ctx)
    config = ctx.config
    k = k or max(config.ks)
    times = list(times) if times is not None else [0.0, 0.5, 1.0, 1.5, 2.0]
    if min(times) < 0:
        raise ConfigError("response times must be >= 0 (the switch is complete at t = 0)")
    await ctx.verify_gap(config.ks, [SWITCH_START, 0.0])

    system = ctx.model.at(k)
    A = system.observable(observable)
    Am = A.dense()
    coeffs = construct_sapt(system, n, ctx.model.weight)
    patch = system.patch(0.0)[1]
    base = patch.expectation(Am).real
    sigma = [expansion_expectation(coeffs, Am, j, 0.0).real for j in range(1, n + 1)]
    kubo = kubo_coefficient(coeffs, Am, 0.0).real

    table = ctx.table("response")
    for j, value in enumerate(sigma, start=1):
        table.add_metric({"k": k, "observable": observable, "j": j}, "sigma_j", value)
    table.add_metric({"k": k, "observable": observable, "j": 1}, "kubo", kubo)

    def run(eps):
        eta = eps ** exponent if eps > 0 else 1.0
        rows = trajectory_rows(system, eps, eta, [SWITCH_START] + times, {observable: Am})
        return eps, eta, rows[1:]

    residuals = []
    for eps, eta, rows in await ctx.map(run, [(eps,) for eps in eps_grid]):
        worst = 0.0
        for row in rows:
            response = row["value"] - base
            predicted = sum(eps ** j * s for j, s in enumerate(sigma, start=1))
            residual = abs(response - predicted)
            worst = max(worst, residual)
            table.add_metric({"k": k, "observable": observable, "eps": eps, "eta": eta, "t": row["t"]}, "sigma", response)
        table.add_metric({"k": k, "observable": observable, "eps": eps, "eta": eta}, "residual", worst)
        residuals.append((eps, worst))

    positive = [(e, r) for e, r in residuals if e > 0 and r > 0]
    if len(positive) >= 2:
        slope = loglog_slope([e for e, _ in positive], [r for _, r in positive])
        table.add_metric({"k": k, "observable": observable, "n": n}, "slope_residual", slope)
        await ctx.run_logger.log_slope(f"{observable} response residual", slope, n + 0.7)
        if ctx.plots:
            plots.loglog_plot(ctx.out_dir / "response_residual.svg", {observable: tuple(zip(*positive))}, "ε", "residual")

    for other in config.ks:
        if other == k:
            continue
        other_system = ctx.model.at(other)
        other_coeffs = construct_sapt(other_system, 1, ctx.model.weight)
        value = kubo_coefficient(other_coeffs, other_system.observable(observable).dense(), 0.0).real
        table.add_metric({"k": other, "observable": observable, "j": 1}, "kubo", value)
    ctx.report.add_table("Respuesta", table.rows)
    return table


async def run_neass(
    ctx: RunContext,
    n_values: Sequence[int],
    eps_grid: Sequence[float],
    t: Optional[float] = None,
    k: Optional[int] = None,
    slope_margin: float = 0.7,
):
    """‖[H₀ + εV, Π_n]‖ at a time where H^ε does not move.

    Π_n = e^{iεS_n}P_*e^{−iεS_n}/κ; at ε = 0 it must equal P_*/κ.
    """
    config = ctx.config
    k = k or max(config.ks)
    t = config.t0 if t is None else t
    system = ctx.model.at(k)
    if not system.is_stationary(t, max(n_values)):
        raise ConfigError(f"H^ε is not stationary at t={t}; pick a time outside the ramps", "/time/t0")
    await ctx.verify_gap([k], [t])
    table = ctx.table("neass")
    P = system.patch(t)[1].state()
    H0 = system.h0(t)
    V = system.perturbation(t)
    for n in n_values:
        coeffs = construct_sapt(system, n, ctx.model.weight)
        defects = []
        for eps in eps_grid:
            state = neass(P, s_n(coeffs, eps, 0.0, t))
            defect = stationarity_defect(H0 + eps * V, state)
            table.add_metric({"k": k, "n": n, "eps": eps, "t": t}, "stationarity_defect", defect)
            if eps == 0:
                deviation = float(np.max(np.abs(state - P)))
                table.add_metric({"k": k, "n": n, "eps": 0.0, "t": t}, "unperturbed_deviation", deviation)
                if deviation > 1e-10:
                    raise BoundViolation(f"Π_{n} differs from P_*/κ by {deviation:.2e} at ε = 0")
            elif defect > 0:
                defects.append((eps, defect))
        if len(defects) >= 2:
            slope = loglog_slope([e for e, _ in defects], [d for _, d in defects])
            table.add_metric({"k": k, "n": n}, "slope_eps", slope)
            await ctx.run_logger.log_slope(f"NEASS stationarity n={n}", slope, n + slope_margin)
    ctx.report.add_table("NEASS", table.rows)
    return table
