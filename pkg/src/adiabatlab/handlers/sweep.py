"""
Adiabatic scaling sweeps: tracking errors over (ε, η) grids, the
first-order check and the resummed generator.
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..core.evolve import TrackingResult, calibrate_constant, check_tracking, loglog_slope, tracking_error
from ..core.sapt import ResummedGenerator, check_first_order, construct_sapt, resummed_s, s_n
from ..errors import BoundViolation, ConfigError
from ..services import plots
from .context import RunContext

logger = logging.getLogger(__name__)

PLATEAU_FACTOR = 10.0


def _pre_plateau(eps: Sequence[float], errors: Sequence[float], floor: float):
    """Points whose error is well above the η-only error."""
    keep = [(e, err) for e, err in zip(eps, errors) if e > 0 and err > PLATEAU_FACTOR * floor]
    return [e for e, _ in keep], [err for _, err in keep]


async def _tracking_grid(ctx: RunContext, k: int, n: int, eps_grid, eta_grid, names: List[str], t0: float, t: float) -> List[tuple]:
    system = ctx.model.at(k)
    coeffs = construct_sapt(system, n, ctx.model.weight)
    # fill the coefficient caches before the grid fans out
    coeffs.at(t0)
    coeffs.at(t)
    observables = system.observables(names)

    def run(eps, eta, name):
        return name, tracking_error(system, n, eps, eta, observables[name], t0, t, coeffs=coeffs)

    items = [(eps, eta, name) for eta in eta_grid for eps in eps_grid for name in names]
    return await ctx.map(run, items)


async def run_adiabatic_sweep(
    ctx: RunContext,
    n: int,
    eps_grid: Sequence[float],
    eta_grid: Sequence[float],
    observables: Optional[List[str]] = None,
    k: Optional[int] = None,
    calibrate_k: Optional[int] = None,
    slope_margin: float = 0.7,
):
    """Tracking errors of Π_n over the (ε, η) grid at the end of the time interval.

    Emits the raw errors, log-log slopes in ε (per η, pre-plateau points)
    and in η (at ε = 0), and the calibrated bound with its flags. The
    constant C_n is calibrated on Λ_{calibrate_k} when given, otherwise on
    the swept box itself.
    """
    config = ctx.config
    k = k or max(config.ks)
    names = observables or [name for name in sorted(config.observables) if config.observables[name]["type"] != "identity"]
    if not names:
        raise ConfigError("sweep needs at least one observable", "/observables")
    t0, t = config.t0, config.t1
    ks = sorted({k} | ({calibrate_k} if calibrate_k else set()))
    await ctx.verify_gap(ks, config.time_grid)

    table = ctx.table("sweep")
    results = await _tracking_grid(ctx, k, n, eps_grid, eta_grid, names, t0, t)
    for name, r in results:
        table.add_metric({"k": k, "n": n, "eps": r.eps, "eta": r.eta, "t": r.t, "observable": name}, "tracking_error", r.error)

    d = ctx.model.d
    if calibrate_k and calibrate_k != k:
        reference = await _tracking_grid(ctx, calibrate_k, n, eps_grid, eta_grid, names, t0, t)
        constant = calibrate_constant([r for _, r in reference], d)
    else:
        constant = calibrate_constant([r for _, r in results], d)
    table.add_metric({"k": calibrate_k or k, "n": n}, "calibrated_constant", constant)

    checked, violated = check_tracking([r for _, r in results], constant, d)
    for (name, r), row in zip(results, checked):
        params = {"k": k, "n": n, "eps": r.eps, "eta": r.eta, "observable": name}
        table.add_metric(params, "tracking_bound", row["bound"])
        table.add_metric(params, "within_bound", int(row["within_bound"]))

    series: Dict[str, tuple] = {}
    for name in names:
        floor = {r.eta: r.error for nm, r in results if nm == name and r.eps == 0}
        for eta in eta_grid:
            runs = sorted((r.eps, r.error) for nm, r in results if nm == name and r.eta == eta)
            eps, errors = _pre_plateau([e for e, _ in runs], [err for _, err in runs], floor.get(eta, 0.0))
            if len(eps) >= 2:
                slope = loglog_slope(eps, errors)
                table.add_metric({"k": k, "n": n, "eta": eta, "observable": name}, "slope_eps", slope)
                await ctx.run_logger.log_slope(f"{name} ε-slope at η={eta:g}", slope, n + slope_margin)
            series[f"{name}, η={eta:g}"] = ([e for e, _ in runs], [err for _, err in runs])
        zero = sorted((r.eta, r.error) for nm, r in results if nm == name and r.eps == 0)
        positive = [(eta, err) for eta, err in zero if err > 0]
        if len(positive) >= 2:
            slope = loglog_slope([e for e, _ in positive], [err for _, err in positive])
            table.add_metric({"k": k, "n": n, "eps": 0.0, "observable": name}, "slope_eta", slope)
            await ctx.run_logger.log_slope(f"{name} η-slope at ε=0", slope)

    if ctx.plots:
        plots.loglog_plot(ctx.out_dir / "sweep_eps.svg", series, "ε", "tracking error", f"{config.name}, n={n}")
    ctx.report.add_table("Barrido adiabático", table.rows)
    if violated is not None:
        await ctx.run_logger.log_event("bound", str(violated), "critical")
        raise violated
    return table


async def run_first_order(ctx: RunContext, k: Optional[int] = None, tol: float = 1e-9):
    """A₁ against I((η/ε)I(Ḣ₀) − V) on every point of the time grid."""
    config = ctx.config
    k = k or max(config.ks)
    await ctx.verify_gap([k], config.time_grid)
    system = ctx.model.at(k)
    coeffs = construct_sapt(system, 1, ctx.model.weight)
    table = ctx.table("first_order")
    for t in config.time_grid:
        deviation = check_first_order(coeffs, t, tol)
        table.add_metric({"k": k, "t": t}, "first_order_deviation", deviation)
    ctx.table("sapt_coefficients").extend(coeffs.summary_rows(config.time_grid))
    ctx.report.add_table("Primer orden", table.rows)
    return table


async def run_resummation(ctx: RunContext, n: int, eps_grid: Sequence[float], eta_grid: Sequence[float], k: Optional[int] = None):
    """‖εS − εS_n‖ against C_n max(ε, η)^n on the (ε, η) grid."""
    config = ctx.config
    k = k or min(config.ks)
    grid = config.time_grid
    await ctx.verify_gap([k], grid)
    system = ctx.model.at(k)
    coeffs = construct_sapt(system, n, ctx.model.weight)
    generator = ResummedGenerator(coeffs, grid)
    constant = generator.constant(n)
    table = ctx.table("resummation")
    for j, (delta, norm) in enumerate(zip(generator.deltas, generator.norms), start=1):
        table.add_metric({"k": k, "j": j}, "delta", delta)
        table.add_metric({"k": k, "j": j}, "max_norm", norm)
    table.add_metric({"k": k, "n": n}, "resummation_constant", constant)
    for eps in eps_grid:
        for eta in eta_grid:
            gap = max(float(np.linalg.norm(resummed_s(generator, eps, eta, t) - s_n(coeffs, eps, eta, t), 2)) for t in grid)
            bound = constant * max(eps, eta) ** n
            table.add_metric({"k": k, "n": n, "eps": eps, "eta": eta}, "resummation_gap", gap)
            table.add_metric({"k": k, "n": n, "eps": eps, "eta": eta}, "resummation_bound", bound)
            if gap > bound + 1e-12:
                raise BoundViolation(f"resummed generator is {gap:.3e} from S_{n}, above {bound:.3e} at ε={eps}, η={eta}")
    ctx.report.add_table("Resumación", table.rows)
    return table
