"""
Bound checks that need no driving: gap tables, Lieb-Robinson light cones,
interaction norms, the extension bound and the weight function W_{g,g̃}.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from ..core.evolve import lr_light_cone
from ..core.fock import FockOperator, FockSpace, even_part
from ..core.interaction import (
    bulk_norm,
    f_gamma_norm,
    interaction_norm,
    lipschitz_constant,
    lr_constant,
)
from ..core.invliou import weight_tables
from ..core.locality import extension_bound, f_norm
from ..errors import BoundViolation
from ..models.model import build_observable
from ..monitors.gap import GapMonitor
from ..services import plots
from .context import RunContext

logger = logging.getLogger(__name__)

WEIGHT_TOL = 1e-10
EXTENSION_SAMPLES = 3
LIGHT_CONE_MARGIN = 0.8
LIGHT_CONE_TOL = 1e-6


async def run_check_gap(ctx: RunContext, spectrum: bool = False):
    """g(t), κ(t) and the patch edges on every (k, t) of the model grid."""
    config = ctx.config
    rows = await ctx.verify_gap(config.ks, config.time_grid)
    table = ctx.table("check_gap")
    for row in rows:
        params = {"k": row["k"], "t": row["t"]}
        table.add_metric(params, "g", row["g"])
        table.add_metric(params, "kappa", row["kappa"])
        table.add_metric(params, "f_minus", row["f_minus"])
        table.add_metric(params, "f_plus", row["f_plus"])
    if spectrum:
        monitor = GapMonitor(ctx.model)
        levels = ctx.table("spectrum")
        for k in config.ks:
            for t in config.time_grid:
                levels.extend(monitor.spectrum(k, t))
    ctx.report.add_table("Gap", table.rows)
    return table


async def run_lr(ctx: RunContext, k: Optional[int] = None, eta: float = 1.0, times: Optional[Sequence[float]] = None):
    """‖[𝔘_{t,s}(n_x), n_y]‖ for x at the left edge and every other site y."""
    config = ctx.config
    model = ctx.model
    k = k or min(config.ks)
    times = list(times) if times is not None else [config.t0 + 0.25 * j for j in range(1, 9)]
    s = config.t0
    await ctx.verify_gap([k], [s])
    system = model.at(k)
    origin = tuple([-k] * system.d)
    A = build_observable({"type": "density", "site": list(origin)}, system.space, "lr_a")
    others = [x for x in system.box.sites if x != origin]
    Bs = [build_observable({"type": "density", "site": list(y)}, system.space, "lr_b") for y in others]

    def run():
        return lr_light_cone(system, A, Bs, eta, times, model.zeta, model.phi0, s=s)

    try:
        (data,) = await ctx.map(run, [()])
    except BoundViolation as e:
        await ctx.run_logger.log_event("bound", str(e), "critical")
        raise

    table = ctx.table("lr")
    for y, lr in zip(others, data):
        for row in lr.rows:
            params = {"k": k, "eta": eta, "t": row.t, "site": str(list(y)), "distance": lr.distance}
            table.add_metric(params, "lhs", row.lhs)
            table.add_metric(params, "rhs", row.rhs)
            table.add_metric(params, "rhs_general", row.rhs_general)
            if row.rhs_exp is not None:
                table.add_metric(params, "rhs_exp", row.rhs_exp)
    velocity = data[0].velocity if data else None
    if velocity is not None:
        table.add_metric({"k": k}, "velocity", velocity)
        # inside 0.8·dist the commutator should be negligible
        leaks = [
            (lr.distance, row.t, row.lhs)
            for lr in data
            for row in lr.rows
            if velocity * abs(row.t - s) / eta <= LIGHT_CONE_MARGIN * lr.distance and row.lhs > LIGHT_CONE_TOL
        ]
        table.add_metric({"k": k}, "light_cone_leaks", len(leaks))
        if leaks:
            distance, t, lhs = max(leaks, key=lambda leak: leak[2])
            await ctx.run_logger.log_event("lr", f"commutator {lhs:.2e} outside the light cone at distance {distance}, t={t:g}", "warning")

    if ctx.plots:
        distances = sorted({lr.distance for lr in data})
        grid = np.zeros((len(times), len(distances)))
        for lr in data:
            column = distances.index(lr.distance)
            for i, row in enumerate(lr.rows):
                grid[i, column] = max(grid[i, column], row.lhs)
        plots.light_cone_plot(ctx.out_dir / "lr_light_cone.svg", [r.t for r in data[0].rows], distances, grid, velocity)
    ctx.report.add_table("Lieb-Robinson", table.rows)
    return table


def _random_even_hermitian(rng: np.random.Generator, space: FockSpace) -> FockOperator:
    raw = rng.normal(size=(space.dim, space.dim)) + 1j * rng.normal(size=(space.dim, space.dim))
    matrix = 0.5 * (raw + raw.conj().T)
    op = FockOperator.from_matrix(matrix, space.site_set, hermitian=True)
    return even_part(op)


def _random_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    raw = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = raw @ raw.conj().T
    return rho / np.trace(rho).real


async def run_norms(ctx: RunContext, n_values: Sequence[int] = (0, 1, 2), samples: int = EXTENSION_SAMPLES):
    """ζ-norms of Φ_{H₀}, LR constants, decay flags and the extension bound on Λ_2."""
    config = ctx.config
    model = ctx.model
    zeta = model.zeta
    grid = config.time_grid
    table = ctx.table("norms")

    for n in n_values:
        norm = max(interaction_norm(model.phi0, zeta, n, t=t) for t in grid)
        bulk = max(bulk_norm(model.phi0, zeta, n, t=t) for t in grid)
        table.add_metric({"n": n}, "interaction_norm", norm)
        table.add_metric({"n": n}, "bulk_norm", bulk)
        if norm > bulk * (1 + 1e-12):
            raise BoundViolation(f"interaction norm {norm:.3e} exceeds the ℓ¹ bulk norm {bulk:.3e} at n={n}")
        if model.phi1 is not None:
            table.add_metric({"n": n}, "perturbation_norm", max(interaction_norm(model.phi1, zeta, n, t=t) for t in grid))

    if model.potential is not None:
        table.add_metric({}, "lipschitz_constant", lipschitz_constant(model.potential, model.boxes))

    for box in model.boxes:
        table.add_metric({"k": box.k}, "lr_constant", lr_constant(zeta, box))
        table.add_metric({"k": box.k}, "f_gamma_norm", f_gamma_norm(zeta, box))
        if zeta.name == "exponential":
            norm0 = max(interaction_norm(model.phi0, zeta, 0, k_range=[box.k], t=t) for t in grid)
            table.add_metric({"k": box.k}, "velocity", 2.0 / zeta.params["a"] * lr_constant(zeta, box) * norm0)

    claims = zeta.check_claims()
    for flag, ok in sorted(claims.items()):
        table.add_metric({"decay": zeta.name, "flag": flag}, "claim_holds", int(ok))
    failed = [flag for flag, ok in claims.items() if not ok]
    if failed:
        raise BoundViolation(f"decay function {zeta.name} does not satisfy {failed}")

    if 2 in model.ks:
        _extension_rows(ctx, table, samples)
    else:
        logger.warning(f"{model.name} has no Λ_2; extension bound skipped")
    ctx.report.add_table("Normas", table.rows)
    return table


def _extension_rows(ctx: RunContext, table, samples: int):
    """Extension bound with ω(T(B)) = tr(ρ[H, B]) for random ρ and even A on Λ_2."""
    config = ctx.config
    model = ctx.model
    zeta = model.zeta
    system = model.at(2)
    box, space = system.box, system.space
    H = system.h0(config.t0)
    per_site = {x: 0.0 for x in box.sites}
    for X, value in model.phi0.term_norms(2, config.t0).items():
        for x in X:
            per_site[x] += value
    C = 2.0 * max(per_site.values())
    rng = ctx.rng
    f = lambda j: float(zeta(j))
    for sample in range(samples):
        A = _random_even_hermitian(rng, space)
        rho = _random_state(rng, space.dim)
        functional = lambda B: np.trace(rho @ (H @ B - B @ H))
        result = extension_bound(functional, A, f, 1.0, C, space, box)
        norm = f_norm(A, f, space, box)
        params = {"k": 2, "sample": sample}
        table.add_metric(params, "f_norm", norm.value)
        for key in ("lhs", "telescoped", "c_bf", "bound"):
            table.add_metric(params, f"extension_{key}", result[key])
        if not result["holds"]:
            raise BoundViolation(f"extension bound fails on sample {sample}: {result['lhs']:.3e} > {result['bound']:.3e}")


async def run_weight_table(ctx: RunContext, s_max: float = 40.0, points: int = 401):
    """W(s) and Ŵ(ω) with the three defining properties checked on the grid."""
    w = ctx.model.weight
    time_rows, freq_rows = weight_tables(w, s_max, points, points)
    table = ctx.table("weight_table")
    table.extend(time_rows)
    table.extend(freq_rows)

    omega = np.array([r["omega"] for r in freq_rows])
    what = w.what(omega)
    outer = np.abs(omega) >= w.g
    expected = -1j / (np.sqrt(2.0 * np.pi) * omega[outer])
    outer_dev = float(np.max(np.abs(what[outer] - expected), initial=0.0))
    inner_dev = float(np.max(np.abs(what[np.abs(omega) <= w.g_tilde]), initial=0.0))
    s = np.array([r["s"] for r in time_rows])
    decay = float(np.max(np.abs(np.array([r["W"] for r in time_rows])) * (1.0 + np.abs(s)) ** 6))
    table.add_metric({"g": w.g, "g_tilde": w.g_tilde}, "outer_deviation", outer_dev)
    table.add_metric({"g": w.g, "g_tilde": w.g_tilde}, "inner_deviation", inner_dev)
    table.add_metric({"g": w.g, "g_tilde": w.g_tilde}, "moment_6", decay)
    if outer_dev > WEIGHT_TOL or inner_dev > WEIGHT_TOL:
        raise BoundViolation(f"Ŵ deviates from its defining values: {outer_dev:.2e} for |ω| ≥ g, {inner_dev:.2e} on [−g̃, g̃]")
    if not np.isfinite(decay):
        raise BoundViolation("W(s)(1+|s|)^6 is not bounded on the grid")

    if ctx.plots:
        plots.weight_plot(ctx.out_dir / "weight.svg", time_rows, freq_rows)
    ctx.report.add_section("Función de peso", f"g = {w.g}, g̃ = {w.g_tilde}, sup |W(s)|(1+|s|)⁶ = {decay:.4g}")
    return table
