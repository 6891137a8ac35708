import asyncio

import pandas as pd
import pytest

from adiabatlab.errors import BoundViolation, ConfigError
from adiabatlab.handlers import sweep
from adiabatlab.handlers.command import CommandHandler
from adiabatlab.handlers.context import RunContext
from adiabatlab.models.config import ModelConfig


@pytest.fixture
def handler(tmp_path):
    return CommandHandler(str(tmp_path / "commands.json"))


def run(handler, command, config, out_dir, **overrides):
    ctx = RunContext(config, out_dir, threads=1)
    return asyncio.run(handler.handle_command(command, ctx, overrides)), ctx


def test_check_gap_writes_outputs(handler, tiny_data, tmp_path):
    table, _ = run(handler, "check-gap", ModelConfig.from_dict(tiny_data), tmp_path, spectrum=True)
    assert len(table.metric("kappa")) == 6
    frame = pd.read_csv(tmp_path / "spectrum.csv")
    assert frame["in_patch"].sum() == 6
    assert (tmp_path / "check_gap.provenance.json").exists()
    assert (tmp_path / "report.html").exists()


def test_weight_table(handler, tiny_data, tmp_path):
    table, ctx = run(handler, "weight-table", ModelConfig.from_dict(tiny_data), tmp_path, s_max=20.0, points=101)
    assert table.metric("outer_deviation")["value"].iloc[0] <= 1e-10
    assert table.metric("inner_deviation")["value"].iloc[0] <= 1e-10
    assert "Función de peso" in ctx.report.to_markdown()


def test_first_order(handler, tiny_data, tmp_path):
    table, _ = run(handler, "first-order", ModelConfig.from_dict(tiny_data), tmp_path, k=1)
    assert (table.metric("first_order_deviation")["value"] <= 1e-9).all()


def test_sweep(handler, tiny_data, tmp_path):
    table, _ = run(
        handler, "sweep", ModelConfig.from_dict(tiny_data), tmp_path,
        k=1, eps_grid=[0.0, 0.01, 0.02], eta_grid=[0.2], observables=["density0"],
    )
    assert len(table.metric("tracking_error")) == 3
    assert len(table.metric("calibrated_constant")) == 1
    assert (tmp_path / "sweep.csv").read_bytes().endswith(b"\r\n")


def test_sweep_keeps_bound_rows_on_violation(handler, tiny_data, tmp_path, monkeypatch):
    monkeypatch.setattr(sweep, "calibrate_constant", lambda results, d: 0.0)
    with pytest.raises(BoundViolation):
        run(
            handler, "sweep", ModelConfig.from_dict(tiny_data), tmp_path,
            k=2, calibrate_k=1, eps_grid=[0.01, 0.02], eta_grid=[0.2], observables=["density0"],
        )
    frame = pd.read_csv(tmp_path / "sweep.csv")
    errors = frame[frame["metric"] == "tracking_error"]
    bounds = frame[frame["metric"] == "tracking_bound"]
    flags = frame[frame["metric"] == "within_bound"]
    assert len(errors) == 2
    assert len(bounds) == len(errors)
    assert len(flags) == len(errors)
    assert (flags["value"] == 0).any()


def test_resummation(handler, tiny_data, tmp_path):
    table, _ = run(handler, "resum", ModelConfig.from_dict(tiny_data), tmp_path, eps_grid=[0.01, 0.1], eta_grid=[0.01, 0.1])
    gaps = table.metric("resummation_gap")["value"]
    bounds = table.metric("resummation_bound")["value"]
    assert (gaps <= bounds + 1e-12).all()


def test_neass(handler, static_data, tmp_path):
    table, _ = run(handler, "neass", ModelConfig.from_dict(static_data), tmp_path, n_values=[1], eps_grid=[0.0, 0.01, 0.02], k=1)
    assert table.metric("unperturbed_deviation")["value"].iloc[0] <= 1e-10
    assert len(table.metric("stationarity_defect")) == 3


def test_neass_needs_stationary_time(handler, tiny_data, tmp_path):
    with pytest.raises(ConfigError):
        run(handler, "neass", ModelConfig.from_dict(tiny_data), tmp_path, n_values=[1], eps_grid=[0.0], k=1, t=0.5)


def test_response(handler, static_data, tmp_path):
    static_data["potential"]["envelope"] = {"name": "switch"}
    static_data["time"] = {"t0": -1.0, "t1": 2.0, "points": 4}
    table, _ = run(
        handler, "response", ModelConfig.from_dict(static_data), tmp_path,
        k=1, eps_grid=[0.01, 0.02], times=[0.0, 0.5],
    )
    kubo = table.metric("kubo")
    sigma = table.metric("sigma_j")
    assert kubo[kubo["k"] == 1]["value"].iloc[0] == pytest.approx(sigma["value"].iloc[0], abs=1e-12)
    assert set(kubo["k"]) == {1, 2}
    assert len(table.metric("residual")) == 2


def test_response_rejects_driven_h0(handler, tiny_data, tmp_path):
    with pytest.raises(ConfigError):
        run(handler, "response", ModelConfig.from_dict(tiny_data), tmp_path, eps_grid=[0.01])


def test_tdl(handler, static_data, tmp_path):
    static_data["lattice"]["k"] = [1, 2, 3]
    table, _ = run(handler, "tdl", ModelConfig.from_dict(static_data), tmp_path, observables=["density0"])
    assert len(table.metric("omega")) == 3
    assert len(table.metric("cauchy_deficit")) == 2
    assert (table.metric("difference_ii")["value"] <= table.metric("bound_ii")["value"]).all()


def test_tdl_needs_three_boxes(handler, static_data, tmp_path):
    with pytest.raises(ConfigError):
        run(handler, "tdl", ModelConfig.from_dict(static_data), tmp_path)


def test_lr_and_norms(handler, static_data, tmp_path):
    config = ModelConfig.from_dict(static_data)
    lr, _ = run(handler, "lr", config, tmp_path / "lr", k=2, times=[0.25, 0.5])
    assert len(lr.metric("lhs")) == 2 * 4
    assert len(lr.metric("velocity")) == 1
    norms, _ = run(handler, "norms", config, tmp_path / "norms", samples=1)
    bulk = norms.metric("bulk_norm")["value"].to_numpy()
    assert (norms.metric("interaction_norm")["value"].to_numpy() <= bulk * (1 + 1e-12)).all()
    assert norms.metric("claim_holds")["value"].all()
    assert len(norms.metric("extension_bound")) == 1


def test_first_order_writes_coefficient_norms(handler, tiny_data, tmp_path):
    run(handler, "first-order", ModelConfig.from_dict(tiny_data), tmp_path, k=1)
    frame = pd.read_csv(tmp_path / "sapt_coefficients.csv")
    assert list(frame.columns) == ["experiment", "t", "j", "i", "norm_a", "norm_h"]
    assert len(frame) == 3 * 2
