import numpy as np
import pytest

from adiabatlab.core.evolve import (
    TrackingResult,
    calibrate_constant,
    check_tracking,
    dynamics_comparison,
    full_hamiltonian,
    loglog_slope,
    lr_data,
    lr_light_cone,
    super_adiabatic_state,
    tracking_bound,
    tracking_error,
    trajectory_rows,
)
from adiabatlab.core.fock import number_operator
from adiabatlab.core.sapt import construct_sapt
from adiabatlab.errors import BoundViolation, ShapeMismatch


def test_static_model_tracks_exactly(static_model):
    system = static_model.at(1)
    n0 = system.observable("density0")
    result = tracking_error(system, 1, 0.0, 0.1, n0, 0.0, 1.0)
    assert result.error < 1e-10
    assert result.value.real == pytest.approx(result.reference.real, abs=1e-10)


def test_dressed_initial_state_tracks_better(tiny_model):
    system = tiny_model.at(1)
    coeffs = construct_sapt(system, 1, system.weight)
    n0 = system.observable("density0").dense()
    bare = trajectory_rows(system, 0.0, 0.2, [0.0, 1.0], {"density0": n0})
    dressed = trajectory_rows(system, 0.0, 0.2, [0.0, 1.0], {"density0": n0}, coeffs=coeffs)
    assert bare[0]["error"] is None
    assert dressed[0]["error"] < 1e-10
    assert dressed[-1]["error"] < 0.1


def test_super_adiabatic_state_is_a_state(tiny_model):
    system = tiny_model.at(1)
    coeffs = construct_sapt(system, 1, system.weight)
    rho = super_adiabatic_state(coeffs, 0.05, 0.1, 0.5)
    assert np.trace(rho).real == pytest.approx(1.0)
    np.testing.assert_allclose(rho @ rho, rho, atol=1e-10)


def test_tracking_error_scales_in_eps(static_model):
    system = static_model.at(1)
    coeffs = construct_sapt(system, 1, system.weight)
    n0 = system.observable("density0")
    eps_grid = [3e-3, 1e-2, 3e-2, 1e-1]
    errors = [tracking_error(system, 1, eps, 1e-3, n0, 0.0, 1.0, coeffs=coeffs).error for eps in eps_grid]
    assert loglog_slope(eps_grid, errors) >= 1.7


def test_loglog_slope():
    xs = [0.01, 0.02, 0.04]
    assert loglog_slope(xs, [3 * x ** 2 for x in xs]) == pytest.approx(2.0)


def test_bound_calibration():
    runs = [
        TrackingResult(0.0, 1.0, eps, 0.1, 1, error, 0j, 0j)
        for eps, error in ((0.01, 1e-4), (0.02, 3e-4))
    ]
    constant = calibrate_constant(runs, 1)
    rows, violation = check_tracking(runs, constant, 1)
    assert violation is None
    assert all(r["within_bound"] for r in rows)
    assert max(r["error"] / r["bound"] for r in rows) == pytest.approx(1.0)
    assert tracking_bound(2.0, 1, 0.1, 0.1, 1) == pytest.approx(2.0 * 0.02 / 0.01)


def test_bound_excess_keeps_every_row():
    runs = [
        TrackingResult(0.0, 1.0, eps, 0.1, 1, error, 0j, 0j)
        for eps, error in ((0.01, 1e-4), (0.02, 3e-4), (0.04, 1e-5))
    ]
    constant = calibrate_constant(runs, 1)
    rows, violation = check_tracking(runs, constant / 2, 1)
    assert len(rows) == 3
    assert [r["within_bound"] for r in rows] == [True, False, True]
    assert isinstance(violation, BoundViolation)
    assert "ε=0.02" in str(violation)


def test_lieb_robinson_holds(static_model):
    system = static_model.at(2)
    left = number_operator(system.space, [(-2,)])
    right = number_operator(system.space, [(2,)])
    data = lr_data(system, left, right, 1.0, [0.25, 0.5, 1.0], static_model.zeta, static_model.phi0, s=0.0)
    assert data.distance == 4
    assert data.velocity is not None
    assert len(data.rows) == 3
    for row in data.rows:
        assert 0.0 <= row.lhs <= row.rhs + 1e-8
        assert row.rhs_exp is not None


def test_light_cone_grows(static_model):
    system = static_model.at(2)
    A = number_operator(system.space, [(-2,)])
    Bs = [number_operator(system.space, [(x,)]) for x in (-1, 2)]
    near, far = lr_light_cone(system, A, Bs, 1.0, [0.5], static_model.zeta, static_model.phi0, s=0.0)
    assert near.rows[0].lhs > far.rows[0].lhs


def test_lieb_robinson_needs_disjoint_supports(static_model):
    system = static_model.at(1)
    n0 = number_operator(system.space, [(0,)])
    with pytest.raises(ShapeMismatch):
        lr_data(system, n0, n0, 1.0, [0.5], static_model.zeta, static_model.phi0)


def test_full_hamiltonian_matches_box_model(tiny_model):
    system = tiny_model.at(1)
    H = full_hamiltonian(tiny_model.phi0, None, 1, system.space, 0.5)
    np.testing.assert_allclose(H, system.h0(0.5), atol=1e-14)


def test_dynamics_comparison(tiny_model):
    observable = lambda space: number_operator(space, [(0,)])
    result = dynamics_comparison(tiny_model.phi0, None, 1, 2, 1, observable, 1.0, 0.5, tiny_model.zeta)
    assert result.premise_k == 1
    assert result.difference_i < 1e-8
    assert result.difference_ii <= result.bound_ii
    assert 0.0 <= result.ratio_ii <= 1.0
    with pytest.raises(ShapeMismatch):
        dynamics_comparison(tiny_model.phi0, None, 1, 2, 2, observable, 1.0, 0.5, tiny_model.zeta)
