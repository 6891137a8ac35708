import numpy as np
import pytest

from adiabatlab.core.evolve import loglog_slope
from adiabatlab.core.sapt import (
    MAX_ORDER,
    ResummedGenerator,
    check_first_order,
    construct_sapt,
    dressing_unitary,
    expansion_expectation,
    kubo_coefficient,
    neass,
    parallel_transport,
    resummed_s,
    s_n,
    stationarity_defect,
    transport_defect,
)
from adiabatlab.errors import ConfigError, NotHermitian, NotPatchSupported
from adiabatlab.models.config import ModelConfig
from adiabatlab.models.model import Model

T = 0.5


@pytest.fixture
def system(tiny_model):
    return tiny_model.at(1)


@pytest.fixture
def coeffs(system):
    return construct_sapt(system, 2, system.weight)


def test_first_order_matches_closed_form(coeffs):
    assert check_first_order(coeffs, T) <= 1e-9
    assert check_first_order(coeffs, 0.0) <= 1e-9


def test_coefficients_are_hermitian(coeffs):
    for j in (1, 2):
        for i in range(j + 1):
            A = coeffs.a(j, i, T)
            np.testing.assert_allclose(A, A.conj().T, atol=1e-12)


def test_diagonal_parts_commute_with_patch(coeffs):
    P = coeffs.patch(T).projector_matrix
    for key, h in coeffs.at(T).h.items():
        np.testing.assert_allclose(h @ P, P @ h, atol=1e-8)


def test_static_unperturbed_model_has_no_dressing(static_data):
    static_data["potential"] = None
    system = Model(ModelConfig.from_dict(static_data)).at(1)
    coeffs = construct_sapt(system, 2, system.weight)
    for j in (1, 2):
        for i in range(j + 1):
            assert np.max(np.abs(coeffs.a(j, i, T))) < 1e-12


def test_static_model_keeps_only_the_eps_slots(static_model):
    system = static_model.at(1)
    coeffs = construct_sapt(system, 1, system.weight)
    assert np.max(np.abs(coeffs.a(1, 0, T))) < 1e-12
    assert np.max(np.abs(coeffs.a(1, 1, T))) > 0


def test_generator_is_polynomial(coeffs, rng):
    for eps, eta in rng.uniform(0.01, 0.2, size=(3, 2)):
        expected = sum(
            eps ** i * eta ** (j - i) * coeffs.a(j, i, T)
            for j in (1, 2)
            for i in range(j + 1)
        )
        np.testing.assert_allclose(s_n(coeffs, eps, eta, T), expected, atol=1e-9)
    assert np.max(np.abs(s_n(coeffs, 0.1, 0.1, T, order=0))) == 0.0


def test_neass_at_zero_is_patch_state(coeffs):
    state = neass(coeffs.patch(T).state(), s_n(coeffs, 0.0, 0.0, T))
    np.testing.assert_allclose(state, coeffs.patch(T).state(), atol=1e-14)


@pytest.mark.parametrize("n", [1, 2])
def test_neass_stationarity_scales_with_order(static_model, n):
    system = static_model.at(1)
    coeffs = construct_sapt(system, n, system.weight)
    P = coeffs.patch(0.0).state()
    H0 = system.h0(0.0)
    V = system.perturbation(0.0)
    eps_grid = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
    defects = [stationarity_defect(H0 + eps * V, neass(P, s_n(coeffs, eps, 0.0, 0.0))) for eps in eps_grid]
    assert loglog_slope(eps_grid, defects) >= n + 0.7


def test_cache_keeps_recent_times(system, coeffs):
    capped = construct_sapt(system, 2, system.weight, max_times=2)
    for t in (T, 0.1, 0.2, 0.3):
        capped.at(t)
    assert list(capped._levels) == [0.2, 0.3]
    assert len(capped._patches) <= 2 * (2 * 2 * capped.stencil + 1)
    np.testing.assert_allclose(capped.a(2, 1, T), coeffs.a(2, 1, T), atol=1e-12)
    assert list(capped._levels) == [0.3, T]
    with pytest.raises(ConfigError):
        construct_sapt(system, 1, system.weight, max_times=0)


def test_dressing_unitary(coeffs, rng):
    U = dressing_unitary(s_n(coeffs, 0.1, 0.05, T))
    np.testing.assert_allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=1e-12)
    with pytest.raises(NotHermitian):
        dressing_unitary(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))


def test_order_limits(system, coeffs):
    with pytest.raises(ConfigError):
        construct_sapt(system, MAX_ORDER + 1, system.weight)
    with pytest.raises(ConfigError):
        coeffs.a(3, 0, T)
    with pytest.raises(ConfigError):
        s_n(coeffs, 0.1, 0.1, T, order=3)


def test_kubo_is_first_expansion_term(system, coeffs):
    A = system.observable("current0").dense()
    sigma = kubo_coefficient(coeffs, A, T)
    assert abs(sigma.imag) < 1e-12
    assert sigma == pytest.approx(expansion_expectation(coeffs, A, 1, T), abs=1e-12)


def test_resummation(coeffs):
    generator = ResummedGenerator(coeffs, [0.0, T, 1.0])
    assert all(d > 0 for d in generator.deltas)
    assert generator.deltas == sorted(generator.deltas, reverse=True)
    small = generator.deltas[-1] / 2
    np.testing.assert_allclose(resummed_s(generator, small, small, T), s_n(coeffs, small, small, T), atol=1e-14)
    for x in (0.01, 0.05, 0.2, 0.8):
        diff = np.linalg.norm(generator(x, x, T) - s_n(coeffs, x, x, T, order=1), 2)
        assert diff <= generator.constant(1) * x + 1e-12


def test_parallel_transport_follows_patch(system):
    coeffs = construct_sapt(system, 1, system.weight)
    rho0 = coeffs.patch(0.2).state()
    rho = parallel_transport(coeffs, rho0, 0.0, 0.5, 0.2, 0.6)
    assert transport_defect(coeffs, rho, 0.6) < 1e-7
    np.testing.assert_allclose(rho, parallel_transport(coeffs, rho0, 0.0, 0.5, 0.2, 0.6, transport="exact"), atol=1e-7)


def test_parallel_transport_needs_patch_state(system):
    coeffs = construct_sapt(system, 1, system.weight)
    dim = system.space.dim
    with pytest.raises(NotPatchSupported):
        parallel_transport(coeffs, np.eye(dim) / dim, 0.0, 0.5, 0.0, 0.5)
