import numpy as np
import pytest

from adiabatlab.core.fock import FockOperator, FockSpace, annihilation, car_operator, even_part, hopping_terms, number_operator
from adiabatlab.core.lattice import build_box
from adiabatlab.core.locality import (
    conditional_expectation,
    conditional_expectation_oracle,
    extension_bound,
    extension_constant,
    f_norm,
    majorana_expansion,
    partial_trace_expectation,
    quasilocality_certificate,
)
from adiabatlab.errors import ConfigError, ParityError, ResourceLimit, ShapeMismatch

TOL = 1e-12


def assert_allclose(a, b):
    np.testing.assert_allclose(a, b, rtol=0, atol=TOL)


@pytest.fixture
def space():
    return FockSpace.for_box(build_box(1))


def random_even(rng, space):
    raw = rng.normal(size=(space.dim, space.dim)) + 1j * rng.normal(size=(space.dim, space.dim))
    return even_part(FockOperator.from_matrix(raw + raw.conj().T, space.site_set))


def test_local_operators_are_fixed(space):
    hop = car_operator(space, hopping_terms((-1,), (0,), 1.0))
    assert_allclose(conditional_expectation(hop, [(-1,), (0,)], space).dense(), hop.dense())


def test_outside_density_becomes_half(space):
    n = number_operator(space, [(1,)])
    assert_allclose(conditional_expectation(n, [(-1,), (0,)], space).dense(), 0.5 * np.eye(space.dim))


def test_hopping_across_the_cut_vanishes(space):
    hop = car_operator(space, hopping_terms((0,), (1,), 1.0))
    assert_allclose(conditional_expectation(hop, [(0,)], space).dense(), np.zeros((space.dim, space.dim)))


def test_twirl_matches_oracle(space, rng):
    A = random_even(rng, space)
    for X in ([(0,)], [(-1,), (1,)], []):
        assert_allclose(conditional_expectation(A, X, space).dense(), conditional_expectation_oracle(A, X, space).dense())


def test_partial_trace_on_initial_segment(space, rng):
    A = random_even(rng, space)
    assert_allclose(partial_trace_expectation(A, 2, space).dense(), conditional_expectation(A, [(-1,), (0,)], space).dense())


def test_contraction_and_idempotence(space, rng):
    A = random_even(rng, space)
    once = conditional_expectation(A, [(0,)], space)
    twice = conditional_expectation(once, [(0,)], space)
    assert_allclose(once.dense(), twice.dense())
    assert once.norm() <= A.norm() + 1e-10


def test_conditional_expectation_needs_even_input(space):
    with pytest.raises(ParityError):
        conditional_expectation(annihilation(space, (0,)), [(0,)], space)
    with pytest.raises(ShapeMismatch):
        conditional_expectation(number_operator(space), [(4,)], space)


def test_majorana_expansion_limit():
    space = FockSpace.for_box(build_box(3))
    with pytest.raises(ResourceLimit):
        majorana_expansion(space.identity(), space)


def test_identity_expansion(space):
    coefficients = majorana_expansion(space.identity(), space)
    assert coefficients == {(): pytest.approx(1.0)}


def test_f_norm_of_local_operator():
    box = build_box(2)
    space = FockSpace.for_box(box)
    hop = car_operator(space, hopping_terms((-1,), (0,), 1.0))
    result = f_norm(hop, lambda j: 2.0 ** -j, space, box)
    assert result.value == pytest.approx(result.norm)
    assert result.argmax_k is None


def test_f_norm_of_spread_operator():
    box = build_box(2)
    space = FockSpace.for_box(box)
    hop = car_operator(space, hopping_terms((-2,), (2,), 1.0))
    result = f_norm(hop, lambda j: 2.0 ** -j, space, box)
    # only Λ_2 contains both ends
    assert result.argmax_k == 1
    assert result.value == pytest.approx(result.norm + 2.0 * result.norm)


def test_certificate(space, rng):
    A = random_even(rng, space)
    eta = quasilocality_certificate(A, [(0,)], space)
    assert eta > 0
    local = car_operator(space, hopping_terms((-1,), (0,), 1.0))
    assert quasilocality_certificate(local, [(-1,), (0,)], space) == pytest.approx(0.0, abs=TOL)
    with pytest.raises(ResourceLimit):
        quasilocality_certificate(A, [], space, max_monomials=10)
    with pytest.raises(ConfigError):
        quasilocality_certificate(space.zero(), [(0,)], space)


def test_extension_constant():
    assert extension_constant(lambda j: 0.0, 1.0, 1, 3) == 3.0
    assert extension_constant(lambda j: 1.0, 0.0, 1, 2) == 5.0


def test_extension_bound_holds(rng):
    box = build_box(2)
    space = FockSpace.for_box(box)
    A = random_even(rng, space)
    H = car_operator(space, [t for x in range(-2, 2) for t in hopping_terms((x,), (x + 1,), -1.0)]).dense()
    raw = rng.normal(size=(space.dim, space.dim))
    rho = raw @ raw.T
    rho /= np.trace(rho)
    result = extension_bound(lambda B: np.trace(rho @ (H @ B - B @ H)), A, lambda j: np.exp(-j), 1.0, 4.0, space, box)
    assert result["holds"]
    assert result["lhs"] <= result["telescoped"] + 1e-10
