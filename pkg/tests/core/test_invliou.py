import numpy as np
import pytest

from adiabatlab.core.fock import FockOperator, FockSpace, car_operator, hopping_terms, number_operator
from adiabatlab.core.interaction import Interaction, TermFamily
from adiabatlab.core.invliou import (
    SQRT_2PI,
    build_weight,
    fattening_sequence,
    interaction_of_inverse,
    inv_liouvillian_spectral,
    inv_liouvillian_time,
    local_decomposition,
    weight_tables,
)
from adiabatlab.core.lattice import SiteSet, build_box
from adiabatlab.core.spectral import diagonalize, find_gapped_patch
from adiabatlab.errors import ConfigError, ShapeMismatch

TOL = 1e-10
TOL_QUAD = 1e-5


@pytest.fixture
def weight():
    return build_weight(0.9, 0.4)


def test_weight_frequency_profile(weight):
    omega = np.linspace(-3, 3, 601)
    what = weight.what(omega)
    outer = np.abs(omega) >= weight.g
    np.testing.assert_allclose(what[outer], -1j / (SQRT_2PI * omega[outer]), rtol=0, atol=TOL)
    np.testing.assert_allclose(what[np.abs(omega) <= weight.g_tilde], 0.0, rtol=0, atol=TOL)


def test_weight_is_odd_and_real(weight):
    s = np.linspace(0.1, 30, 50)
    values = weight(s)
    np.testing.assert_allclose(weight(-s), -values, rtol=0, atol=TOL)
    assert np.isrealobj(values)


def test_weight_decays(weight):
    s = np.linspace(-60, 60, 241)
    moment = np.abs(weight(s)) * (1 + np.abs(s)) ** 6
    assert np.all(np.isfinite(moment))
    assert weight.tail(100.0) < weight.tail(20.0)


def test_weight_requires_ordered_cutoffs():
    with pytest.raises(ConfigError):
        build_weight(0.5, 0.5)
    with pytest.raises(ConfigError):
        build_weight(0.5, 0.0)


def test_off_diagonal_inversion(weight, rng):
    H = FockOperator.from_matrix(np.diag([0.0, 1.0, 1.3, 2.0]).astype(complex))
    es = diagonalize(H)
    patch = find_gapped_patch(es, 0.9, 0.2, kappa_max=1)
    raw = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    A = FockOperator.from_matrix(raw + raw.conj().T)
    X = inv_liouvillian_spectral(es, A, weight).dense()
    P = patch.projector_matrix
    Q = np.eye(4) - P
    lhs = 1j * (H.dense() @ X - X @ H.dense())
    np.testing.assert_allclose(P @ lhs @ Q, P @ A.dense() @ Q, rtol=0, atol=TOL)
    np.testing.assert_allclose(X, X.conj().T, rtol=0, atol=TOL)


@pytest.mark.parametrize("modes", [2, 3, 4])
def test_commutator_inversion_on_random_gapped_systems(weight, rng, modes):
    dim = 2 ** modes
    for kappa in (1, 2):
        patch_levels = rng.uniform(0.0, 0.2, size=kappa)
        rest = rng.uniform(1.3, 3.0, size=dim - kappa)
        unitary, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
        H = FockOperator.from_matrix(unitary @ np.diag(np.concatenate([patch_levels, rest])) @ unitary.conj().T, hermitian=True)
        es = diagonalize(H)
        P = find_gapped_patch(es, weight.g, weight.g_tilde, kappa_max=2).projector_matrix
        Q = np.eye(dim) - P
        raw = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        A = raw + raw.conj().T
        H_dense = H.dense()
        X = inv_liouvillian_spectral(es, FockOperator.from_matrix(H_dense @ A - A @ H_dense), weight).dense()
        deviation = np.linalg.norm(P @ X @ Q + 1j * P @ A @ Q, 2)
        assert deviation <= 1e-8 * np.linalg.norm(A, 2)


def test_inverse_annihilates_diagonal_blocks(weight):
    H = FockOperator.from_matrix(np.diag([0.0, 1.0, 2.0, 3.0]).astype(complex))
    es = diagonalize(H)
    X = inv_liouvillian_spectral(es, H, weight).dense()
    np.testing.assert_allclose(X, 0.0, rtol=0, atol=TOL)


def test_shape_mismatch(weight):
    es = diagonalize(FockOperator.from_matrix(np.eye(4, dtype=complex)))
    with pytest.raises(ShapeMismatch):
        inv_liouvillian_spectral(es, np.eye(2), weight)


def test_time_path_agrees_with_spectral(weight, rng):
    H = FockOperator.from_matrix(np.diag([0.0, 1.0, 1.3, 2.0]).astype(complex))
    es = diagonalize(H)
    raw = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    A = FockOperator.from_matrix(raw + raw.conj().T)
    result = inv_liouvillian_time(es, A, weight, tolerance=1e-7)
    expected = inv_liouvillian_spectral(es, A, weight).dense()
    np.testing.assert_allclose(result.operator.dense(), expected, rtol=0, atol=TOL_QUAD)
    assert result.budget < TOL_QUAD


def chain(k=1, t=1.0, m=0.5):
    box = build_box(k)

    def builder(b):
        return {SiteSet([x, (x[0] + 1,)]): hopping_terms(x, (x[0] + 1,), -t) for x in b.sites if (x[0] + 1,) in b}

    def mass(b):
        return {SiteSet([x]): [((-1.0) ** x[0] * m, ((x, 1, True), (x, 1, False)))] for x in b.sites}

    return box, Interaction([box], [TermFamily("hopping", builder), TermFamily("mass", mass)])


def test_fattening_sequence():
    box = build_box(2)
    regions = fattening_sequence(box, [(0,)])
    assert [len(Y) for Y in regions] == [1, 3, 5]
    with pytest.raises(ShapeMismatch):
        fattening_sequence(box, [(7,)])


def test_local_decomposition_telescopes(weight):
    box, phi = chain(1)
    space = FockSpace.for_box(box)
    es = diagonalize(phi.assemble(1))
    A = number_operator(space, [(0,)])
    layers = local_decomposition(es, A, [(0,)], weight, space, box)
    total = sum(layer.dense() for layer in layers)
    np.testing.assert_allclose(total, inv_liouvillian_spectral(es, A, weight).dense(), rtol=0, atol=TOL)
    assert layers[0].support <= {(0,)}


def test_local_decomposition_decays(weight):
    box, phi = chain(3, t=0.2, m=1.0)
    space = FockSpace.for_box(box)
    es = diagonalize(phi.assemble(3))
    A = number_operator(space, [(0,)])
    layers = local_decomposition(es, A, [(0,)], weight, space, box)
    norms = [np.linalg.norm(layer.dense(), 2) for layer in layers]
    assert len(norms) == 4
    for outer, inner in zip(norms[2:], norms[1:]):
        assert outer <= inner + TOL
    assert norms[-1] < norms[1]


def test_interaction_of_inverse_assembles_to_inverse(weight):
    box, phi = chain(1)
    es = diagonalize(phi.assemble(1))
    family = interaction_of_inverse(phi, 1, es, weight)
    expected = inv_liouvillian_spectral(es, phi.assemble(1), weight).dense()
    np.testing.assert_allclose(family.assemble(1).dense(), expected, rtol=0, atol=1e-9)


def test_weight_tables(weight):
    time_rows, freq_rows = weight_tables(weight, s_max=10.0, s_points=21, omega_points=11)
    assert len(time_rows) == 21
    assert set(freq_rows[0]) == {"omega", "re_what", "im_what"}
    assert time_rows[10]["s"] == 0.0
