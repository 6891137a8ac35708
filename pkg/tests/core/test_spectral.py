import numpy as np
import pytest

from adiabatlab.core.fock import FockOperator
from adiabatlab.core.spectral import diagonalize, find_gapped_patch, spectrum_rows, track_patches
from adiabatlab.errors import ConfigError, GapContinuityError, MultiplicityExceeded, NoGap, NotHermitian

TOL = 1e-12


def diagonal(values):
    return FockOperator.from_matrix(np.diag(np.asarray(values, dtype=complex)))


def test_diagonalize_random_hermitian(rng):
    raw = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    H = FockOperator.from_matrix(raw + raw.conj().T)
    es = diagonalize(H)
    assert np.all(np.diff(es.eigenvalues) >= 0)
    np.testing.assert_allclose(es.from_eigenbasis(np.diag(es.eigenvalues)), H.dense(), rtol=0, atol=1e-10)
    assert es.residual < 1e-10


def test_diagonalize_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        diagonalize(FockOperator.from_matrix(np.triu(np.ones((4, 4)))))


def test_bottom_patch_with_degeneracy():
    es = diagonalize(diagonal([0.0, 0.0, 1.0, 2.0]))
    patch = find_gapped_patch(es, 0.9, 0.5, kappa_max=2)
    assert patch.kappa == 2
    assert patch.g == pytest.approx(1.0)
    assert patch.f_minus == pytest.approx(-0.25)
    assert patch.f_plus == pytest.approx(0.25)
    np.testing.assert_allclose(np.trace(patch.state()), 1.0, rtol=0, atol=TOL)
    assert patch.expectation(np.eye(4)) == pytest.approx(1.0)


def test_patch_errors():
    es = diagonalize(diagonal([0.0, 0.0, 1.0, 2.0]))
    with pytest.raises(MultiplicityExceeded):
        find_gapped_patch(es, 0.9, 0.5, kappa_max=1)
    with pytest.raises(NoGap):
        find_gapped_patch(es, 1.5, 0.5, kappa_max=2)
    with pytest.raises(ConfigError):
        find_gapped_patch(es, 0.5, 0.9)
    with pytest.raises(ConfigError):
        find_gapped_patch(es, 0.9, 0.5, mode="middle")


def test_window_patch():
    es = diagonalize(diagonal([0.0, 1.0, 1.05, 2.2]))
    patch = find_gapped_patch(es, 0.9, 0.2, mode="window", window=(0.95, 1.1), kappa_max=2)
    assert list(patch.indices) == [1, 2]
    assert patch.g == pytest.approx(1.0)
    assert (patch.f_minus, patch.f_plus) == (0.95, 1.1)
    with pytest.raises(NoGap):
        find_gapped_patch(es, 0.9, 0.2, mode="window", window=(1.5, 1.6))


def test_spectrum_rows():
    es = diagonalize(diagonal([0.0, 1.0, 2.0, 3.0]))
    patch = find_gapped_patch(es, 0.9, 0.5, kappa_max=1)
    rows = spectrum_rows(2, 0.5, es, patch)
    assert [row["in_patch"] for row in rows] == [True, False, False, False]
    assert rows[3]["eigenvalue"] == 3.0


def test_track_patches_detects_kappa_jump():
    one = find_gapped_patch(diagonalize(diagonal([0.0, 1.0, 2.0, 3.0])), 0.9, 0.5, kappa_max=2)
    two = find_gapped_patch(diagonalize(diagonal([0.0, 0.1, 2.0, 3.0])), 0.9, 0.5, kappa_max=2)
    ordered = track_patches([(2, 1.0, one), (2, 0.0, one), (3, 0.0, two)])
    assert [(k, t) for k, t, _ in ordered] == [(2, 0.0), (2, 1.0), (3, 0.0)]
    with pytest.raises(GapContinuityError):
        track_patches([(2, 0.0, one), (2, 0.5, two)])
