import numpy as np
import pytest

from adiabatlab.core.fock import is_number_conserving
from adiabatlab.errors import ConfigError
from adiabatlab.models.config import ModelConfig
from adiabatlab.models.model import Model, build_observable


def test_boxes_and_spaces(tiny_model):
    assert tiny_model.ks == [1, 2]
    system = tiny_model.at(2)
    assert system.space.dim == 2 ** 5
    assert tiny_model.at(2) is system
    assert tiny_model.largest.k == 2
    with pytest.raises(ConfigError):
        tiny_model.at(3)


def test_hamiltonian_follows_envelope(tiny_model):
    system = tiny_model.at(1)
    H0, H1 = system.h0(0.0), system.h0(1.0)
    # hopping ramps from 0.5·0.2 to 0.2, the mass is untouched
    np.testing.assert_allclose(np.diag(H0), np.diag(H1))
    np.testing.assert_allclose(H1 - np.diag(np.diag(H1)), 2.0 * (H0 - np.diag(np.diag(H0))), atol=1e-14)
    assert not system.static
    assert system.is_stationary(-0.5, 2)
    assert not system.is_stationary(0.5, 1)


def test_hamiltonian_is_physical(tiny_model):
    H = tiny_model.at(2).h0_operator(0.5)
    assert H.hermitian
    assert H.parity == "even"
    assert is_number_conserving(H)


def test_perturbation_is_linear_potential(tiny_model):
    system = tiny_model.at(1)
    V = system.perturbation(0.3)
    n_left = system.observable("density0").dense()
    assert np.allclose(V, np.diag(np.diag(V)))
    np.testing.assert_allclose(np.trace(V @ n_left), 0.0, atol=1e-14)
    np.testing.assert_allclose(system.hamiltonian(0.5)(0.3), system.h0(0.3) + 0.5 * V)


def test_static_flag(static_model):
    assert static_model.at(1).static


def test_observables(tiny_model):
    system = tiny_model.at(1)
    ops = system.observables()
    assert sorted(ops) == ["current0", "density0", "identity"]
    assert ops["current0"].hermitian
    np.testing.assert_allclose(ops["identity"].dense(), np.eye(8))
    with pytest.raises(ConfigError):
        system.observable("magnetization")


def test_observable_outside_box(tiny_model):
    space = tiny_model.at(1).space
    with pytest.raises(ConfigError):
        build_observable({"type": "density", "site": [3]}, space, "far")
    with pytest.raises(ConfigError) as exc:
        build_observable({"type": "current", "site": [1], "axis": 0}, space, "edge")
    assert exc.value.pointer == "/observables/edge/site"


def test_inverse_k_scale(tiny_data):
    tiny_data["h0"].append({"type": "on-site", "mu": 1.0, "scale": "inverse-k"})
    model = Model(ModelConfig.from_dict(tiny_data))
    base = Model(ModelConfig.from_dict({**tiny_data, "h0": tiny_data["h0"][:2]}))
    shift = np.diag(model.at(1).h0(0.0) - base.at(1).h0(0.0)).real
    occupation = np.array([bin(b).count("1") for b in range(8)], dtype=float)
    np.testing.assert_allclose(shift, 2.0 * occupation)


def test_patch_cache_is_bounded(tiny_model, monkeypatch):
    monkeypatch.setattr("adiabatlab.models.model.MAX_CACHED_PATCHES", 2)
    system = tiny_model.at(1)
    first = system.patch(0.0)
    for t in (0.25, 0.5, 0.75):
        system.patch(t)
    assert list(system._patches) == [0.5, 0.75]
    es, patch = system.patch(0.0)
    np.testing.assert_allclose(es.eigenvalues, first[0].eigenvalues, atol=1e-14)
    assert patch.kappa == first[1].kappa
