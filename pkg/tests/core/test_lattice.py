import numpy as np
import pytest

from adiabatlab.core.lattice import Box, SiteSet, build_box, centred_sites, diameter, fatten
from adiabatlab.errors import ConfigError, ResourceLimit


def test_box_sites_and_size():
    box = build_box(2, d=1)
    assert len(box) == 5
    assert box.sites == ((-2,), (-1,), (0,), (1,), (2,))
    assert len(build_box(1, d=2)) == 9


def test_open_metric_is_l1():
    box = build_box(2, d=2)
    assert box.distance((-2, -2), (2, 2)) == 8
    assert box.distance((0, 1), (1, -1)) == 3


def test_periodic_metric_wraps():
    box = build_box(2, d=1, bc="periodic")
    assert box.distance((-2,), (2,)) == 1
    assert box.distance((-2,), (0,)) == 2
    # agrees with the open metric up to distance k
    open_box = build_box(2, d=1)
    mask = open_box.metric <= 2
    np.testing.assert_array_equal(box.metric[mask], open_box.metric[mask])


def test_metric_symmetric_with_zero_diagonal():
    box = build_box(2, d=2, bc="periodic")
    np.testing.assert_array_equal(box.metric, box.metric.T)
    assert np.all(np.diag(box.metric) == 0)


def test_diameter():
    assert diameter([]) == 0
    assert diameter([(3,)]) == 0
    assert SiteSet.of([[0, 0], [1, 2]]).diameter == 3
    assert build_box(2, d=1, bc="periodic").diameter([(-2,), (2,)]) == 1


def test_fatten():
    assert fatten([(0,)], 0) == SiteSet([(0,)])
    assert fatten([(0,)], 2) == centred_sites(2, 1)
    ball = fatten([(0, 0)], 1)
    assert len(ball) == 5
    assert fatten([], 3) == SiteSet()
    with pytest.raises(ValueError):
        fatten([(0,)], -1)


def test_box_fatten_is_clipped():
    box = build_box(2, d=1)
    assert box.fatten([(2,)], 3) == SiteSet([(-1,), (0,), (1,), (2,)])


def test_subbox():
    box = build_box(3, d=2)
    assert box.subbox(1) == centred_sites(1, 2)
    with pytest.raises(ValueError):
        box.subbox(4)


def test_distance_sum():
    box = build_box(2, d=1)
    total = box.distance_sum([(-2,)], [(0,), (2,)], lambda r: r)
    assert total == 6.0
    assert box.distance_sum([], [(0,)], lambda r: r) == 0.0


def test_boxes_are_values():
    assert Box(2, 1, "open") == build_box(2)
    assert len({Box(2), Box(2), Box(3)}) == 2


def test_build_box_validation():
    with pytest.raises(ConfigError):
        build_box(0)
    with pytest.raises(ConfigError):
        build_box(1, bc="twisted")
    with pytest.raises(ResourceLimit):
        build_box(10, d=2, site_budget=100)
