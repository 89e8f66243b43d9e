import numpy as np
import pytest

from hjb_eigen.geometry import (DegenerateGridError, InvalidDomainError, InvalidScaleError, ScalingSchedule,
                                build_grid, check_condition_A, dilated_grid, domain_from_config,
                                lattice_compatible, make_domain, node_map, radial_domain, scale_domain)


def test_interval_grid_layout():
    g = build_grid(make_domain("interval", a=1.0), 1 / 200)
    assert g.n == 401
    assert g.points[g.origin_index, 0] == 0.0
    assert np.flatnonzero(g.boundary).tolist() == [0, 400]
    assert g.x[0] == -1.0 and g.x[-1] == 1.0


def test_interval_needs_integer_ratio():
    with pytest.raises(DegenerateGridError):
        build_grid(make_domain("interval", a=1.0), 0.3)


def test_grid_spacing_must_resolve_domain():
    with pytest.raises(DegenerateGridError):
        build_grid(make_domain("interval", a=1.0), 1.0)


def test_disk_grid_inside_and_boundary_flags():
    d = make_domain("disk", R=1.0)
    g = build_grid(d, 0.1)
    assert np.all(np.hypot(*g.points.T) <= 1.0 + 1e-12)
    # a node is boundary exactly when some lattice neighbour is missing
    assert np.array_equal(g.boundary, np.any(g.nbr < 0, axis=(0, 2)))
    assert not g.boundary[g.origin_index]


def test_scaling_composes_multiplicatively():
    d = make_domain("interval", a=1.0)
    dd = scale_domain(scale_domain(d, 0.2), -0.5)
    assert dd.half_width == pytest.approx(1.2 * 0.5)


def test_scale_factor_must_stay_positive():
    with pytest.raises(InvalidScaleError):
        scale_domain(make_domain("disk", R=1.0), -1.0)


@pytest.mark.parametrize("kwargs", [{"kind": "interval", "a": -1.0}, {"kind": "disk", "R": 0.0},
                                    {"kind": "radial", "rho": [1.0, -0.2, 1.0, 1.0]}, {"kind": "triangle"}])
def test_invalid_domains(kwargs):
    with pytest.raises(InvalidDomainError):
        make_domain(**kwargs)


def test_condition_A_interval_exact():
    rep = check_condition_A(make_domain("interval", a=2.0))
    # dist((1+r)a, [-a, a]) = r a
    assert rep.kappa_distance == pytest.approx(2.0, rel=1e-12)
    assert rep.kappa == pytest.approx(2.0)


def test_condition_A_disk_close_to_radius():
    rep = check_condition_A(make_domain("disk", R=1.5))
    assert rep.kappa_ball == pytest.approx(1.5, rel=1e-3)
    assert rep.kappa_distance == pytest.approx(1.5, rel=1e-2)


def test_condition_A_star_shaped_profile():
    d = radial_domain(lambda t: 1.0 + 0.3 * np.cos(3 * t))
    rep = check_condition_A(d)
    assert 0 < rep.kappa <= 0.7 + 1e-3


def test_lattice_compatibility():
    d = make_domain("interval", a=1.0)
    assert lattice_compatible(d, 1 / 200, 0.2)
    assert not lattice_compatible(d, 1 / 200, 0.0013)


def test_dilated_grid_maps_nodes():
    base = build_grid(make_domain("interval", a=1.0), 0.05)
    g = dilated_grid(base, 1.3)
    assert np.allclose(g.points, 1.3 * base.points)
    assert g.domain.half_width == pytest.approx(1.3)


def test_node_map_embeds_inner_grid():
    d = make_domain("interval", a=1.0)
    small, large = build_grid(d, 0.05), build_grid(scale_domain(d, 0.5), 0.05)
    idx = node_map(small, large)
    assert np.all(idx >= 0)
    assert np.allclose(large.points[idx], small.points)


def test_schedule_rejects_offset_rule():
    with pytest.raises(InvalidScaleError):
        ScalingSchedule(rule=lambda l: 0.1 + l).check()
    with pytest.raises(InvalidScaleError):
        ScalingSchedule(gamma=5.0, samples=(-0.32, 0.0, 0.32)).check()


def test_domain_config_roundtrip():
    d = scale_domain(make_domain("disk", R=2.0), 0.5)
    assert domain_from_config(d.to_config()) == d
