import numpy as np
import pytest

from conftest import mdp_for, spec_for
from hjb_eigen.ergodic_lp import (ScalingMismatch, boundary_row_experiment, ergodic_lp_solve, mather_pairing,
                                  onesided_derivatives, random_face_measures, scale_measure,
                                  semiconvexity_probe, stationarity_residual, eigencurve, write_measure_csv)
from hjb_eigen.geometry import ScalingSchedule, build_grid, make_domain
from hjb_eigen.hjb_solver import solve_ergodic_policy
from hjb_eigen.lagrangian import radial_gradient_pairing

# c_h at p=3, eps=0.1, (-1,1), h=1/200; frozen from average-cost policy iteration,
# a solver route independent of the LP
FROZEN = {"zero": -0.0416548489566, "bump": -0.38380293789868, "cosine": 0.39893073004666}


@pytest.fixture(scope="module")
def results():
    return {f: ergodic_lp_solve(mdp_for(f)) for f in ("zero", "bump", "cosine", "affine")}


@pytest.mark.parametrize("f", sorted(FROZEN))
def test_frozen_constants(results, f):
    assert results[f].c_h == pytest.approx(FROZEN[f], abs=1e-10)
    assert solve_ergodic_policy(mdp_for(f)).c == pytest.approx(FROZEN[f], abs=1e-10)


@pytest.mark.parametrize("f", ["zero", "bump", "cosine", "affine"])
def test_certificate_and_measure(results, f):
    res = results[f]
    mu = res.measure
    assert abs(res.duality_gap) <= 1e-8
    assert mu.total == pytest.approx(1.0, abs=1e-12) and mu.mass.min() >= 0
    assert stationarity_residual(res.mdp, mu) <= 1e-8
    # the invariant measure pays exactly -c
    L = lambda x, v: res.mdp.spec.C_p * np.abs(v) ** res.mdp.spec.q + res.mdp.spec.f(x)
    assert mather_pairing(mu, L) == pytest.approx(-res.c_h, abs=1e-9)


@pytest.mark.parametrize("K", [-3.0, 7.0])
def test_constant_shift(K):
    base = ergodic_lp_solve(mdp_for("bump", 1 / 100)).c_h
    spec = spec_for("bump")
    from hjb_eigen.markov_chain import assemble_mdp
    g = build_grid(make_domain("interval", a=1.0), 1 / 100)
    shifted = ergodic_lp_solve(assemble_mdp(g, spec.with_f(spec.f.shifted(K)))).c_h
    assert shifted == pytest.approx(base - K, abs=1e-10)


def test_derivative_identity_for_zero_cost(results):
    d = onesided_derivatives(results["zero"])
    q = 1.5
    assert abs(d.c_plus + q * results["zero"].c_h) <= 1e-8
    assert abs(d.c_minus + q * results["zero"].c_h) <= 1e-8


@pytest.mark.parametrize("f", ["bump", "cosine", "affine"])
def test_face_measures_bracket_by_derivatives(results, f):
    res = results[f]
    d = onesided_derivatives(res)
    spec = res.mdp.spec
    P = lambda x, v: radial_gradient_pairing(spec, x, v)
    for mu in random_face_measures(res, k=3, seed=2):
        val = mather_pairing(mu, P)
        assert d.c_minus - 1e-6 <= val <= d.c_plus + 1e-6


def test_scale_measure_preserves_mass(results):
    mu = results["bump"].measure
    target = build_grid(make_domain("interval", a=1.0), 1 / 200)
    out = scale_measure(mu, 0.3, target)
    assert out.total == pytest.approx(mu.total)
    # centre of mass contracts by 1/(1+r)
    assert out.mass @ out.points[:, 0] == pytest.approx((mu.mass @ mu.points[:, 0]) / 1.3, abs=1e-12)
    with pytest.raises(ScalingMismatch):
        scale_measure(mu, -0.5, build_grid(make_domain("interval", a=0.5), 1 / 200))


def test_reflected_rows_lose_the_constant():
    out = boundary_row_experiment(spec_for(), h=1 / 50)
    assert out["inward"] < -0.03
    assert abs(out["reflected"]) < 1e-9


def test_semiconvexity_probe_needs_uniform_grid():
    cur = eigencurve(spec_for(), schedule=ScalingSchedule(samples=(-0.04, 0.0, 0.02)), h=1 / 50, derivatives=False)
    with pytest.raises(ValueError):
        semiconvexity_probe(cur)


def test_zero_cost_curve_follows_dilation_law():
    cur = eigencurve(spec_for(), schedule=ScalingSchedule(samples=(-0.2, 0.0, 0.2)), h=1 / 100,
                     grid_mode="dilated", derivatives=False)
    assert np.allclose(cur.c, cur.c[1] * (1 + cur.r) ** -1.5, rtol=1e-10)
    assert cur.monotone


def test_measure_csv(tmp_path, results):
    write_measure_csv(tmp_path / "mu.csv", results["zero"].measure)
    lines = (tmp_path / "mu.csv").read_text().splitlines()
    assert len(lines) == len(results["zero"].measure.mass) + 1


def test_two_dimensional_disk_identity():
    from hjb_eigen.markov_chain import assemble_mdp
    g = build_grid(make_domain("disk", R=1.0), 0.1)
    res = ergodic_lp_solve(assemble_mdp(g, spec_for()))
    d = onesided_derivatives(res)
    assert abs(res.duality_gap) < 1e-8
    assert abs(d.c_plus + 1.5 * res.c_h) < 1e-8
