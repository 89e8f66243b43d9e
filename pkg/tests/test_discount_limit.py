import warnings

import numpy as np
import pytest

from conftest import spec_for
from hjb_eigen.discount_limit import (back_forth_check, base_problem, c_of_gamma, changing_domain_solve,
                                      measure_identity_check, richardson, ugamma_limit, write_cgamma_csv)

LAMS = (0.16, 0.08, 0.04, 0.02, 0.01, 0.005)


def test_richardson_exact_on_polynomials():
    lams = np.array([0.4, 0.2, 0.1, 0.05])
    assert richardson(3.0 - 2.0 * lams, lams)[-1] == pytest.approx(3.0, abs=1e-14)
    assert richardson(3.0 - 2.0 * lams + 5 * lams**2, lams, order=2)[-1] == pytest.approx(3.0, abs=1e-12)
    F = np.stack([1 + lams, 2 - lams], axis=1)
    assert np.allclose(richardson(F, lams)[-1], [1.0, 2.0])


def test_zero_gamma_reduces_to_fixed_domain(discount_runs):
    spec, base, _ = discount_runs["bump"]
    run = changing_domain_solve(spec, 0.0, 0.05, 1 / 200, base)
    from hjb_eigen.hjb_solver import solve_discounted
    u = solve_discounted(base.mdp, 0.05, tol=1e-11).u
    assert np.allclose(run.field, u + base.c0 / 0.05, atol=1e-9)


def test_constant_cost_offset_vanishes_with_discount():
    # with f = K the normalized fields differ by K [((1 + g l)^-2 - 1) / l + 2 g] = O(l)
    h, g, K = 1 / 100, 0.5, 2.0
    for lam in (0.04, 0.01):
        a = changing_domain_solve(spec_for(), g, lam, h)
        b = changing_domain_solve(spec_for("constant", K=K), g, lam, h)
        s = 1 + g * lam
        expected = K * ((s**-2 - 1) / lam + 2 * g)
        assert np.allclose(b.field - a.field, expected, atol=1e-8)
    assert abs(expected) < 0.1 * K


def test_discount_bands_measured():
    run = changing_domain_solve(spec_for(), 1.0, 0.05, 1 / 100)
    # |lambda u + c(lambda)| <= C lambda with a modest constant
    assert run.band_own <= 5.0 * 2.0
    assert run.band_base <= 5.0 * 2.0


def test_zero_gamma_limit_is_ergodic_solution(discount_runs):
    _, base, curve = discount_runs["bump"]
    lim = curve.limits[0.0]
    assert np.max(np.abs(lim.extrapolated - base.u0)) <= 1e-4
    assert lim.residual <= 1e-9
    assert lim.cauchy_decreasing
    ratios = lim.cauchy[1:] / lim.cauchy[:-1]
    assert np.allclose(ratios, 0.5, atol=0.05)


def test_limits_decrease_in_gamma(discount_runs):
    spec, base, _ = discount_runs["bump"]
    up = ugamma_limit(spec, 1.0, LAMS[:4], 1 / 200, base)
    down = ugamma_limit(spec, -1.0, LAMS[:4], 1 / 200, base)
    assert np.all(up.extrapolated <= down.extrapolated + 1e-6)


@pytest.mark.parametrize("f", ["zero", "bump"])
def test_C_curve_shape(discount_runs, f):
    _, _, curve = discount_runs[f]
    assert curve.C[curve.gammas == 0][0] == 0.0
    assert curve.decreasing and curve.concave
    assert np.all(curve.defects <= 10 * curve.tol)


def test_C_needs_zero_sample():
    with pytest.raises(ValueError):
        c_of_gamma(spec_for(), gammas=(-0.25, 0.25), lambdas=LAMS[:3], h=1 / 50)


def test_back_forth_zero_cost_linear(discount_runs):
    spec, base, curve = discount_runs["zero"]
    rep = back_forth_check(spec, base=base, curve=curve)
    # -C'(0) = c'(0) = -q c_h(0)
    assert rep.neg_Cprime_plus == pytest.approx(-1.5 * base.c0, rel=0.02)
    assert rep.mismatch_plus <= 0.02 and rep.mismatch_minus <= 0.02
    assert rep.linearity is not None and rep.linearity < 1e-4


def test_back_forth_bump_ordering(discount_runs):
    spec, base, curve = discount_runs["bump"]
    rep = back_forth_check(spec, base=base, curve=curve)
    assert rep.ordered


def test_measure_identities_zero_cost(discount_runs):
    spec, base, curve = discount_runs["zero"]
    rep = measure_identity_check(spec, gamma=0.25, base=base, limits=dict(curve.limits))
    assert rep.max_a <= 1e-6
    assert rep.max_b <= 1e-4
    assert rep.max_c <= 1e-6
    assert set(rep.residual_a) == {0.0, -0.5, 0.5}


def test_measure_identity_rejects_mismatched_lambdas(discount_runs):
    spec, base, curve = discount_runs["zero"]
    with pytest.raises(ValueError):
        measure_identity_check(spec, gamma=0.25, lambdas=LAMS[:3], base=base, limits=dict(curve.limits))


def test_cgamma_csv(tmp_path, discount_runs):
    write_cgamma_csv(tmp_path / "c.csv", discount_runs["zero"][2])
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "gamma,C,defect"
