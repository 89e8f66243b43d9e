import numpy as np
from hypothesis import given, settings, strategies as st

from hjb_eigen.discount_limit import richardson
from hjb_eigen.geometry import build_grid, make_domain, node_map, scale_domain
from hjb_eigen.lagrangian import LagrangianSpec, hamiltonian_value, lagrangian_value, running_cost
from hjb_eigen.markov_chain import assemble_mdp

finite = dict(allow_nan=False, allow_infinity=False)


@given(p=st.floats(2.05, 6.0), xi=st.floats(-5, 5, **finite), v=st.floats(-50, 50, **finite))
def test_young_inequality(p, xi, v):
    spec = LagrangianSpec(p, 0.1)
    # xi v <= H(x, xi) + L(x, v) for the conjugate pair, with equality at the maximizer
    assert xi * v <= hamiltonian_value(spec, 0.0, xi)[0] + lagrangian_value(spec, 0.0, v)[0] + 1e-9 * (1 + abs(xi * v))


@given(p=st.floats(2.05, 6.0), xi=st.floats(-5, 5, **finite))
def test_young_equality_at_maximizer(p, xi):
    spec = LagrangianSpec(p, 0.1)
    v = np.sign(xi) * (abs(xi) / (spec.C_p * spec.q)) ** (p - 1)
    gap = hamiltonian_value(spec, 0.0, xi)[0] + lagrangian_value(spec, 0.0, v)[0] - xi * v
    assert abs(gap) <= 1e-9 * (1 + abs(xi) ** p)


_MDP = assemble_mdp(build_grid(make_domain("interval", a=1.0), 0.05), LagrangianSpec(3.0, 0.1))


@given(st.lists(st.floats(-1e3, 1e3, **finite), min_size=1, max_size=30))
def test_weights_nonnegative(vs):
    wm, wp = _MDP.weights(np.array(vs))
    assert wm.min() >= 0 and wp.min() >= 0


@given(r1=st.floats(-0.9, 2.0), r2=st.floats(-0.9, 2.0))
def test_scale_composition(r1, r2):
    d = make_domain("disk", R=1.3)
    assert np.isclose(scale_domain(scale_domain(d, r1), r2).half_width, 1.3 * (1 + r1) * (1 + r2))


@given(k=st.integers(1, 20))
def test_node_map_roundtrip(k):
    d = make_domain("interval", a=1.0)
    h = 1 / 20
    small = build_grid(d, h)
    large = build_grid(scale_domain(d, k * h), h)
    idx = node_map(small, large)
    assert np.all(idx >= 0)
    assert np.array_equal(node_map(large, small)[idx], np.arange(small.n))


@given(a=st.floats(-10, 10, **finite), b=st.floats(-10, 10, **finite), c=st.floats(-10, 10, **finite))
def test_richardson_removes_powers(a, b, c):
    lams = np.array([0.16, 0.08, 0.04, 0.02])
    assert np.isclose(richardson(a + b * lams, lams)[-1], a, atol=1e-10)
    assert np.isclose(richardson(a + b * lams + c * lams**2, lams, order=2)[-1], a, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(K=st.floats(-5, 5, **finite), x=st.floats(-1, 1, **finite), name=st.sampled_from(["bump", "cosine", "affine"]))
def test_shifted_cost_value(K, x, name):
    f = running_cost(name)
    assert np.isclose(f.shifted(K)(np.array([x]))[0], f(np.array([x]))[0] + K)
