import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixedsobolev.bubbles import Bubble, eval_bubble
from mixedsobolev.core import (RadialFn, h1_seminorm_sq, lp_norm, make_grid, make_params, sphere_area)

from oracles import bubble_lp_pow


def test_make_params_derives_two_star():
    assert make_params(3, 0.5, 0.0, 1.0, 0.25).two_star == 6
    assert make_params(5, 0.5, 0.1, 1.0, 0.2).two_star == pytest.approx(10 / 3, abs=1e-15)


@pytest.mark.parametrize("args, msg", [
    ((2, 0.5, 0.0, 1.0, 0.25), "dimension"),
    ((3, 1.2, 0.0, 1.0, 0.25), "s out of range"),
    ((3, 0.0, 0.0, 1.0, 0.25), "s out of range"),
    ((3, 0.5, -0.1, 1.0, 0.25), "gamma"),
    ((3, 0.5, 0.0, 1.0, 0.3), "does not fit"),
    ((3, 0.5, 0.0, -1.0, 0.1), "domain_radius"),
])
def test_make_params_rejects(args, msg):
    with pytest.raises(ValueError, match=msg):
        make_params(*args)


def test_grid_endpoints_and_order(grid5):
    assert grid5.nodes[0] == 0.0 and grid5.nodes[-1] == 1.0
    assert np.all(np.diff(grid5.nodes) > 0)
    assert 0.25 in grid5.panels and 0.5 in grid5.panels


@pytest.mark.parametrize("kind", ["geometric", "algebraic"])
def test_quadrature_exactness(kind):
    n = 5
    g = make_grid(n, 1.0, kind=kind)
    for k in range(g.exact_degree + 1):
        approx = np.dot(g.quad_weights, g.nodes**k)
        assert approx == pytest.approx(1.0 / (k + n), abs=1e-10)


def test_lp_norm_constant_function_is_ball_volume():
    g = make_grid(3, 1.0)
    u = RadialFn(g, np.ones(g.size), zero_trace=False)
    assert lp_norm(u, 1) == pytest.approx(4 * math.pi / 3, rel=1e-12)


def test_lp_norm_of_zero_and_bad_exponent(grid5):
    z = RadialFn(grid5, np.zeros(grid5.size))
    assert lp_norm(z, 2) == 0.0
    assert h1_seminorm_sq(z) == 0.0
    with pytest.raises(ValueError):
        lp_norm(z, 0.5)


def test_lp_norm_of_bubble_against_adaptive_quadrature():
    n, eps, R = 5, 0.1, 1.0
    g = make_grid(n, R, breakpoints=(eps,))
    b = Bubble(eps, n)
    u = RadialFn.sample(g, lambda r: eval_bubble(b, r), zero_trace=False)
    p = 2 * n / (n - 2)
    ref = bubble_lp_pow(n, eps, p, R) ** (1 / p)
    assert lp_norm(u, p) == pytest.approx(ref, rel=1e-9)


def test_h1_two_resolutions_agree(params5):
    from mixedsobolev.bubbles import default_grid, make_Ueps

    coarse = default_grid(params5, degree=6)
    fine = default_grid(params5, degree=10)
    a = h1_seminorm_sq(make_Ueps(params5, 0.05, coarse))
    b = h1_seminorm_sq(make_Ueps(params5, 0.05, fine))
    # spectral convergence in the degree: the coarse error bounds the difference
    assert abs(a - b) <= 1e-6 * b


def test_radialfn_zero_trace_and_exterior(grid5):
    v = np.linspace(1.0, 0.0, grid5.size)
    u = RadialFn(grid5, v)
    assert u(np.array([1.0 + 1e-12, 2.0, 50.0])).tolist() == [0.0, 0.0, 0.0]
    bad = v.copy()
    bad[-1] = 1.0
    with pytest.raises(ValueError):
        RadialFn(grid5, bad)


def test_radialfn_values_are_read_only(grid5):
    u = RadialFn(grid5, np.zeros(grid5.size))
    with pytest.raises(ValueError):
        u.values[0] = 1.0


def test_sphere_area():
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(2) == pytest.approx(2 * math.pi)


_grid = make_grid(5, 1.0, degree=6)
_base = (1 - _grid.nodes**2) * (1 + _grid.nodes)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(-1e3, 1e3, allow_nan=False).filter(lambda x: abs(x) > 1e-6),
       p=st.floats(1.0, 10 / 3))
def test_norms_are_homogeneous(c, p):
    u = RadialFn(_grid, _base)
    assert lp_norm(u * c, p) == pytest.approx(abs(c) * lp_norm(u, p), rel=1e-12)
    assert h1_seminorm_sq(u * c) == pytest.approx(c * c * h1_seminorm_sq(u), rel=1e-12)
