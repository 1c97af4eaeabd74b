import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixedsobolev import gagliardo
from mixedsobolev.core import RadialFn, h1_seminorm_sq, make_grid
from mixedsobolev.gagliardo import (KernelAssemblyError, assemble_kernel, exterior_coefficient, load_kernel,
                                    pairing, radial_kernel, save_kernel, seminorm_sq)

from oracles import kernel_by_angular_quadrature, kernel_n3, polynomial_bump_seminorm_sq


def coarse(n=5, R=1.0):
    return make_grid(n, R, degree=6, max_panel=1 / 8)


def bump(grid, a=2):
    return RadialFn(grid, np.clip(1 - (grid.nodes / grid.radius) ** 2, 0, None) ** a)


def test_pointwise_kernel_symmetric_and_positive(kernel5):
    E = kernel5.entries
    off = ~np.eye(E.shape[0], dtype=bool)
    interior = off.copy()
    interior[0, :] = interior[:, 0] = False
    # the weight (r rho)^(n-1) vanishes at the origin node
    assert np.all(E[off] >= 0) and np.all(E[interior] > 0)
    np.testing.assert_array_equal(E, E.T)
    assert np.all(np.isinf(np.diag(E)))


def test_form_symmetric_and_semidefinite(kernel5):
    G = kernel5.form
    np.testing.assert_array_equal(G, G.T)
    f = slice(0, G.shape[0] - 1)
    assert np.linalg.eigvalsh(G[f, f]).min() > -1e-8 * np.abs(G).max()


@pytest.mark.parametrize("s", [0.1, 0.3, 0.5, 0.9])
def test_n3_kernel_matches_elementary_form(s):
    r = np.array([0.01, 0.2, 0.5, 0.9, 3.0])
    rho = np.array([0.02, 0.7, 0.45, 0.1, 2.0])
    np.testing.assert_allclose(radial_kernel(r, rho, s, 3), kernel_n3(r, rho, s), rtol=1e-8)


@pytest.mark.parametrize("n, s, r, rho", [(4, 0.25, 0.3, 0.8), (5, 0.5, 0.6, 0.61),
                                          (6, 0.75, 0.2, 0.9), (7, 0.4, 1.0, 0.05)])
def test_kernel_matches_angular_quadrature(n, s, r, rho):
    assert radial_kernel(r, rho, s, n) == pytest.approx(kernel_by_angular_quadrature(r, rho, s, n), rel=1e-8)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_kernel_singularity_exponent(s):
    r0 = 0.5
    d = np.geomspace(1e-3, 1e-5, 5)
    k = radial_kernel(r0, r0 + d, s, 5)
    slope = np.polyfit(np.log(d), np.log(k), 1)[0]
    assert slope == pytest.approx(-(1 + 2 * s), rel=0.05)


def test_zero_function_has_zero_seminorm(kernel5, grid5):
    assert seminorm_sq(RadialFn(grid5, np.zeros(grid5.size)), kernel5) == 0.0


@pytest.mark.parametrize("n, s", [(5, 0.5), (3, 0.25), (4, 0.75)])
def test_polynomial_bump_against_fourier(n, s):
    g = coarse(n)
    k = assemble_kernel(g, s)
    assert seminorm_sq(bump(g), k) == pytest.approx(polynomial_bump_seminorm_sq(n, s), rel=1e-6)


@pytest.mark.parametrize("t", [0.5, 3.0])
def test_scaling_law(t):
    n, s = 5, 0.5
    g = coarse(n)
    gt = g.scaled(t)
    u = bump(g)
    # u_t(x) = t^{-(n-2)/2} u(x/t) keeps the Dirichlet energy fixed
    ut = RadialFn(gt, t ** (-(n - 2) / 2) * u.values)
    assert h1_seminorm_sq(ut) == pytest.approx(h1_seminorm_sq(u), rel=1e-12)
    ratio = seminorm_sq(ut, assemble_kernel(gt, s)) / seminorm_sq(u, assemble_kernel(g, s))
    assert ratio == pytest.approx(t ** (2 - 2 * s), rel=0.01)


def test_restricted_square_and_exterior_split():
    n, s = 5, 0.5
    g = coarse(n)
    full = assemble_kernel(g, s)
    inner = assemble_kernel(g, s, exterior=False)
    one = RadialFn(g, np.ones(g.size), zero_trace=False)
    assert abs(seminorm_sq(one, inner)) < 1e-9
    u = RadialFn(g, (1 - g.nodes**2) * np.cos(g.nodes))
    kappa = exterior_coefficient(g.nodes[:-1], g.radius, s, n)
    tail = 2 * np.sum(g.base_weights[:-1] * u.values[:-1] ** 2 * kappa)
    assert seminorm_sq(u, full) - seminorm_sq(u, inner) == pytest.approx(tail, rel=1e-6)


_g = coarse()
_k = assemble_kernel(_g, 0.5)
_f = np.stack([(1 - _g.nodes**2) * _g.nodes**j for j in range(3)])


@settings(max_examples=30, deadline=None)
@given(a=st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       b=st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_polarization(a, b):
    u = RadialFn(_g, np.dot(a, _f))
    v = RadialFn(_g, np.dot(b, _f))
    lhs = 4 * pairing(u, v, _k)
    rhs = seminorm_sq(u + v, _k) - seminorm_sq(u - v, _k)
    scale = seminorm_sq(u, _k) + seminorm_sq(v, _k) + 1e-12
    assert abs(lhs - rhs) <= 1e-10 * scale
    assert pairing(u, v, _k) == pairing(v, u, _k)


def test_cache_round_trip_is_bit_identical(tmp_path):
    g = coarse()
    a = assemble_kernel(g, 0.5, cache_dir=tmp_path)
    b = assemble_kernel(g, 0.5, cache_dir=tmp_path)
    assert len(list(tmp_path.iterdir())) == 1
    np.testing.assert_array_equal(a.form, b.form)
    np.testing.assert_array_equal(a.entries, b.entries)
    with pytest.raises(ValueError, match="different grid"):
        load_kernel(next(tmp_path.iterdir()), make_grid(5, 1.0, degree=5, max_panel=1 / 8))


def test_thread_count_does_not_change_form():
    g = coarse()
    np.testing.assert_array_equal(assemble_kernel(g, 0.3, threads=1).form,
                                  assemble_kernel(g, 0.3, threads=3).form)


def test_save_and_load(tmp_path):
    g = coarse()
    k = assemble_kernel(g, 0.5)
    save_kernel(k, tmp_path / "k.npz")
    k2 = load_kernel(tmp_path / "k.npz", g)
    assert k2.key == k.key
    np.testing.assert_array_equal(k2.form, k.form)


def test_mismatched_grid_rejected(kernel5):
    with pytest.raises(ValueError, match="different grids"):
        seminorm_sq(bump(coarse()), kernel5)


def test_non_finite_off_band_entry_raises(monkeypatch):
    real = gagliardo.radial_kernel

    def broken(r, rho, s, n):
        out = np.array(real(r, rho, s, n), dtype=float)
        far = np.abs(np.asarray(r) - np.asarray(rho)) > 0.4
        out[far] = np.nan
        return out

    monkeypatch.setattr(gagliardo, "radial_kernel", broken)
    with pytest.raises(KernelAssemblyError):
        assemble_kernel(coarse(), 0.5)


@pytest.mark.parametrize("s", [0.0, 1.0, -0.2])
def test_rejects_bad_order(s):
    with pytest.raises(ValueError):
        assemble_kernel(coarse(), s)
