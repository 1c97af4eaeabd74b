"""Gagliardo seminorm of radial functions on a ball, extended by zero.

After integrating out the angles,

    [u]_s^2 = int_0^inf int_0^inf (u(r) - u(rho))^2 K(r, rho) dr drho,

    K(r, rho) = |S^{n-1}| r^{n-1} rho^{n-1} * |S^{n-2}| int_0^pi
                (r^2 + rho^2 - 2 r rho cos t)^{-(n+2s)/2} sin^{n-2} t dt.

The angular integral is ``|S^{n-1}| M^{-(n+2s)} 2F1((n+2s)/2, 1+s; n/2; (m/M)^2)``
with ``m, M`` the smaller/larger radius.  Euler's transformation isolates the
diagonal singularity, ``K = H(r, rho) |r - rho|^{-1-2s}`` with

    H = |S^{n-1}|^2 (r rho)^{n-1} M^{2+2s-n} (r + rho)^{-1-2s} 2F1(-s, n/2-1-s; n/2; (m/M)^2),

and ``H`` bounded.  Pairs with one point outside the ball contribute
``2 int_0^R u(r)^2 kappa(r) dr`` where ``kappa`` is again hypergeometric.

The discrete form is a Galerkin matrix on the continuous piecewise-polynomial
space of the grid: tensor Gauss on well-separated panel pairs, recursive
bisection for close pairs, Duffy coordinates with Gauss-Jacobi rules on
coincident and touching panels.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import RadialFn, RadialGrid, gauss_rule, jacobi_rule, lagrange_matrix, sphere_area

__all__ = [
    "KernelMatrix",
    "KernelAssemblyError",
    "radial_kernel",
    "kernel_regular_part",
    "exterior_coefficient",
    "assemble_kernel",
    "seminorm_sq",
    "pairing",
    "save_kernel",
    "load_kernel",
]

ADMISSIBILITY = 1.0
MAX_BISECTION_DEPTH = 30
SINGULAR_ORDER = 16


class KernelAssemblyError(RuntimeError):
    def __init__(self, msg, entry=None):
        super().__init__(msg)
        self.entry = entry


def _phi(s, n, z):
    return special.hyp2f1(-s, 0.5 * n - 1.0 - s, 0.5 * n, z)


def kernel_regular_part(r, rho, s: float, n: int):
    """``H(r, rho) = K(r, rho) |r - rho|^{1+2s}``; bounded near the diagonal."""
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    M = np.maximum(r, rho)
    m = np.minimum(r, rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(M > 0, (m / np.where(M > 0, M, 1.0)) ** 2, 0.0)
        out = (
            sphere_area(n) ** 2
            * (r * rho) ** (n - 1)
            * np.where(M > 0, M, 1.0) ** (2.0 + 2.0 * s - n)
            * np.where(r + rho > 0, r + rho, 1.0) ** (-1.0 - 2.0 * s)
            * _phi(s, n, z)
        )
    return np.where(M > 0, out, 0.0)


def radial_kernel(r, rho, s: float, n: int):
    """Angular-reduced kernel ``K(r, rho)`` including both ``r^{n-1} rho^{n-1}`` weights."""
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return kernel_regular_part(r, rho, s, n) * np.abs(r - rho) ** (-1.0 - 2.0 * s)


def exterior_coefficient(r, R: float, s: float, n: int):
    """``kappa(r) = int_R^inf K(r, rho) drho`` for ``0 <= r < R`` (closed form)."""
    r = np.asarray(r, dtype=float)
    z = (r / R) ** 2
    return (
        sphere_area(n) ** 2
        * r ** (n - 1)
        * R ** (-2.0 * s)
        / (2.0 * s)
        * (1.0 - z) ** (-2.0 * s)
        * special.hyp2f1(-s, 0.5 * n - s, 0.5 * n, z)
    )


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Pointwise kernel at node pairs plus the assembled Gagliardo Galerkin form.

    ``entries[i, j] = K(r_i, r_j)`` (``inf`` on the diagonal), ``band`` flags
    node pairs whose panels coincide or touch (singular treatment), ``form`` is
    the symmetric matrix with ``u @ form @ u = [u]_s^2``.  With
    ``exterior=False`` the form only covers the square ``B_R x B_R``.
    """

    s: float
    n: int
    grid: RadialGrid
    entries: np.ndarray
    band: np.ndarray
    form: np.ndarray
    exterior: bool = True

    @property
    def key(self) -> tuple:
        return (self.n, self.s, self.grid.hash, self.exterior)


# ---------------------------------------------------------------------------
# assembly pieces


def _far_field(grid, s, n, threads):
    P, q = grid.n_panels, grid.n_gauss
    xg, wg = grid.gauss
    X, W = xg.ravel(), wg.ravel()
    pan = np.repeat(np.arange(P), q)
    b, h = grid.panels, np.diff(grid.panels)
    gap = b[None, :-1] - b[1:, None]
    gap = np.maximum(gap, gap.T)
    adm = gap >= ADMISSIBILITY * np.maximum(h[:, None], h[None, :])
    np.fill_diagonal(adm, False)

    Kq = np.zeros((X.size, X.size))
    blocks = np.array_split(np.arange(X.size), max(1, 4 * threads))

    def work(rows):
        mask = adm[pan[rows][:, None], pan[None, :]]
        rr = np.broadcast_to(X[rows, None], mask.shape)[mask]
        cc = np.broadcast_to(X[None, :], mask.shape)[mask]
        blk = np.zeros(mask.shape)
        blk[mask] = radial_kernel(rr, cc, s, n)
        Kq[rows] = blk * W[rows, None] * W[None, :]

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            list(ex.map(work, blocks))
    else:
        for rows in blocks:
            work(rows)

    bad = ~np.isfinite(Kq)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise KernelAssemblyError(
            f"non-finite far-field kernel at r={X[i]:.6g}, rho={X[j]:.6g}", entry=(int(i), int(j)))
    Gq = -2.0 * Kq
    Gq[np.diag_indices_from(Gq)] += 2.0 * Kq.sum(axis=1)
    I = grid.interp_matrix()
    return I.T @ Gq @ I, adm


def _self_pairs(grid, s, n, G):
    p = grid.degree
    xr = grid._ref[0]
    X, wx = jacobi_rule(SINGULAR_ORDER, 2.0 - 2.0 * s)
    E, we = jacobi_rule(SINGULAR_ORDER, 1.0 - 2.0 * s)
    X, E = np.meshgrid(X, E, indexing="ij")
    w = np.outer(wx, we).ravel()
    X, E = X.ravel(), E.ravel()
    # reference coordinates in [-1, 1]: r <-> X, rho <-> X (1 - eta)
    B = lagrange_matrix(xr, 2.0 * X - 1.0) - lagrange_matrix(xr, 2.0 * X * (1.0 - E) - 1.0)
    for e in range(grid.n_panels):
        a, h = grid.panels[e], grid.panels[e + 1] - grid.panels[e]
        r, rho = a + h * X, a + h * X * (1.0 - E)
        c = 2.0 * w * h ** (1.0 - 2.0 * s) * kernel_regular_part(r, rho, s, n) / (X * E) ** 2
        sl = grid.panel_dofs(e)
        G[sl, sl] += (B * c[:, None]).T @ B


def _touching_pairs(grid, s, n, G):
    p = grid.degree
    xr = grid._ref[0]
    Xi, wxi = jacobi_rule(SINGULAR_ORDER, 2.0 - 2.0 * s)
    Et, wet = gauss_rule(SINGULAR_ORDER)
    Xi, Et = np.meshgrid(Xi, Et, indexing="ij")
    w = np.outer(wxi, wet).ravel()
    Xi, Et = Xi.ravel(), Et.ravel()
    # triangle 1: x = xi, y = xi*eta ; triangle 2: y = xi, x = xi*eta
    parts = []
    for x, y in ((Xi, Xi * Et), (Xi * Et, Xi)):
        Bl = lagrange_matrix(xr, 1.0 - 2.0 * x)  # left panel, r = c - h1 x
        Br = lagrange_matrix(xr, 2.0 * y - 1.0)  # right panel, rho = c + h2 y
        B = np.zeros((x.size, 2 * p + 1))
        B[:, : p + 1] += Bl
        B[:, p:] -= Br
        parts.append((x, y, B))
    for e in range(grid.n_panels - 1):
        c0 = grid.panels[e + 1]
        h1 = c0 - grid.panels[e]
        h2 = grid.panels[e + 2] - c0
        sl = slice(e * p, (e + 2) * p + 1)
        for x, y, B in parts:
            r, rho = c0 - h1 * x, c0 + h2 * y
            lin = (h1 * x + h2 * y) / Xi
            c = 2.0 * w * h1 * h2 * kernel_regular_part(r, rho, s, n) * lin ** (-1.0 - 2.0 * s) / Xi**2
            G[sl, sl] += (B * c[:, None]).T @ B


def _near_pairs(grid, s, n, G, adm):
    P, p = grid.n_panels, grid.degree
    xr = grid._ref[0]
    xq, wq = gauss_rule(grid.n_gauss)
    b = grid.panels
    for e in range(P):
        for f in range(e + 2, P):
            if adm[e, f]:
                continue
            pts_r, pts_rho, wts = [], [], []
            stack = [(b[e], b[e + 1], b[f], b[f + 1], 0)]
            while stack:
                a1, b1, a2, b2, depth = stack.pop()
                if a2 - b1 >= ADMISSIBILITY * max(b1 - a1, b2 - a2):
                    r = a1 + (b1 - a1) * xq
                    rho = a2 + (b2 - a2) * xq
                    pts_r.append(np.repeat(r, xq.size))
                    pts_rho.append(np.tile(rho, xq.size))
                    wts.append(np.outer((b1 - a1) * wq, (b2 - a2) * wq).ravel())
                    continue
                if depth >= MAX_BISECTION_DEPTH:
                    raise KernelAssemblyError(
                        f"quadrature did not converge for panel pair ({e}, {f})", entry=(e, f))
                if b1 - a1 >= b2 - a2:
                    m = 0.5 * (a1 + b1)
                    stack += [(a1, m, a2, b2, depth + 1), (m, b1, a2, b2, depth + 1)]
                else:
                    m = 0.5 * (a2 + b2)
                    stack += [(a1, b1, a2, m, depth + 1), (a1, b1, m, b2, depth + 1)]
            r, rho, w = np.concatenate(pts_r), np.concatenate(pts_rho), np.concatenate(wts)
            Le = lagrange_matrix(xr, 2.0 * (r - b[e]) / (b[e + 1] - b[e]) - 1.0)
            Lf = lagrange_matrix(xr, 2.0 * (rho - b[f]) / (b[f + 1] - b[f]) - 1.0)
            B = np.hstack((Le, -Lf))
            c = 2.0 * w * radial_kernel(r, rho, s, n)
            idx = np.r_[np.arange(e * p, (e + 1) * p + 1), np.arange(f * p, (f + 1) * p + 1)]
            G[np.ix_(idx, idx)] += (B * c[:, None]).T @ B


def _exterior(grid, s, n, G):
    R = grid.radius
    xg, wg = grid.gauss
    P, p = grid.n_panels, grid.degree
    Lg = grid.gauss_interp
    for e in range(P - 1):
        c = 2.0 * wg[e] * exterior_coefficient(xg[e], R, s, n)
        sl = grid.panel_dofs(e)
        G[sl, sl] += (Lg * c[:, None]).T @ Lg
    # last panel: u^2 ~ (R - r)^2 against kappa ~ (R - r)^{-2s}
    t, wt = jacobi_rule(SINGULAR_ORDER, 2.0 - 2.0 * s)
    h = R - grid.panels[-2]
    r = R - h * t
    c = 2.0 * wt * h * exterior_coefficient(r, R, s, n) * t ** (2.0 * s - 2.0)
    L = lagrange_matrix(grid._ref[0], 1.0 - 2.0 * t)
    sl = grid.panel_dofs(P - 1)
    G[sl, sl] += (L * c[:, None]).T @ L


def _pointwise(grid, s, n):
    r = grid.nodes
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = radial_kernel(r[:, None], r[None, :], s, n)
    np.fill_diagonal(ent, np.inf)
    pan = np.minimum(np.arange(grid.size) // grid.degree, grid.n_panels - 1)
    band = np.abs(pan[:, None] - pan[None, :]) <= 1
    off = ~band
    if not np.all(np.isfinite(ent[off])):
        i, j = np.argwhere(off & ~np.isfinite(ent))[0]
        raise KernelAssemblyError(f"off-band kernel entry ({i}, {j}) is not finite", entry=(int(i), int(j)))
    return ent, band


def _cache_name(grid, s, n, exterior):
    return f"kernel_n{n}_s{s!r}_{grid.hash}{'' if exterior else '_interior'}.npz"


def assemble_kernel(grid: RadialGrid, s: float, n: int | None = None, *, exterior: bool = True,
                    threads: int = 1, cache_dir: str | os.PathLike | None = None) -> KernelMatrix:
    """Assemble the pointwise kernel and the Gagliardo form on ``grid``."""
    n = grid.n if n is None else int(n)
    if n != grid.n:
        raise ValueError("kernel dimension must match grid.n")
    if not 0.0 < s < 1.0:
        raise ValueError(f"s out of range: {s}")
    if cache_dir is not None:
        path = os.path.join(os.fspath(cache_dir), _cache_name(grid, s, n, exterior))
        if os.path.exists(path):
            return load_kernel(path, grid)
    G, adm = _far_field(grid, s, n, threads)
    _self_pairs(grid, s, n, G)
    _touching_pairs(grid, s, n, G)
    _near_pairs(grid, s, n, G, adm)
    if exterior:
        _exterior(grid, s, n, G)
    G = 0.5 * (G + G.T)
    ent, band = _pointwise(grid, s, n)
    k = KernelMatrix(float(s), n, grid, ent, band, G, exterior)
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        save_kernel(k, path)
    return k


def save_kernel(k: KernelMatrix, path) -> None:
    with open(path, "wb") as fh:
        np.savez(fh, n=k.n, s=k.s, grid_hash=k.grid.hash, panels=k.grid.panels,
                 degree=k.grid.degree, exterior=k.exterior, entries=k.entries,
                 band=k.band, form=k.form)


def load_kernel(path, grid: RadialGrid) -> KernelMatrix:
    """Load a cached kernel; the file must have been produced on ``grid``."""
    with np.load(path) as d:
        if str(d["grid_hash"]) != grid.hash:
            raise ValueError(f"kernel cache {path} was built on a different grid")
        return KernelMatrix(float(d["s"]), int(d["n"]), grid, d["entries"].copy(),
                            d["band"].copy(), d["form"].copy(), bool(d["exterior"]))


def _check(u: RadialFn, k: KernelMatrix):
    if u.grid is not k.grid and u.grid.hash != k.grid.hash:
        raise ValueError("function and kernel live on different grids")


def seminorm_sq(u: RadialFn, k: KernelMatrix) -> float:
    """``[u]_s^2`` of the zero extension of ``u``."""
    _check(u, k)
    v = u.values
    return float(v @ k.form @ v)


def pairing(u: RadialFn, v: RadialFn, k: KernelMatrix) -> float:
    """Gagliardo bilinear form ``<u, v>``; ``pairing(u, u) == seminorm_sq(u)``."""
    _check(u, k)
    _check(v, k)
    a, b = u.values, v.values
    # symmetrised so that pairing(u, v) == pairing(v, u) bit for bit
    return float(0.5 * (a @ k.form @ b + b @ k.form @ a))
