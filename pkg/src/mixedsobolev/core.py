"""Problem parameters, radial grids on a centred ball and discrete radial functions.

A radial function on the ball ``B_R`` is represented by its values at the nodes of
a panel mesh of ``[0, R]``.  Inside every panel the function is the polynomial of
degree ``degree`` interpolating the nodal values at Gauss-Lobatto-Legendre points,
so the discrete space consists of continuous piecewise polynomials.  Functions are
extended by zero outside the ball.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre
from scipy import special

__all__ = [
    "Params",
    "RadialGrid",
    "RadialFn",
    "make_params",
    "make_grid",
    "sphere_area",
    "lp_norm",
    "h1_seminorm_sq",
    "gll_rule",
    "gauss_rule",
    "jacobi_rule",
    "lagrange_matrix",
]


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere ``S^{n-1}`` in ``R^n``."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class Params:
    n: int
    s: float
    gamma: float
    domain_radius: float
    delta: float

    @property
    def two_star(self) -> float:
        return 2.0 * self.n / (self.n - 2)


def make_params(n, s, gamma, domain_radius, delta) -> Params:
    """Validate raw inputs and build :class:`Params`."""
    if int(n) != n or n < 3:
        raise ValueError(f"dimension must be an integer >= 3, got n={n}")
    if not 0.0 < s < 1.0:
        raise ValueError(f"s out of range: need 0 < s < 1, got s={s}")
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got gamma={gamma}")
    if domain_radius <= 0:
        raise ValueError(f"domain_radius must be positive, got {domain_radius}")
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if 4.0 * delta > domain_radius:
        raise ValueError(
            f"cutoff ball B_(4 delta) does not fit: 4*delta={4 * delta} > R={domain_radius}"
        )
    return Params(int(n), float(s), float(gamma), float(domain_radius), float(delta))


# ---------------------------------------------------------------------------
# reference quadrature rules on [-1, 1] / [0, 1]


def gll_rule(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Lobatto-Legendre nodes and weights on ``[-1, 1]`` (``p + 1`` points)."""
    if p < 1:
        raise ValueError("degree must be >= 1")
    cp = np.zeros(p + 1)
    cp[-1] = 1.0
    interior = legendre.legroots(legendre.legder(cp))
    x = np.concatenate(([-1.0], np.sort(interior.real), [1.0]))
    w = 2.0 / (p * (p + 1) * legendre.legval(x, cp) ** 2)
    return x, w


def gauss_rule(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule mapped to ``[0, 1]``."""
    x, w = legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w


def jacobi_rule(q: int, a: float) -> tuple[np.ndarray, np.ndarray]:
    """Rule on ``[0, 1]`` exact for ``t**a * poly(t)`` with polynomial degree ``2q - 1``."""
    x, w = special.roots_jacobi(q, 0.0, a)
    return 0.5 * (x + 1.0), w * 2.0 ** (-a - 1.0)


def lagrange_matrix(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Matrix ``L`` with ``L[k, i] = l_i(x[k])`` for the Lagrange basis on ``nodes``.

    Barycentric form; exact hits on a node return the unit vector.
    """
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bw = 1.0 / diff.prod(axis=1)
    d = x[:, None] - nodes[None, :]
    hit = d == 0.0
    d[hit] = 1.0
    t = bw[None, :] / d
    out = t / t.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    if rows.any():
        out[rows] = hit[rows].astype(float)
    return out


def _derivative_matrix(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bw = 1.0 / diff.prod(axis=1)
    D = (bw[None, :] / bw[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


# ---------------------------------------------------------------------------
# panel layouts


def _geometric_panels(R, inner, ratio, max_panel, boundary_levels, breakpoints):
    h_max = max_panel * R
    pts = [0.0]
    r = inner * R
    while r < R:
        pts.append(r)
        step = min(r * (ratio - 1.0), h_max)
        r = r + step
    pts = np.array(pts)
    pts = pts[pts < R - 0.5 * h_max]
    brk = np.array(sorted(b for b in breakpoints if 0.0 < b < R), dtype=float)
    if brk.size:
        keep = np.ones(pts.size, dtype=bool)
        for b in brk:
            # drop generated points crowding a breakpoint; relative in the geometric zone
            local = min(b * (ratio - 1.0), h_max)
            keep &= np.abs(pts - b) > 0.3 * local
        pts = pts[keep]
    tail = R - h_max * ratio ** (-np.arange(1, boundary_levels + 1, dtype=float))
    pts = np.concatenate((pts, brk, tail, [R]))
    pts = np.unique(pts)
    # fill the gaps left after removing points near breakpoints
    out = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        m = int(math.ceil((b - a) / h_max - 1e-9))
        if m > 1:
            out.extend(a + (b - a) * np.arange(1, m) / m)
        out.append(b)
    return np.array(out)


def _algebraic_panels(R, panels, exponent, breakpoints):
    t = np.linspace(0.0, 1.0, panels + 1)
    g = t**exponent / (t**exponent + (1.0 - t) ** exponent)
    pts = np.unique(np.concatenate((R * g, [b for b in breakpoints if 0.0 < b < R])))
    return pts


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Panel mesh of ``[0, R]`` carrying a continuous piecewise-polynomial space.

    ``nodes`` are the Gauss-Lobatto points of all panels (shared panel endpoints
    counted once); ``quad_weights`` integrate against ``r**(n-1) dr``.  The weight
    of the node at the origin vanishes, all other weights are positive.
    """

    n: int
    panels: np.ndarray
    degree: int
    grading: dict = field(default_factory=dict)

    def __post_init__(self):
        b = np.asarray(self.panels, dtype=float)
        if b[0] != 0.0 or np.any(np.diff(b) <= 0):
            raise ValueError("panel boundaries must start at 0 and increase strictly")
        object.__setattr__(self, "panels", b)

    @property
    def radius(self) -> float:
        return float(self.panels[-1])

    @property
    def n_panels(self) -> int:
        return self.panels.size - 1

    @cached_property
    def _ref(self):
        return gll_rule(self.degree)

    @cached_property
    def nodes(self) -> np.ndarray:
        x, _ = self._ref
        a, b = self.panels[:-1, None], self.panels[1:, None]
        loc = a + 0.5 * (b - a) * (x[None, :] + 1.0)
        out = np.concatenate((loc[:, :-1].ravel(), [self.radius]))
        # shared endpoints are exact copies of panel boundaries
        out[:: self.degree] = self.panels
        return out

    @property
    def size(self) -> int:
        return self.n_panels * self.degree + 1

    @cached_property
    def base_weights(self) -> np.ndarray:
        """Nodal (Lobatto) weights for plain ``dr``."""
        _, w = self._ref
        h = np.diff(self.panels)
        out = np.zeros(self.size)
        for e in range(self.n_panels):
            out[e * self.degree : (e + 1) * self.degree + 1] += 0.5 * h[e] * w
        return out

    @cached_property
    def quad_weights(self) -> np.ndarray:
        return self.base_weights * self.nodes ** (self.n - 1)

    @property
    def exact_degree(self) -> int:
        """Largest ``k`` with ``r**k * r**(n-1)`` integrated exactly by ``quad_weights``."""
        return 2 * self.degree - 1 - (self.n - 1)

    def panel_dofs(self, e: int) -> slice:
        return slice(e * self.degree, (e + 1) * self.degree + 1)

    @cached_property
    def hash(self) -> str:
        m = hashlib.sha256()
        m.update(np.int64(self.n).tobytes())
        m.update(np.int64(self.degree).tobytes())
        m.update(np.ascontiguousarray(self.panels).tobytes())
        return m.hexdigest()[:16]

    @cached_property
    def n_gauss(self) -> int:
        return self.degree + 4

    @cached_property
    def gauss(self) -> tuple[np.ndarray, np.ndarray]:
        """Gauss points ``(P, q)`` and ``dr`` weights ``(P, q)`` of every panel."""
        x, w = gauss_rule(self.n_gauss)
        a, h = self.panels[:-1, None], np.diff(self.panels)[:, None]
        return a + h * x[None, :], h * w[None, :]

    @cached_property
    def gauss_interp(self) -> np.ndarray:
        """Reference matrix mapping panel nodal values to its Gauss points."""
        x, _ = gauss_rule(self.n_gauss)
        return lagrange_matrix(self._ref[0], 2.0 * x - 1.0)

    @cached_property
    def gauss_deriv(self) -> np.ndarray:
        """Reference matrix mapping nodal values to ``d/dx`` at Gauss points (x on [-1,1])."""
        D = _derivative_matrix(self._ref[0])
        return self.gauss_interp @ D

    def interp_matrix(self) -> np.ndarray:
        """Dense ``(P*q, N)`` map from nodal values to all Gauss-point values."""
        P, q, p = self.n_panels, self.n_gauss, self.degree
        out = np.zeros((P * q, self.size))
        for e in range(P):
            out[e * q : (e + 1) * q, self.panel_dofs(e)] = self.gauss_interp
        return out

    def evaluate(self, values: np.ndarray, r) -> np.ndarray:
        """Evaluate the piecewise polynomial with nodal ``values`` at radii ``r``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros_like(r)
        inside = r <= self.radius
        if not inside.any():
            return out
        ri = r[inside]
        e = np.clip(np.searchsorted(self.panels, ri, side="right") - 1, 0, self.n_panels - 1)
        res = np.empty_like(ri)
        xr = self._ref[0]
        for k in np.unique(e):
            sel = e == k
            a, b = self.panels[k], self.panels[k + 1]
            L = lagrange_matrix(xr, 2.0 * (ri[sel] - a) / (b - a) - 1.0)
            res[sel] = L @ values[self.panel_dofs(k)]
        out[inside] = res
        return out

    def scaled(self, factor: float) -> "RadialGrid":
        """Same layout on the ball of radius ``factor * R``."""
        return RadialGrid(self.n, self.panels * factor, self.degree, dict(self.grading))


def make_grid(
    n: int,
    radius: float,
    *,
    degree: int = 8,
    kind: str = "geometric",
    inner: float = 1e-6,
    ratio: float = math.sqrt(2.0),
    max_panel: float = 1.0 / 32.0,
    boundary_levels: int = 4,
    panels: int = 48,
    exponent: float = 2.0,
    breakpoints=(),
) -> RadialGrid:
    """Build a graded radial grid on ``[0, radius]``.

    ``kind="geometric"`` (default) places panel ends at ``inner*R*ratio**k`` near the
    origin, caps panel length at ``max_panel*R`` and adds ``boundary_levels``
    geometrically shrinking panels towards ``R``.  ``kind="algebraic"`` uses
    ``panels`` panels clustered at both ends with the given ``exponent``.
    ``breakpoints`` (e.g. the cutoff radii) always become panel ends.
    """
    if kind == "geometric":
        b = _geometric_panels(radius, inner, ratio, max_panel, boundary_levels, breakpoints)
        grading = dict(kind=kind, inner=inner, ratio=ratio, max_panel=max_panel,
                       boundary_levels=boundary_levels)
    elif kind == "algebraic":
        b = _algebraic_panels(radius, panels, exponent, breakpoints)
        grading = dict(kind=kind, panels=panels, exponent=exponent)
    else:
        raise ValueError(f"unknown grading kind {kind!r}")
    grading["breakpoints"] = [float(x) for x in breakpoints]
    return RadialGrid(int(n), b, int(degree), grading)


@dataclass(frozen=True, eq=False)
class RadialFn:
    """Nodal values of a radial function on ``grid``; zero outside the ball.

    With ``zero_trace=True`` (members of the variational space) the value at
    ``r = R`` must vanish.
    """

    grid: RadialGrid
    values: np.ndarray
    zero_trace: bool = True

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} nodal values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite nodal values")
        if self.zero_trace and v[-1] != 0.0:
            raise ValueError(f"trace at r=R must vanish, got {v[-1]!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, grid: RadialGrid, f, zero_trace: bool = True) -> "RadialFn":
        """Interpolate the callable ``f(r)`` at the grid nodes."""
        v = np.asarray(f(grid.nodes), dtype=float).copy()
        if zero_trace:
            v[-1] = 0.0
        return cls(grid, v, zero_trace)

    def __call__(self, r):
        return self.grid.evaluate(self.values, r)

    def _new(self, values):
        return RadialFn(self.grid, values, self.zero_trace and values[-1] == 0.0)

    def __mul__(self, c):
        return self._new(self.values * float(c))

    __rmul__ = __mul__

    def __add__(self, other: "RadialFn"):
        _same_grid(self, other)
        return self._new(self.values + other.values)

    def __sub__(self, other: "RadialFn"):
        _same_grid(self, other)
        return self._new(self.values - other.values)

    def __neg__(self):
        return self._new(-self.values)


def _same_grid(u: RadialFn, v: RadialFn):
    if u.grid is not v.grid and u.grid.hash != v.grid.hash:
        raise ValueError("functions live on different grids")


def lp_norm(u: RadialFn, p: float, n: int | None = None) -> float:
    """``||u||_{L^p(B_R)}`` through the radial reduction with nodal quadrature."""
    if p < 1:
        raise ValueError(f"need p >= 1, got p={p}")
    g = u.grid
    n = g.n if n is None else n
    w = g.base_weights * g.nodes ** (n - 1)
    return float((sphere_area(n) * np.dot(w, np.abs(u.values) ** p)) ** (1.0 / p))


def h1_seminorm_sq(u: RadialFn, n: int | None = None) -> float:
    """``||grad u||^2_{L^2(B_R)}``; derivatives of the panel polynomials, Gauss quadrature."""
    g = u.grid
    n = g.n if n is None else n
    xg, wg = g.gauss
    h = np.diff(g.panels)
    total = 0.0
    for e in range(g.n_panels):
        du = (g.gauss_deriv @ u.values[g.panel_dofs(e)]) * (2.0 / h[e])
        total += np.dot(wg[e] * xg[e] ** (n - 1), du * du)
    return float(sphere_area(n) * total)
