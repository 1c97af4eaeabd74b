"""Aubin-Talenti bubbles centred at the origin, the smooth cutoff and ``U_eps = phi * V_eps``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .core import Params, RadialFn, RadialGrid, make_grid, sphere_area

__all__ = [
    "Bubble",
    "Cutoff",
    "eval_bubble",
    "bubble_derivative",
    "eval_cutoff",
    "cutoff_derivative",
    "localized_bubble",
    "make_Ueps",
    "default_grid",
    "talenti_ratio",
    "sobolev_constant",
    "talenti_integrals",
]


@dataclass(frozen=True)
class Bubble:
    epsilon: float
    n: int

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def __call__(self, r):
        return eval_bubble(self, r)


@dataclass(frozen=True)
class Cutoff:
    """Radial bump equal to 1 on ``B_delta`` and 0 outside ``B_(2 delta)``.

    The transition is ``g(t) / (g(t) + g(1 - t))`` with ``g(t) = exp(-1/t)`` and
    ``t = (2 delta - r) / delta``.
    """

    delta: float
    profile: str = "exp-glue"

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")

    @property
    def derivative_bound(self) -> float:
        # the glue derivative peaks at t = 1/2 where it equals 2
        return 2.0 / self.delta

    def __call__(self, r):
        return eval_cutoff(self, r)


def eval_bubble(b: Bubble, r):
    r = np.asarray(r, dtype=float)
    k = 0.5 * (b.n - 2)
    return b.epsilon**k / (b.epsilon**2 + r * r) ** k


def bubble_derivative(b: Bubble, r):
    r = np.asarray(r, dtype=float)
    k = 0.5 * (b.n - 2)
    return -(b.n - 2) * b.epsilon**k * r / (b.epsilon**2 + r * r) ** (k + 1)


def _glue(t):
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 1.0, 1.0, 0.0)
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    out[mid] = special.expit(1.0 / (1.0 - tm) - 1.0 / tm)
    return out


def eval_cutoff(c: Cutoff, r):
    r = np.asarray(r, dtype=float)
    return _glue((2.0 * c.delta - r) / c.delta)


def cutoff_derivative(c: Cutoff, r):
    r = np.asarray(r, dtype=float)
    t = (2.0 * c.delta - r) / c.delta
    out = np.zeros_like(t)
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    g = special.expit(1.0 / (1.0 - tm) - 1.0 / tm)
    out[mid] = -g * (1.0 - g) * (1.0 / tm**2 + 1.0 / (1.0 - tm) ** 2) / c.delta
    return out


def localized_bubble(n: int, epsilon: float, delta: float):
    """Closed-form radial callable ``r -> phi(r) V_eps(r)``."""
    b, c = Bubble(epsilon, n), Cutoff(delta)

    def f(r):
        return eval_cutoff(c, r) * eval_bubble(b, r)

    f.scale = min(epsilon, delta)
    return f


def default_grid(params: Params, **kw) -> RadialGrid:
    """Geometric grid on the ball with the cutoff radii as panel ends."""
    kw.setdefault("breakpoints", (params.delta, 2.0 * params.delta))
    return make_grid(params.n, params.domain_radius, **kw)


def make_Ueps(params: Params, epsilon: float, grid: RadialGrid | None = None,
              min_nodes: int = 8) -> RadialFn:
    """Nodal sampling of ``phi V_eps`` on ``grid``; exactly zero for ``r >= 2 delta``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    grid = default_grid(params) if grid is None else grid
    if grid.n != params.n:
        raise ValueError("grid dimension differs from params.n")
    inside = int(np.count_nonzero(grid.nodes < epsilon))
    if inside < min_nodes:
        raise ValueError(
            f"grid too coarse for epsilon={epsilon:g}: {inside} nodes inside B_eps, "
            f"need at least {min_nodes}"
        )
    f = localized_bubble(params.n, epsilon, params.delta)
    return RadialFn.sample(grid, f)


# ---------------------------------------------------------------------------
# Sobolev quotient of the bubbles on the whole space


def talenti_ratio(n: int, epsilon: float = 1.0) -> float:
    """``||grad V_eps||^2 / ||V_eps||^2_{2*}`` over ``R^n`` by adaptive quadrature on [0, inf)."""
    b = Bubble(epsilon, n)
    p = 2.0 * n / (n - 2)
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=500)
    g1, _ = integrate.quad(lambda r: bubble_derivative(b, r) ** 2 * r ** (n - 1), 0, epsilon, **opts)
    g2, _ = integrate.quad(lambda r: bubble_derivative(b, r) ** 2 * r ** (n - 1), epsilon, np.inf, **opts)
    l1, _ = integrate.quad(lambda r: eval_bubble(b, r) ** p * r ** (n - 1), 0, epsilon, **opts)
    l2, _ = integrate.quad(lambda r: eval_bubble(b, r) ** p * r ** (n - 1), epsilon, np.inf, **opts)
    w = sphere_area(n)
    return w * (g1 + g2) / (w * (l1 + l2)) ** (2.0 / p)


def _tail_series(m: int, n: int, R: float) -> float:
    """``int_R^inf r**m (1 + r**2)**(-n) dr`` via the binomial series in ``r**-2`` (R > 1)."""
    total, k = 0.0, 0
    while True:
        e = 2 * n + 2 * k - m - 1
        term = (-1) ** k * special.binom(n + k - 1, k) * R ** (-e) / e
        total += term
        if abs(term) < 1e-18 * abs(total) or k > 400:
            return total
        k += 1


def talenti_integrals(n: int, r_inf: float = 1e3) -> tuple[float, float]:
    """``(||grad V_1||^2, ||V_1||^{2*}_{2*})`` over ``R^n``.

    Adaptive quadrature on ``[0, r_inf]`` plus the analytic power-law tail.
    """
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=500)
    pts = [1.0, 10.0, 100.0]

    def piece(m):
        v, _ = integrate.quad(lambda r: r**m * (1.0 + r * r) ** (-n), 0.0, r_inf,
                              points=[x for x in pts if x < r_inf], **opts)
        return v + _tail_series(m, n, r_inf)

    w = sphere_area(n)
    return w * (n - 2) ** 2 * piece(n + 1), w * piece(n - 1)


def sobolev_constant(n: int) -> float:
    """Sharp Sobolev constant ``S_n`` as the Talenti quotient of ``V_1``."""
    if n < 3:
        raise ValueError("need n >= 3")
    k1, k2 = talenti_integrals(n)
    return k1 / k2 ** ((n - 2) / n)

