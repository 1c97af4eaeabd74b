"""Concentration sweeps of the localized bubbles and power-law fits of their deviations.

Every curve and fit carries a stable ``tag`` naming the asymptotic statement it
checks, so exported records can be matched across runs.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .bubbles import default_grid, make_Ueps, sobolev_constant
from .core import Params, RadialGrid, h1_seminorm_sq, lp_norm
from .embedding import BilinearForms
from .gagliardo import KernelMatrix, assemble_kernel, seminorm_sq
from .minimizer import q_gamma

__all__ = [
    "SweepCurve",
    "FitResult",
    "FitError",
    "TAGS",
    "default_epsilons",
    "run_sweep",
    "fit_powerlaw",
    "energy_deficit",
    "curves_to_csv",
    "fits_to_json",
]

TAGS = {
    "talenti": "talenti.ratio",
    "grad_sq": "bubble.gradient_limit",
    "l2star_pow": "bubble.critical_norm_limit",
    "gagliardo_sq": "bubble.gagliardo_rate",
    "energy_deficit": "bubble.energy_deficit",
    "tail": "tail.decay",
    "cemb": "embedding.constant",
    "minimize": "sgamma.weak_solution",
    "sweep": "sgamma.structure",
}

MIN_NODES_IN_BALL = 8


@dataclass(frozen=True)
class SweepCurve:
    epsilons: np.ndarray
    values: np.ndarray
    quantity: str
    n: int
    s: float
    delta: float
    nodes_inside: tuple = ()
    refused: tuple = ()
    gamma: float = 0.0

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=float)
        val = np.asarray(self.values, dtype=float)
        if eps.shape != val.shape:
            raise ValueError("epsilons and values differ in length")
        if eps.size > 1 and np.any(np.diff(eps) >= 0):
            raise ValueError("epsilons must be strictly decreasing")
        if not np.all(np.isfinite(val)):
            raise ValueError("curve values must be finite")
        if self.quantity != "energy_deficit" and np.any(val <= 0):
            raise ValueError("curve values must be positive")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "values", val)

    @property
    def tag(self) -> str:
        return TAGS[self.quantity]

    def records(self) -> list[dict]:
        nodes = self.nodes_inside or (None,) * len(self.epsilons)
        return [{"tag": self.tag, "quantity": self.quantity, "epsilon": float(e), "value": float(v),
                 "nodes_inside": k} for e, v, k in zip(self.epsilons, self.values, nodes)]


@dataclass(frozen=True)
class FitResult:
    model: str
    limit_value: float | None
    prefactor: float
    slope: float
    slope_ci: tuple
    prefactor_ci: tuple
    window: tuple
    n_points: int
    residual: float
    tag: str = ""
    excluded: tuple = field(default=())

    def to_dict(self) -> dict:
        return {"model": self.model, "limit_value": self.limit_value, "prefactor": self.prefactor,
                "slope": self.slope, "slope_ci": list(self.slope_ci),
                "prefactor_ci": list(self.prefactor_ci), "window": list(self.window),
                "n_points": self.n_points, "residual": self.residual, "tag": self.tag,
                "excluded": list(self.excluded)}


class FitError(ValueError):
    pass


def default_epsilons(delta: float, count: int = 8, ratio: float = 2.0) -> np.ndarray:
    """Geometric ladder ``delta/5 * ratio^{-k}``, ``k = 0..count-1``."""
    return delta / 5.0 * ratio ** -np.arange(count, dtype=float)


def run_sweep(params: Params, quantity: str, epsilons, *, grid: RadialGrid | None = None,
              kernel: KernelMatrix | None = None, forms: BilinearForms | None = None,
              min_nodes: int = MIN_NODES_IN_BALL) -> SweepCurve:
    """Evaluate ``quantity`` on ``U_eps`` for each ``eps``.

    ``grad_sq`` is ``||grad U_eps||^2``, ``l2star_pow`` is ``||U_eps||_{2*}^{2*}``,
    ``gagliardo_sq`` is ``[U_eps]_s^2``; ``energy_deficit`` delegates to
    :func:`energy_deficit`.  An ``eps`` that the grid cannot resolve is listed
    in ``refused`` and left out of the curve.
    """
    if quantity == "energy_deficit":
        if forms is None:
            raise ValueError("energy_deficit needs assembled forms")
        return energy_deficit(params, epsilons, forms, min_nodes=min_nodes)
    if quantity not in ("grad_sq", "l2star_pow", "gagliardo_sq"):
        raise ValueError(f"unknown quantity {quantity!r}")
    eps = np.sort(np.asarray(epsilons, dtype=float))[::-1]
    if forms is not None:
        grid = forms.grid
        kernel = forms.kernel if kernel is None else kernel
    grid = default_grid(params) if grid is None else grid
    if quantity == "gagliardo_sq" and kernel is None:
        kernel = assemble_kernel(grid, params.s, params.n)
    p = params.two_star
    kept, vals, counts, refused = [], [], [], []
    for e in eps:
        try:
            u = make_Ueps(params, e, grid, min_nodes=min_nodes)
        except ValueError:
            refused.append(float(e))
            continue
        if quantity == "grad_sq":
            v = h1_seminorm_sq(u)
        elif quantity == "l2star_pow":
            v = lp_norm(u, p) ** p
        else:
            v = seminorm_sq(u, kernel)
        kept.append(e)
        vals.append(v)
        counts.append(int(np.count_nonzero(grid.nodes < e)))
    return SweepCurve(np.array(kept), np.array(vals), quantity, params.n, params.s, params.delta,
                      tuple(counts), tuple(refused), params.gamma)


def energy_deficit(params: Params, epsilons, forms: BilinearForms, *,
                   min_nodes: int = MIN_NODES_IN_BALL) -> SweepCurve:
    """``S_n - Q_gamma(U_eps / ||U_eps||_{2*})`` per ``eps``; negative values are kept."""
    eps = np.sort(np.asarray(epsilons, dtype=float))[::-1]
    S_n = sobolev_constant(params.n)
    p = params.two_star
    kept, vals, counts, refused = [], [], [], []
    for e in eps:
        try:
            u = make_Ueps(params, e, forms.grid, min_nodes=min_nodes)
        except ValueError:
            refused.append(float(e))
            continue
        q = q_gamma(u, forms, params.gamma) / lp_norm(u, p) ** 2
        kept.append(e)
        vals.append(S_n - q)
        counts.append(int(np.count_nonzero(forms.grid.nodes < e)))
    return SweepCurve(np.array(kept), np.array(vals), "energy_deficit", params.n, params.s,
                      params.delta, tuple(counts), tuple(refused), params.gamma)


def _loglinear(x, y):
    """OLS of ``y`` on ``x`` with 95% intervals; returns ``(b0, b1, ci0, ci1, rss)``."""
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    dof = len(x) - 2
    rss = float(r @ r)
    cov = (rss / dof) * np.linalg.inv(X.T @ X) if dof > 0 else np.zeros((2, 2))
    t = stats.t.ppf(0.975, dof) if dof > 0 else 0.0
    half = t * np.sqrt(np.diag(cov))
    return coef[0], coef[1], half[0], half[1], rss


def _window(curve: SweepCurve, drop_largest: int, min_nodes: int):
    idx = np.arange(len(curve.epsilons))[drop_largest:]
    if curve.nodes_inside:
        idx = np.array([i for i in idx if curve.nodes_inside[i] >= min_nodes], dtype=int)
    return idx


def _require(eps, k):
    if len(eps) < max(5, k + 1):
        raise FitError(f"need at least {max(5, k + 1)} usable points, have {len(eps)}")
    if np.log10(eps.max() / eps.min()) < 1.0 - 1e-12:
        raise FitError("fit window spans less than one decade of epsilon")


def fit_powerlaw(curve: SweepCurve, model: str = "offset", *, drop_largest: int = 2,
                 min_nodes: int = MIN_NODES_IN_BALL, noise_floor: float = 1e3) -> FitResult:
    """Fit ``K + c eps^alpha`` (``model="offset"``) or ``c eps^alpha`` (``model="power"``).

    The window drops the ``drop_largest`` largest ``eps`` and any ``eps`` with
    fewer than ``min_nodes`` grid nodes inside ``B_eps``.  For the offset model,
    points whose deviation ``|v - K|`` is below ``noise_floor`` machine epsilons
    of ``|K|`` are also excluded, since their deviation is rounding noise.
    Slopes and prefactors come from a log-space linear regression of the
    (deviation) values; intervals are 95% t-intervals from the residuals.
    """
    idx = _window(curve, drop_largest, min_nodes)
    eps, val = curve.epsilons[idx], curve.values[idx]
    if model == "power":
        _require(eps, 2)
        if np.any(val <= 0):
            raise FitError("power model needs positive values")
        b0, b1, c0, c1, rss = _loglinear(np.log(eps), np.log(val))
        return FitResult("power", None, float(np.exp(b0)), float(b1), (b1 - c1, b1 + c1),
                         (float(np.exp(b0 - c0)), float(np.exp(b0 + c0))),
                         (float(eps.min()), float(eps.max())), len(eps), rss, curve.tag)
    if model != "offset":
        raise ValueError(f"unknown model {model!r}")
    _require(eps, 3)
    K0, a0 = _offset_start(eps, val)
    floor = noise_floor * np.finfo(float).eps * abs(K0)
    keep = np.abs(val - K0) > floor
    excluded = [float(e) for e in eps[~keep]]
    eps, val = eps[keep], val[keep]
    _require(eps, 3)
    K = _offset_refine(eps, val, *_offset_start(eps, val))
    dev = val - K
    sign = np.sign(dev[-1]) or 1.0
    if np.any(sign * dev <= 0):
        raise FitError("deviation from the fitted limit changes sign inside the window")
    b0, b1, c0, c1, rss = _loglinear(np.log(eps), np.log(sign * dev))
    return FitResult("offset", float(K), float(sign * np.exp(b0)), float(b1), (b1 - c1, b1 + c1),
                     tuple(sorted((float(sign * np.exp(b0 - c0)), float(sign * np.exp(b0 + c0))))),
                     (float(eps.min()), float(eps.max())), len(eps), rss, curve.tag, tuple(excluded))


def _offset_start(eps, val):
    """Initial ``(K, alpha)`` from the slope of successive differences, which does not involve ``K``."""
    d = np.diff(val)
    good = d != 0
    if good.sum() < 2:
        raise FitError("curve is flat; no deviation to fit")
    mid = np.sqrt(eps[:-1] * eps[1:])[good]
    _, a0, *_ = _loglinear(np.log(mid), np.log(np.abs(d[good])))
    a0 = max(a0, 1e-3)
    # Richardson step on the two smallest eps, where the deviation is smallest
    e1, e2 = eps[-2], eps[-1]
    c = (val[-2] - val[-1]) / (e1**a0 - e2**a0)
    return float(val[-1] - c * e2**a0), float(a0)


def _offset_refine(eps, val, K0, a0) -> float:
    """Limit ``K`` of ``K + c eps^alpha`` by log-space least squares in ``(K, log c, alpha)``.

    ``alpha`` is confined to ``[a0/2, 2 a0]``: as ``K -> +-inf`` the log
    deviation flattens and a free fit would drift there.
    """
    E = (eps / eps.max()) ** a0
    c0 = float(np.dot(E, val - K0) / np.dot(E, E)) / eps.max() ** a0
    sign = np.sign(c0) or 1.0
    scale = np.abs(val - K0).max() or 1.0

    def resid(th):
        K, lc, a = th
        dev = sign * (val - K)
        bad = dev <= 0
        r = np.log(np.where(bad, 1e-300, dev)) - lc - a * np.log(eps)
        return np.where(bad, 1e3, r)

    x0 = [K0, np.log(abs(c0)) if c0 != 0 else 0.0, a0]
    sol = optimize.least_squares(resid, x0, x_scale=[scale, 1.0, 1.0],
                                 bounds=([-np.inf, -np.inf, 0.5 * a0], [np.inf, np.inf, 2.0 * a0]),
                                 xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return float(sol.x[0])


def curves_to_csv(curves) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tag", "quantity", "epsilon", "value", "nodes_inside"])
    for c in curves:
        for r in c.records():
            w.writerow([r["tag"], r["quantity"], repr(r["epsilon"]), repr(r["value"]), r["nodes_inside"]])
    return buf.getvalue()


def fits_to_json(fits) -> str:
    return json.dumps([f.to_dict() for f in fits], sort_keys=True, indent=2)
