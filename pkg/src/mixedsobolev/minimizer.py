"""Constrained minimisation of ``Q_gamma(u) = ||grad u||^2 - gamma [u]_s^2`` on the unit ``L^{2*}`` sphere.

The discrete ``L^{2*}`` integral uses the lumped nodal weights of
:class:`~mixedsobolev.embedding.BilinearForms`, so the nonlinearity
``|u|^{2*-2} u`` tested against the nodal basis is ``mass * |u|^{2*-2} u``
and the discrete Euler-Lagrange system is ``(A - gamma G) u = mu * mass |u|^{2*-2} u``.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .bubbles import make_Ueps, sobolev_constant
from .core import Params, RadialFn, lp_norm
from .embedding import BilinearForms

__all__ = [
    "MinimizeReport",
    "SweepRow",
    "SweepReport",
    "q_gamma",
    "minimize_sgamma",
    "extract_solution",
    "weak_residual",
    "lagrange_multiplier",
    "gamma_sweep",
    "normalized",
    "is_nonincreasing",
    "ENERGY_ROUNDING",
]


# relative slack for "non-increasing" energy comparisons (floating-point rounding)
ENERGY_ROUNDING = 1e-13


def is_nonincreasing(trace, slack: float = ENERGY_ROUNDING) -> bool:
    q = np.asarray(trace, dtype=float)
    return bool(np.all(np.diff(q) <= slack * np.abs(q[:-1])))


def _check_gamma(forms: BilinearForms, gamma: float):
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    c = forms.embedding.c_emb
    if gamma >= c:
        raise ValueError(f"gamma={gamma:g} must be below c_emb={c:g} (Q_gamma loses coercivity)")


def q_gamma(u: RadialFn, forms: BilinearForms, gamma: float) -> float:
    """``u^T A u - gamma u^T G u``; requires ``0 <= gamma < c_emb``."""
    _check_gamma(forms, gamma)
    v = u.values
    return float(v @ forms.A @ v - gamma * (v @ forms.G @ v))


def normalized(u: RadialFn, p: float) -> RadialFn:
    nrm = lp_norm(u, p)
    if nrm == 0:
        raise ValueError("cannot normalise the zero function")
    return u * (1.0 / nrm)


@dataclass(frozen=True)
class MinimizeReport:
    gamma: float
    s_gamma: float
    u0: RadialFn
    mu: float
    u_tilde: RadialFn
    iterations: int
    energy_trace: tuple
    weak_residual: float
    converged: bool
    tol: float

    def summary(self) -> dict:
        return {"gamma": self.gamma, "s_gamma": self.s_gamma, "mu": self.mu,
                "iterations": self.iterations, "weak_residual": self.weak_residual,
                "converged": self.converged, "tol": self.tol,
                "initial_energy": self.energy_trace[0], "u0_at_origin": float(self.u0.values[0])}


class _Problem:
    """Free-dof arrays shared by the minimiser and the residual check."""

    def __init__(self, forms: BilinearForms, gamma: float, p: float):
        f = forms.free
        self.M = forms.A[f, f] - gamma * forms.G[f, f]
        self.A = forms.A[f, f]
        self.cho = forms.chol_A
        self.w = forms.mass[f]
        self.p = p
        self.scale = np.sqrt(np.diag(self.A))

    def norm_p(self, u):
        return float(np.dot(self.w, np.abs(u) ** self.p)) ** (1.0 / self.p)

    def nonlin(self, u):
        return self.w * np.abs(u) ** (self.p - 2.0) * u

    def energy(self, u):
        return float(u @ self.M @ u)

    def residual(self, u):
        r = self.M @ u - self.nonlin(u)
        return float(np.max(np.abs(r) / self.scale))


def weak_residual(u: RadialFn, forms: BilinearForms, params: Params, test_basis=None) -> float:
    """``max_psi |<u, psi>_A - gamma <u, psi>_G - int |u|^{2*-2} u psi| / ||psi||_A``.

    ``test_basis`` is a ``(N, k)`` array of nodal coefficient vectors; by
    default the full nodal basis of the zero-trace space is used.
    """
    pb = _Problem(forms, params.gamma, params.two_star)
    v = u.values[forms.free]
    r = pb.M @ v - pb.nonlin(v)
    if test_basis is None:
        return float(np.max(np.abs(r) / pb.scale)) if r.size else 0.0
    T = np.asarray(test_basis, dtype=float)[forms.free]
    num = T.T @ r
    den = np.sqrt(np.einsum("ik,ij,jk->k", T, pb.A, T))
    return float(np.max(np.abs(num) / den))


def lagrange_multiplier(u0: RadialFn, forms: BilinearForms, gamma: float, p: float) -> float:
    """``mu`` from testing ``(A - gamma G) u0 = mu |u0|^{p-2} u0`` with ``psi = u0``."""
    v = u0.values
    num = v @ forms.A @ v - gamma * (v @ forms.G @ v)
    return float(num / np.dot(forms.mass, np.abs(v) ** p))


def extract_solution(s_gamma_or_report, u0: RadialFn | None = None, p: float | None = None) -> RadialFn:
    """``u_tilde = S(gamma)^{1/(2*-2)} u0`` from a report or from ``(s_gamma, u0, p)``."""
    if isinstance(s_gamma_or_report, MinimizeReport):
        rep = s_gamma_or_report
        s_gamma, u0 = rep.s_gamma, rep.u0
        p = 2.0 * u0.grid.n / (u0.grid.n - 2)
    else:
        s_gamma = float(s_gamma_or_report)
        p = 2.0 * u0.grid.n / (u0.grid.n - 2) if p is None else p
    if not s_gamma > 0:
        raise ValueError(f"s_gamma={s_gamma:g} must be positive to extract a solution")
    return u0 * (s_gamma ** (1.0 / (p - 2.0)))


class MinimizationNotConverged(RuntimeError):
    def __init__(self, msg, report: MinimizeReport):
        super().__init__(msg)
        self.report = report


def _newton_step(pb: _Problem, u, mu):
    # bordered system for (M - mu*J) du - m dmu = -(M u - mu m),  p m.du = -(N(u) - 1)
    p = pb.p
    m = pb.nonlin(u)
    J = (p - 1.0) * pb.w * np.abs(u) ** (p - 2.0)
    K = pb.M - mu * np.diag(J)
    rhs = np.concatenate([-(pb.M @ u - mu * m), [-(np.dot(pb.w, np.abs(u) ** p) - 1.0)]])
    B = np.zeros((u.size + 1, u.size + 1))
    B[:-1, :-1] = K
    B[:-1, -1] = -m
    B[-1, :-1] = p * m
    # diagonal scaling: basis functions near the origin have tiny energy
    D = np.concatenate([1.0 / pb.scale, [1.0]])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", linalg.LinAlgWarning)
            d = D * linalg.solve(B * D[:, None] * D[None, :], D * rhs)
    except linalg.LinAlgError:
        return None
    return d[:-1] if np.all(np.isfinite(d)) else None


def minimize_sgamma(forms: BilinearForms, params: Params, init: RadialFn | None = None,
                    tol: float = 1e-8, max_iter: int = 5000, *, newton: bool = True,
                    raise_on_failure: bool = False) -> MinimizeReport:
    """Preconditioned projected gradient descent for ``S(gamma)``.

    Each step moves along ``-A^{-1} grad`` with a Barzilai-Borwein trial length,
    renormalises to ``||u||_{2*} = 1`` and backtracks until ``Q_gamma`` does not
    increase.  Close to a critical point, Newton steps on the Lagrange system
    are taken whenever they lower ``Q_gamma``.  Converged means
    ``weak_residual(u_tilde) <= tol``.
    """
    gamma, p = params.gamma, params.two_star
    if not gamma > 0:
        raise ValueError("gamma must lie in (0, c_emb)")
    _check_gamma(forms, gamma)
    g = forms.grid
    if init is None:
        init = make_Ueps(params, 0.05 * params.delta, g)
    if lp_norm(init, p) <= 0:
        raise ValueError("initial function has zero L^{2*} norm")
    pb = _Problem(forms, gamma, p)
    u = init.values[forms.free].copy()
    u /= pb.norm_p(u)
    Q = pb.energy(u)
    trace = [Q]
    alpha = 1.0
    prev = None

    def res_tilde(u, Q):
        if Q <= 0:
            return np.inf
        c = Q ** (1.0 / (p - 2.0))
        return pb.residual(c * u)

    res = res_tilde(u, Q)
    it = 0
    while res > tol and it < max_iter:
        it += 1
        grad = 2.0 * (pb.M @ u - Q * pb.nonlin(u))
        d = -linalg.cho_solve(pb.cho, grad)
        if prev is not None:
            du, dg = u - prev[0], grad - prev[1]
            denom = du @ dg
            if denom > 0:
                alpha = float(np.clip((du @ pb.A @ du) / denom, 1e-6, 1e3))
        slope = grad @ d
        step, accepted = alpha, False
        for _ in range(60):
            cand = u + step * d
            cand /= pb.norm_p(cand)
            Qc = pb.energy(cand)
            if Qc <= Q + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if accepted:
            prev = (u, grad)
            u, Q = cand, Qc
            res = res_tilde(u, Q)
        elif not (newton and res < 1e-3):
            break
        if newton and tol < res < 1e-3:
            # near a critical point the achievable decrease (~ res^2) drops below
            # rounding, so Newton steps may keep Q flat to rounding precision
            du = _newton_step(pb, u, Q)
            if du is not None:
                cand = u + du
                cand /= pb.norm_p(cand)
                Qc = pb.energy(cand)
                rc = res_tilde(cand, Qc)
                if Qc <= Q + ENERGY_ROUNDING * abs(Q) and rc < res:
                    u, Q, res = cand, Qc, rc
                    prev = None
                elif not accepted:
                    break
            elif not accepted:
                break
        trace.append(Q)

    v = np.zeros(g.size)
    v[forms.free] = u * (1.0 if u[0] >= 0 else -1.0)
    u0 = RadialFn(g, v)
    s_gamma = Q
    mu = lagrange_multiplier(u0, forms, gamma, p)
    u_t = extract_solution(s_gamma, u0, p) if s_gamma > 0 else u0
    rep = MinimizeReport(float(gamma), float(s_gamma), u0, mu, u_t, it, tuple(trace),
                         float(res), bool(res <= tol), float(tol))
    if raise_on_failure and not rep.converged:
        raise MinimizationNotConverged(
            f"residual {res:.3e} above tol {tol:g} after {it} iterations", rep)
    return rep


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    gamma_fraction: float
    s_gamma: float
    bound_low: float
    bound_high: float
    iterations: int
    residual: float
    converged: bool


@dataclass(frozen=True)
class SweepReport:
    rows: tuple
    gamma_star_estimate: float | str
    n: int
    s: float
    c_emb: float
    sobolev: float
    endpoint_bound: float
    warm_start: bool
    reports: tuple = field(default=(), repr=False, compare=False)

    CSV_COLUMNS = ("gamma", "s_gamma", "bound_low", "bound_high", "iterations", "residual", "converged")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for r in self.rows:
            w.writerow([repr(float(r.gamma)), repr(float(r.s_gamma)), repr(float(r.bound_low)),
                        repr(float(r.bound_high)), r.iterations, repr(float(r.residual)), int(r.converged)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "n": self.n, "s": self.s, "c_emb": self.c_emb, "S_n": self.sobolev,
            "gamma_star_estimate": self.gamma_star_estimate,
            "endpoint_bound": self.endpoint_bound,
            "warm_start": self.warm_start,
            "all_converged": all(r.converged for r in self.rows),
            "monotone": self.is_monotone(),
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)

    def is_monotone(self, tol: float = 1e-3) -> bool:
        s = [r.s_gamma for r in self.rows]
        return all(b <= a + tol for a, b in zip(s, s[1:]))


def gamma_sweep(forms: BilinearForms, params: Params, gamma_grid, tol: float = 1e-8, *,
                warm_start: bool = True, max_iter: int = 5000, threads: int = 1) -> SweepReport:
    """Minimise ``Q_gamma`` for each ``gamma`` in the sorted ``gamma_grid``.

    With ``warm_start`` each row starts from the previous minimiser (sequential);
    otherwise every row starts from the default bubble and rows run on up to
    ``threads`` workers.  The two modes may land on different local minima.
    ``bound_high`` is ``min(S_n, Q_gamma(phi0 / ||phi0||_{2*}))``.
    """
    grid = np.asarray(gamma_grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("gamma_grid must be non-empty and strictly increasing")
    emb = forms.embedding
    c = emb.c_emb
    if grid[0] <= 0 or grid[-1] >= c:
        raise ValueError(f"gamma_grid must lie in (0, c_emb={c:g})")
    n, p = params.n, params.two_star
    S_n = sobolev_constant(n)
    phi_norm_sq = lp_norm(emb.phi0, p) ** 2

    def params_for(gm):
        return Params(params.n, params.s, float(gm), params.domain_radius, params.delta)

    reports = []
    if warm_start:
        init = None
        for gm in grid:
            rep = minimize_sgamma(forms, params_for(gm), init, tol, max_iter)
            reports.append(rep)
            init = rep.u0
    else:
        def run(gm):
            return minimize_sgamma(forms, params_for(gm), None, tol, max_iter)
        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(threads) as ex:
                reports = list(ex.map(run, grid))
        else:
            reports = [run(gm) for gm in grid]

    rows = []
    for gm, rep in zip(grid, reports):
        rows.append(SweepRow(float(gm), float(gm / c), rep.s_gamma, float((1.0 - gm / c) * S_n),
                             float(min(S_n, (c - gm) / phi_norm_sq)), rep.iterations,
                             rep.weak_residual, rep.converged))
    star = "none"
    for r in rows:
        if r.s_gamma < S_n - 2.0 * tol:
            star = r.gamma
            break
    return SweepReport(tuple(rows), star, n, params.s, c, S_n, float(c - grid[-1]), warm_start,
                       tuple(reports))
