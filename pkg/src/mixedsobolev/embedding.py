"""Local and nonlocal quadratic forms on the discrete radial space, and ``C_emb``.

``C_emb`` is the smallest eigenvalue of the pencil ``A u = lambda G u`` on the
zero-trace subspace (every degree of freedom except the one at ``r = R``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from .core import Params, RadialFn, RadialGrid, sphere_area
from .gagliardo import KernelMatrix, assemble_kernel

__all__ = [
    "BilinearForms",
    "EmbeddingResult",
    "EmbeddingNotConverged",
    "assemble_forms",
    "stiffness_matrix",
    "compute_cemb",
]


def stiffness_matrix(grid: RadialGrid) -> np.ndarray:
    """``A_ij = |S^{n-1}| int_0^R phi_i' phi_j' r^{n-1} dr`` for the nodal basis."""
    xg, wg = grid.gauss
    h = np.diff(grid.panels)
    A = np.zeros((grid.size, grid.size))
    for e in range(grid.n_panels):
        D = grid.gauss_deriv * (2.0 / h[e])
        sl = grid.panel_dofs(e)
        A[sl, sl] += (D * (wg[e] * xg[e] ** (grid.n - 1))[:, None]).T @ D
    A *= sphere_area(grid.n)
    return 0.5 * (A + A.T)


@dataclass(frozen=True, eq=False)
class BilinearForms:
    """Dirichlet form ``A`` and Gagliardo form ``G`` on a shared grid.

    ``mass`` holds the nodal weights used for every ``L^p`` integral, so
    ``sum(mass * |u|^p) == lp_norm(u, p)^p``.  ``free`` indexes the degrees of
    freedom of the zero-trace space.
    """

    A: np.ndarray
    G: np.ndarray
    grid: RadialGrid
    s: float
    kernel: KernelMatrix | None = None

    @cached_property
    def mass(self) -> np.ndarray:
        g = self.grid
        return sphere_area(g.n) * g.base_weights * g.nodes ** (g.n - 1)

    @property
    def free(self) -> slice:
        return slice(0, self.grid.size - 1)

    @cached_property
    def chol_A(self):
        f = self.free
        return linalg.cho_factor(self.A[f, f])

    @cached_property
    def embedding(self) -> "EmbeddingResult":
        return compute_cemb(self)

    def rho_sq(self, u: RadialFn) -> float:
        v = u.values
        return float(v @ self.A @ v + v @ self.G @ v)


def assemble_forms(grid: RadialGrid, params: Params, kernel: KernelMatrix | None = None, *,
                   threads: int = 1, cache_dir=None) -> BilinearForms:
    if grid.n != params.n:
        raise ValueError("grid dimension differs from params.n")
    if abs(grid.radius - params.domain_radius) > 1e-12 * params.domain_radius:
        raise ValueError("grid radius differs from params.domain_radius")
    if kernel is None:
        kernel = assemble_kernel(grid, params.s, params.n, threads=threads, cache_dir=cache_dir)
    if kernel.grid.hash != grid.hash:
        raise ValueError("kernel was assembled on a different grid")
    if kernel.s != params.s or not kernel.exterior:
        raise ValueError("kernel order or exterior flag inconsistent with params")
    A = stiffness_matrix(grid)
    f = slice(0, grid.size - 1)
    try:
        linalg.cholesky(A[f, f])
    except linalg.LinAlgError as exc:
        raise ValueError("stiffness matrix is indefinite on the zero-trace space") from exc
    return BilinearForms(A, kernel.form, grid, params.s, kernel)


@dataclass(frozen=True)
class EmbeddingResult:
    c_emb: float
    phi0: RadialFn
    iterations: int
    residual: float
    n: int
    s: float
    R: float
    grid_hash: str

    def to_dict(self) -> dict:
        return {"n": self.n, "s": self.s, "R": self.R, "grid_hash": self.grid_hash,
                "c_emb": self.c_emb, "residual": self.residual, "iterations": self.iterations}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


class EmbeddingNotConverged(RuntimeError):
    def __init__(self, msg, best: EmbeddingResult):
        super().__init__(msg)
        self.best = best


def compute_cemb(forms: BilinearForms, tol: float = 1e-11, max_iter: int = 500) -> EmbeddingResult:
    """Smallest ``lambda`` of ``A u = lambda G u`` by inverse iteration.

    ``phi0`` is normalised to ``[phi0]_s^2 = 1`` with ``phi0(0) > 0``; the
    residual is ``||A u - lambda G u|| / ||A u||``.
    """
    g = forms.grid
    f = forms.free
    A, G = forms.A[f, f], forms.G[f, f]
    cho = forms.chol_A
    u = np.ones(A.shape[0])
    u[-1] = 0.0
    lam, res = np.inf, np.inf

    def result(u, lam, res, it):
        v = np.zeros(g.size)
        v[f] = u * np.sign(u[0])
        return EmbeddingResult(float(lam), RadialFn(g, v), it, float(res), g.n, forms.s, g.radius, g.hash)

    for it in range(1, max_iter + 1):
        u = linalg.cho_solve(cho, G @ u)
        u /= np.sqrt(u @ G @ u)
        Au = A @ u
        lam = float(u @ Au)
        res = float(np.linalg.norm(Au - lam * (G @ u)) / np.linalg.norm(Au))
        if res <= tol:
            return result(u, lam, res, it)
    raise EmbeddingNotConverged(
        f"inverse iteration did not reach residual {tol:g} in {max_iter} steps (residual {res:.3e})",
        result(u, lam, res, max_iter))
