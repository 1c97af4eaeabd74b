"""Numerical laboratory for the critical mixed local/nonlocal problem on a ball.

Radial discretisation of ``-Laplace u - gamma (-Laplace)^s u = |u|^{2*-2} u``:
Gagliardo seminorms by angular reduction, the embedding constant ``C_emb``,
the constrained level ``S(gamma)`` and bubble asymptotics.
"""

__version__ = "0.1.0"

from .core import Params, RadialFn, RadialGrid, h1_seminorm_sq, lp_norm, make_grid, make_params, sphere_area
from .bubbles import (Bubble, Cutoff, default_grid, eval_bubble, eval_cutoff, localized_bubble, make_Ueps,
                      sobolev_constant, talenti_integrals, talenti_ratio)
from .gagliardo import KernelMatrix, assemble_kernel, load_kernel, pairing, save_kernel, seminorm_sq
from .montecarlo import McEstimate, mc_seminorm, tail_integral
from .embedding import BilinearForms, EmbeddingResult, assemble_forms, compute_cemb
from .minimizer import (MinimizeReport, SweepReport, extract_solution, gamma_sweep, minimize_sgamma, q_gamma,
                        weak_residual)
from .asymptotics import FitResult, SweepCurve, energy_deficit, fit_powerlaw, run_sweep

__all__ = [
    "Params", "RadialFn", "RadialGrid", "h1_seminorm_sq", "lp_norm", "make_grid", "make_params", "sphere_area",
    "Bubble", "Cutoff", "default_grid", "eval_bubble", "eval_cutoff", "localized_bubble", "make_Ueps",
    "sobolev_constant", "talenti_integrals", "talenti_ratio",
    "KernelMatrix", "assemble_kernel", "load_kernel", "pairing", "save_kernel", "seminorm_sq",
    "McEstimate", "mc_seminorm", "tail_integral",
    "BilinearForms", "EmbeddingResult", "assemble_forms", "compute_cemb",
    "MinimizeReport", "SweepReport", "extract_solution", "gamma_sweep", "minimize_sgamma", "q_gamma",
    "weak_residual",
    "FitResult", "SweepCurve", "energy_deficit", "fit_powerlaw", "run_sweep",
]
