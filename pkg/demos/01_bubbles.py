# %% [markdown]
# # Bubbles and the Sobolev constant
#
# The bubble ``V_eps(r) = eps^{(n-2)/2} / (eps^2 + r^2)^{(n-2)/2}`` attains the
# best constant in the Sobolev inequality.  Its quotient
# ``||grad V||^2 / ||V||_{2*}^2`` does not depend on ``eps``.

# %%
import numpy as np

from mixedsobolev import make_params
from mixedsobolev.asymptotics import default_epsilons, fit_powerlaw, run_sweep
from mixedsobolev.bubbles import default_grid, sobolev_constant, talenti_integrals, talenti_ratio

for n in (3, 4, 5, 6):
    ratios = [talenti_ratio(n, eps) for eps in (0.5, 1.0, 2.0)]
    print(f"n={n}: S_n={sobolev_constant(n):.12f}  ratios={np.round(ratios, 12)}")

# %% [markdown]
# Cutting the bubble off with a smooth bump ``phi`` (equal to one on
# ``B_delta``, zero outside ``B_{2 delta}``) gives ``U_eps``.  As ``eps -> 0``
# its Dirichlet energy and critical norm converge to the whole-space values
# ``K1`` and ``K2``, with deviations of order ``eps^{n-2}`` and ``eps^n``.

# %%
P = make_params(5, 0.5, 0.0, 1.0, 0.25)
grid = default_grid(P)
eps = default_epsilons(P.delta)
K1, K2 = talenti_integrals(5)
for q, exact, rate in (("grad_sq", K1, 3), ("l2star_pow", K2, 5)):
    fit = fit_powerlaw(run_sweep(P, q, eps, grid=grid))
    print(f"{q:>10}: fitted limit {fit.limit_value:.12f}  exact {exact:.12f}  "
          f"deviation slope {fit.slope:.3f} (expected {rate})")
print("K1 / K2^(3/5) =", fit_powerlaw(run_sweep(P, "grad_sq", eps, grid=grid)).limit_value / K2 ** 0.6)
