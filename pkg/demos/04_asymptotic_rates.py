# %% [markdown]
# # Rates as the bubble concentrates
#
# The nonlocal energy of ``U_eps`` vanishes like ``eps^{2-2s}`` with prefactor
# ``[V_1]_s^2``.  The gap between ``S_n`` and the mixed energy of the
# normalised ``U_eps`` therefore opens at the same rate, which is what makes
# ``S(gamma) < S_n``.

# %%
from mixedsobolev import make_params
from mixedsobolev.asymptotics import SweepCurve, default_epsilons, energy_deficit, fit_powerlaw, run_sweep
from mixedsobolev.bubbles import Bubble, default_grid, eval_bubble
from mixedsobolev.embedding import assemble_forms
from mixedsobolev.montecarlo import mc_seminorm

for s in (0.25, 0.5, 0.75):
    P = make_params(5, s, 0.0, 1.0, 0.25)
    forms = assemble_forms(default_grid(P), P)
    curve = run_sweep(P, "gagliardo_sq", default_epsilons(P.delta), forms=forms)
    slope = fit_powerlaw(curve, "power").slope
    scaled = SweepCurve(curve.epsilons, curve.values / curve.epsilons ** (2 - 2 * s), "gagliardo_sq",
                        5, s, P.delta, curve.nodes_inside)
    pref = fit_powerlaw(scaled).limit_value
    mc = mc_seminorm(lambda r: eval_bubble(Bubble(1.0, 5), r), s, 5, 1_000_000, seed=0)
    print(f"s={s}: slope {slope:.4f} (expected {2 - 2 * s}); prefactor {pref:.4f}, "
          f"MC [V_1]^2 = {mc.mean:.2f} +- {mc.std_error:.2f}")

# %%
P0 = make_params(5, 0.5, 0.0, 1.0, 0.25)
forms = assemble_forms(default_grid(P0), P0)
P = make_params(5, 0.5, 0.5 * forms.embedding.c_emb, 1.0, 0.25)
deficit = energy_deficit(P, default_epsilons(P.delta), forms)
fit = fit_powerlaw(deficit, "power")
print(f"energy deficit ~ {fit.prefactor:.3f} eps^{fit.slope:.4f}")
