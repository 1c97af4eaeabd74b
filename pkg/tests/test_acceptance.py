"""Acceptance criteria, one test each, at the stated tolerances and time budgets.

Every test records a ``PASS``/``FAIL`` line that is printed in the
"acceptance criteria" section of the pytest summary.  Run this file directly
(``python3 tests/test_acceptance.py``) to see only these lines.
"""

import json
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from mixedsobolev.asymptotics import SweepCurve, default_epsilons, energy_deficit, fit_powerlaw, run_sweep
from mixedsobolev.bubbles import (Bubble, default_grid, eval_bubble, localized_bubble, make_Ueps,
                                  sobolev_constant, talenti_ratio)
from mixedsobolev.cli import main as cli_main
from mixedsobolev.config import load_config
from mixedsobolev.core import lp_norm, make_params
from mixedsobolev.embedding import assemble_forms
from mixedsobolev.gagliardo import assemble_kernel, seminorm_sq
from mixedsobolev.minimizer import gamma_sweep, lagrange_multiplier, weak_residual
from mixedsobolev.montecarlo import mc_seminorm, tail_integral

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
MC_SAMPLES = 10_000_000
SWEEP_FRACTIONS = (0.05, 0.15, 0.3, 0.45, 0.6, 0.75, 0.85, 0.95)


def record(key, title, passed, detail, elapsed=None):
    budget = "" if elapsed is None else f" [{elapsed:.1f} s]"
    ACCEPTANCE_LINES[key] = f"{'PASS' if passed else 'FAIL'} {key:>3} {title}: {detail}{budget}"
    return passed


@lru_cache(maxsize=None)
def v1_seminorm_mc(n, s, seed=101):
    v1 = Bubble(1.0, n)
    return mc_seminorm(lambda r: eval_bubble(v1, r), s, n, MC_SAMPLES, seed, scale=1.0)


@pytest.fixture(scope="module")
def sweep5(forms5, params5):
    c = forms5.embedding.c_emb
    t0 = time.perf_counter()
    rep = gamma_sweep(forms5, params5, np.array(SWEEP_FRACTIONS) * c, tol=1e-8)
    return rep, time.perf_counter() - t0


def test_01_talenti_ratio():
    t0 = time.perf_counter()
    worst = 0.0
    for n in (3, 5):
        S = sobolev_constant(n)
        for eps in (0.5, 1.0, 2.0):
            worst = max(worst, abs(talenti_ratio(n, eps) / S - 1))
    dt = time.perf_counter() - t0
    assert record("1", "Talenti ratio", worst <= 1e-4 and dt < 5,
                  f"max relative error {worst:.2e} (tol 1e-4)", dt)


def test_02_engine_vs_monte_carlo(params5, grid5, kernel5):
    t0 = time.perf_counter()
    eps = 0.1
    engine = seminorm_sq(make_Ueps(params5, eps, grid5), kernel5)
    mc = mc_seminorm(localized_bubble(5, eps, 0.25), 0.5, 5, MC_SAMPLES, seed=2)
    dt = time.perf_counter() - t0
    z = (engine - mc.mean) / mc.std_error
    assert record("2", "engine vs Monte Carlo", abs(z) <= 3 and dt < 120,
                  f"engine {engine:.8g}, MC {mc.mean:.6g} +- {mc.std_error:.2g} ({z:+.2f} SE)", dt)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_03_gagliardo_rate(s):
    t0 = time.perf_counter()
    P = make_params(5, s, 0.0, 1.0, 0.25)
    grid = default_grid(P)
    kernel = assemble_kernel(grid, s)
    curve = run_sweep(P, "gagliardo_sq", default_epsilons(0.25), grid=grid, kernel=kernel)
    slope = fit_powerlaw(curve, "power").slope
    scaled = SweepCurve(curve.epsilons, curve.values / curve.epsilons ** (2 - 2 * s), "gagliardo_sq",
                        5, s, 0.25, curve.nodes_inside)
    pref = fit_powerlaw(scaled, "offset").limit_value
    mc = v1_seminorm_mc(5, s)
    dt = time.perf_counter() - t0
    lo, hi = mc.interval(3)
    ok = abs(slope - (2 - 2 * s)) <= 0.05 and lo <= pref <= hi and dt < 600
    assert record(f"3.{int(s * 100)}", f"[U_eps]^2 rate, s={s}", ok,
                  f"slope {slope:.4f} (target {2 - 2 * s}), prefactor {pref:.6g} in MC [{lo:.6g}, {hi:.6g}]",
                  dt)


def test_04_bubble_limits(params5, grid5):
    eps = default_epsilons(0.25)
    f1 = fit_powerlaw(run_sweep(params5, "grad_sq", eps, grid=grid5))
    f2 = fit_powerlaw(run_sweep(params5, "l2star_pow", eps, grid=grid5))
    n = 5
    ratio = f1.limit_value / f2.limit_value ** (1 - 2 / n)
    S = sobolev_constant(n)
    ok = (abs(ratio / S - 1) <= 0.01 and abs(f1.slope / (n - 2) - 1) <= 0.15
          and abs(f2.slope / n - 1) <= 0.15)
    assert record("4", "bubble limits", ok,
                  f"K1/K2^(3/5) = {ratio:.10g} vs S_5 = {S:.10g}, slopes {f1.slope:.3f} and {f2.slope:.3f}")


def test_05_energy_deficit(forms5, params5, grid5):
    c = forms5.embedding.c_emb
    gamma = 0.5 * c
    P = make_params(5, 0.5, gamma, 1.0, 0.25)
    eps = default_epsilons(0.25)
    curve = energy_deficit(P, eps, forms5)
    fit = fit_powerlaw(curve, "power")
    K2 = fit_powerlaw(run_sweep(P, "l2star_pow", eps, grid=grid5)).limit_value
    target = gamma * v1_seminorm_mc(5, 0.5).mean / K2 ** (2 / P.two_star)
    window_positive = bool(np.all(curve.values[2:] > 0))
    ok = abs(fit.slope - 1.0) <= 0.1 and abs(fit.prefactor / target - 1) <= 0.1 and window_positive
    assert record("5", "energy deficit", ok,
                  f"exponent {fit.slope:.4f} (target 1), coefficient {fit.prefactor:.5g} vs {target:.5g}, "
                  f"positive in window: {window_positive}")


def test_06_sgamma_structure(sweep5, forms5):
    rep, dt = sweep5
    S = sobolev_constant(5)
    inside = all(r.bound_low - 1e-3 <= r.s_gamma <= S + 1e-3 for r in rep.rows)
    ok = inside and rep.is_monotone(1e-3) and all(r.converged for r in rep.rows) and dt < 900
    vals = ", ".join(f"{r.s_gamma:.4f}" for r in rep.rows)
    assert record("6", "S(gamma) bounds and monotonicity", ok, f"s_gamma = [{vals}]", dt)


@pytest.mark.xfail(strict=True, reason="the stated bound omits the L^{2*} normalisation of phi0; "
                                       "see the decisions ledger")
def test_07a_endpoint_stated_bound(sweep5):
    rep, _ = sweep5
    last = rep.rows[-1]
    bound = rep.c_emb - last.gamma
    record("7a", "endpoint s_gamma <= c_emb - gamma + 1e-3", last.s_gamma <= bound + 1e-3,
           f"s_gamma {last.s_gamma:.5g} vs c_emb - gamma = {bound:.5g} at R=1 (unattainable, see ledger)")
    assert last.s_gamma <= bound + 1e-3


def test_07b_endpoint_normalized_bound(sweep5, forms5):
    rep, _ = sweep5
    last = rep.rows[-1]
    phi_sq = lp_norm(forms5.embedding.phi0, 10 / 3) ** 2
    bound = (rep.c_emb - last.gamma) / phi_sq
    assert record("7b", "endpoint s_gamma <= Q_gamma(phi0/||phi0||_2*) + 1e-3", last.s_gamma <= bound + 1e-3,
                  f"s_gamma {last.s_gamma:.5g} vs {bound:.5g}")


def test_07c_small_gamma_near_sobolev(sweep5):
    rep, _ = sweep5
    first = rep.rows[0]
    S = sobolev_constant(5)
    assert record("7c", "s_gamma at 0.05 c_emb within 5% of S_n", abs(first.s_gamma / S - 1) <= 0.05,
                  f"{first.s_gamma:.6g} vs {S:.6g}")


def test_08_weak_solution(minimized5, forms5):
    P, rep = minimized5
    t0 = time.perf_counter()
    wr = weak_residual(rep.u_tilde, forms5, P)
    mu = lagrange_multiplier(rep.u0, forms5, P.gamma, P.two_star)
    dt = time.perf_counter() - t0
    ok = rep.converged and wr <= 10 * rep.tol and abs(mu - rep.s_gamma) <= 1e-8 and dt < 10
    assert record("8", "weak solution", ok,
                  f"residual {wr:.2e} (limit {10 * rep.tol:g}), |mu - s_gamma| = {abs(mu - rep.s_gamma):.1e}", dt)


def test_09_tail_decay():
    t0 = time.perf_counter()
    v1 = Bubble(1.0, 5)
    scaled = [tail_integral(lambda r: eval_bubble(v1, r), R, 0.5, 5, MC_SAMPLES, seed=11 + k).mean * R
              for k, R in enumerate((10.0, 20.0, 40.0))]
    dt = time.perf_counter() - t0
    ratio = max(scaled) / min(scaled)
    assert record("9", "tail I(R) R^(2s)", ratio <= 2.0,
                  f"{', '.join(f'{x:.4g}' for x in scaled)} (max/min {ratio:.3f})", dt)


def test_10_strict_inequality_signature(sweep5):
    rep, _ = sweep5
    S = sobolev_constant(5)
    below = all(r.s_gamma < S - 1e-3 for r in rep.rows)
    cfg = load_config(CONFIGS / "sweep_n3.yaml")
    P = cfg.make_params(0.0)
    forms = assemble_forms(default_grid(P, **cfg.grid_kwargs()), P)
    c = forms.embedding.c_emb
    t0 = time.perf_counter()
    rep3 = gamma_sweep(forms, P, np.array(cfg.sweep.gamma_fractions) * c, cfg.solver.tol,
                       max_iter=600)
    dt = time.perf_counter() - t0
    star = rep3.gamma_star_estimate
    reported = star == "none" or (isinstance(star, float) and 0 < star < c)
    assert record("10", "S(gamma) < S_n signature", below and reported,
                  f"n=5 max s_gamma {max(r.s_gamma for r in rep.rows):.5g} < {S - 1e-3:.5g}; "
                  f"n=3 (s=0.25) gamma_star_estimate {star if isinstance(star, str) else f'{star:.4g}'}", dt)


def test_11_cli_determinism(tmp_path):
    t0 = time.perf_counter()
    commands = [("talenti-check", "talenti_check"), ("cemb", "cemb"), ("minimize", "minimize"),
                ("sweep", "sweep"), ("asymptotics", "asymptotics"), ("tail", "tail")]
    for run, threads in (("a", "1"), ("b", "2")):
        out = str(tmp_path / run)
        for cmd, cfg in commands:
            cli_main([cmd, "--config", str(CONFIGS / f"{cfg}.yaml"), "--out", out, "--threads", threads])
    same, missing = [], []
    for _, stem in commands:
        a, b = tmp_path / "a" / f"{stem}.json", tmp_path / "b" / f"{stem}.json"
        if not (a.exists() and b.exists()):
            missing.append(stem)
        elif a.read_bytes() == b.read_bytes() and "meta" not in json.loads(a.read_text()):
            same.append(stem)
    dt = time.perf_counter() - t0
    ok = len(same) == len(commands)
    assert record("11", "CLI determinism", ok,
                  f"byte-identical JSON for {len(same)}/{len(commands)} commands"
                  + (f", missing {missing}" if missing else ""), dt)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
