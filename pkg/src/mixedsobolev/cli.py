"""Command-line entry point: ``mixedsobolev <command> --config run.yaml --out dir``.

Each command writes ``<command>.json`` (deterministic for a fixed config and
seed), CSV tables, and ``<command>.meta.json`` with run metadata such as the
timestamp and thread count.  Exit codes: 0 all checks pass, 1 a check failed,
2 invalid configuration or missing dependency, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .asymptotics import (TAGS, FitError, SweepCurve, curves_to_csv, default_epsilons, energy_deficit,
                          fit_powerlaw, run_sweep)
from .bubbles import Bubble, default_grid, eval_bubble, sobolev_constant, talenti_integrals, talenti_ratio
from .config import ConfigError, RunConfig, config_hash, load_config
from .core import lp_norm
from .embedding import EmbeddingNotConverged, assemble_forms, compute_cemb
from .gagliardo import assemble_kernel
from .minimizer import gamma_sweep, is_nonincreasing, minimize_sgamma, weak_residual
from .montecarlo import mc_seminorm, tail_integral

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


class DependencyError(RuntimeError):
    pass


@dataclass
class Outcome:
    results: dict
    checks: dict
    tables: dict = field(default_factory=dict)
    tags: tuple = ()
    solver_failed: bool = False


def _check(value: bool, detail: str) -> dict:
    return {"passed": bool(value), "detail": detail}


def _floats(obj):
    if isinstance(obj, dict):
        return {str(k): _floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_floats(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# shared set-up


def _forms(cfg: RunConfig, threads: int):
    params = cfg.make_params(0.0)
    grid = default_grid(params, **cfg.grid_kwargs())
    kernel = assemble_kernel(grid, params.s, params.n, threads=threads, cache_dir=cfg.output.cache_dir)
    return params, grid, assemble_forms(grid, params, kernel)


def _gamma(cfg: RunConfig, c_emb: float) -> float:
    p = cfg.params
    return float(p.gamma) if p.gamma is not None else float(p.gamma_fraction) * c_emb


def _prior_cemb(cfg: RunConfig, out_dir: str, forms, inline: bool) -> dict:
    """Load ``cemb.json`` from ``out_dir`` (or compute inline) and check it matches ``forms``."""
    path = os.path.join(out_dir, "cemb.json")
    if inline:
        rec = forms.embedding.to_dict()
    elif os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            rec = json.load(fh)["results"]
    else:
        raise DependencyError(f"no c_emb result in {out_dir}: run cemb first (or pass --with-cemb)")
    if rec.get("grid_hash") != forms.grid.hash or rec.get("s") != forms.s:
        raise DependencyError("stored c_emb was computed for a different grid or order: run cemb first")
    if abs(rec["c_emb"] - forms.embedding.c_emb) > 1e-9 * rec["c_emb"]:
        raise DependencyError("stored c_emb disagrees with the current forms: run cemb again")
    return rec


# ---------------------------------------------------------------------------
# commands


def cmd_talenti_check(cfg: RunConfig, args) -> Outcome:
    t = cfg.talenti
    rows, checks = [], {}
    by_n = {}
    for n in t.dimensions:
        S = sobolev_constant(n)
        for e in t.epsilons:
            r = talenti_ratio(n, e)
            rows.append((n, e, r, S, abs(r - S) / S))
            by_n.setdefault(n, []).append(r)
    checks["ratio_matches_sobolev_constant"] = _check(
        all(row[4] <= t.tolerance for row in rows), f"max relative error {max(r[4] for r in rows):.3e}")
    spread = max((max(v) - min(v)) / min(v) for v in by_n.values())
    checks["scale_invariance"] = _check(spread <= 1e-6, f"max relative spread across epsilon {spread:.3e}")
    means = sorted(np.mean(v) for v in by_n.values())
    distinct = all(b - a > 1e-6 * b for a, b in zip(means, means[1:]))
    checks["dimensions_distinct"] = _check(distinct or len(means) < 2, "ratios differ between dimensions")
    csv = "n,epsilon,ratio,sobolev_constant,rel_error\n" + "".join(
        f"{n},{float(e)!r},{float(r)!r},{float(S)!r},{float(d)!r}\n" for n, e, r, S, d in rows)
    results = {"rows": [dict(n=n, epsilon=e, ratio=r, sobolev_constant=S, rel_error=d) for n, e, r, S, d in rows]}
    return Outcome(results, checks, {"talenti": csv}, (TAGS["talenti"],))


def cmd_cemb(cfg: RunConfig, args) -> Outcome:
    params, grid, forms = _forms(cfg, args.threads)
    try:
        emb = compute_cemb(forms, max_iter=cfg.solver.max_iter)
    except EmbeddingNotConverged as exc:
        return Outcome({**exc.best.to_dict(), "error": str(exc)}, {}, tags=(TAGS["cemb"],), solver_failed=True)
    rng = np.random.default_rng(cfg.solver.seed)
    f = forms.free
    worst = np.inf
    for _ in range(20):
        v = rng.standard_normal(f.stop)
        worst = min(worst, (v @ forms.A[f, f] @ v) / (v @ forms.G[f, f] @ v))
    gnorm = float(emb.phi0.values @ forms.G @ emb.phi0.values)
    checks = {
        "rayleigh_bound": _check(worst >= emb.c_emb * (1 - 1e-10), f"min Rayleigh quotient {worst:.6g}"),
        "phi0_normalized": _check(abs(gnorm - 1.0) <= 1e-8, f"[phi0]^2 = {float(gnorm)!r}"),
        "positive": _check(emb.c_emb > 0, f"c_emb = {float(emb.c_emb)!r}"),
    }
    results = emb.to_dict()
    results["phi0_l2star_norm"] = lp_norm(emb.phi0, params.two_star)
    csv = "r,phi0\n" + "".join(f"{float(r)!r},{float(v)!r}\n" for r, v in zip(grid.nodes, emb.phi0.values))
    return Outcome(results, checks, {"cemb_phi0": csv}, (TAGS["cemb"],))


def cmd_minimize(cfg: RunConfig, args) -> Outcome:
    params0, grid, forms = _forms(cfg, args.threads)
    rec = _prior_cemb(cfg, args.out, forms, args.with_cemb)
    c = rec["c_emb"]
    gamma = _gamma(cfg, c)
    if not 0.0 < gamma < c:
        raise ConfigError(f"gamma={gamma:g} must lie in the open interval (0, c_emb={c:g})")
    params = cfg.make_params(gamma)
    rep = minimize_sgamma(forms, params, tol=cfg.solver.tol, max_iter=cfg.solver.max_iter,
                          newton=cfg.solver.newton)
    S_n = sobolev_constant(params.n)
    tr = rep.energy_trace
    wr = weak_residual(rep.u_tilde, forms, params)
    tol = cfg.solver.tol
    checks = {
        "converged": _check(rep.converged, f"weak residual {rep.weak_residual:.3e} vs tol {tol:g}"),
        "weak_residual": _check(wr <= 10 * tol, f"{wr:.3e}"),
        "multiplier": _check(abs(rep.mu - rep.s_gamma) <= 1e-8, f"|mu - S| = {abs(rep.mu - rep.s_gamma):.3e}"),
        "energy_monotone": _check(is_nonincreasing(tr), "energy trace non-increasing up to rounding"),
        "sandwich": _check((1 - gamma / c) * S_n - 1e-3 <= rep.s_gamma <= S_n + 1e-3,
                           f"{(1 - gamma / c) * S_n:.6g} <= {rep.s_gamma:.6g} <= {S_n:.6g}"),
    }
    results = {**rep.summary(), "c_emb": c, "S_n": S_n, "gamma_fraction": gamma / c,
               "weak_residual_full_basis": wr}
    prof = "r,u0,u_tilde\n" + "".join(
        f"{float(r)!r},{float(a)!r},{float(b)!r}\n" for r, a, b in zip(grid.nodes, rep.u0.values, rep.u_tilde.values))
    trace = "iteration,energy\n" + "".join(f"{i},{float(q)!r}\n" for i, q in enumerate(rep.energy_trace))
    return Outcome(results, checks, {"minimize_profile": prof, "minimize_trace": trace},
                   (TAGS["minimize"],), solver_failed=not rep.converged)


def cmd_sweep(cfg: RunConfig, args) -> Outcome:
    params0, grid, forms = _forms(cfg, args.threads)
    rec = _prior_cemb(cfg, args.out, forms, args.with_cemb)
    c = rec["c_emb"]
    gammas = np.array(cfg.sweep.gamma_fractions) * c
    params = cfg.make_params(float(gammas[0]))
    rep = gamma_sweep(forms, params, gammas, cfg.solver.tol, warm_start=cfg.solver.warm_start,
                      max_iter=cfg.solver.max_iter, threads=args.threads)
    rows = rep.rows
    checks = {
        "monotone": _check(rep.is_monotone(1e-3), "s_gamma non-increasing within 1e-3"),
        "bounds": _check(all(r.bound_low - 1e-3 <= r.s_gamma <= rep.sobolev + 1e-3 for r in rows),
                         "(1 - gamma/c_emb) S_n - 1e-3 <= s_gamma <= S_n + 1e-3"),
        "upper_bound_normalized_phi0": _check(all(r.s_gamma <= r.bound_high + 1e-3 for r in rows),
                                              "s_gamma <= Q_gamma(phi0 / ||phi0||_{2*}) + 1e-3"),
        "endpoint_stated": _check(rows[-1].s_gamma <= c - rows[-1].gamma + 1e-3,
                                  f"s_gamma={rows[-1].s_gamma:.6g} vs c_emb - gamma={c - rows[-1].gamma:.6g}"),
    }
    results = {**rep.summary(), "rows": [vars(r) for r in rows]}
    return Outcome(results, checks, {"sweep": rep.to_csv()}, (TAGS["sweep"],),
                   solver_failed=not all(r.converged for r in rows))


def cmd_asymptotics(cfg: RunConfig, args) -> Outcome:
    params0, grid, forms = _forms(cfg, args.threads)
    a = cfg.asymptotics
    n, s = params0.n, params0.s
    eps = default_epsilons(params0.delta, a.epsilon_count, a.epsilon_ratio)
    c = forms.embedding.c_emb
    gamma = _gamma(cfg, c)
    params = cfg.make_params(gamma)
    S_n = sobolev_constant(n)
    v1 = Bubble(1.0, n)
    mc = mc_seminorm(lambda r: eval_bubble(v1, r), s, n, a.mc_samples, cfg.solver.seed,
                     scale=1.0, threads=args.threads)
    curves, fits, checks = [], {}, {}
    for q in a.quantities:
        if q == "energy_deficit":
            cv = energy_deficit(params, eps, forms)
        else:
            cv = run_sweep(params, q, eps, forms=forms)
        curves.append(cv)
    by_q = {cv.quantity: cv for cv in curves}
    try:
        if "grad_sq" in by_q and "l2star_pow" in by_q:
            f1 = fit_powerlaw(by_q["grad_sq"], "offset", drop_largest=a.drop_largest)
            f2 = fit_powerlaw(by_q["l2star_pow"], "offset", drop_largest=a.drop_largest)
            fits["grad_sq"], fits["l2star_pow"] = f1, f2
            ratio = f1.limit_value / f2.limit_value ** (1 - 2 / n)
            checks["limits_ratio"] = _check(abs(ratio / S_n - 1) <= 0.01,
                                            f"K1/K2^(1-2/n) = {ratio:.8g}, S_n = {S_n:.8g}")
            checks["grad_slope"] = _check(abs(f1.slope / (n - 2) - 1) <= 0.15, f"slope {f1.slope:.4f}")
            checks["l2star_slope"] = _check(abs(f2.slope / n - 1) <= 0.15, f"slope {f2.slope:.4f}")
        if "gagliardo_sq" in by_q:
            cv = by_q["gagliardo_sq"]
            fg = fit_powerlaw(cv, "power", drop_largest=a.drop_largest)
            scaled = SweepCurve(cv.epsilons, cv.values / cv.epsilons ** (2 - 2 * s), "gagliardo_sq",
                                n, s, cv.delta, cv.nodes_inside)
            fp = fit_powerlaw(scaled, "offset", drop_largest=a.drop_largest)
            fits["gagliardo_sq"], fits["gagliardo_sq_prefactor"] = fg, fp
            checks["gagliardo_slope"] = _check(abs(fg.slope - (2 - 2 * s)) <= 0.05, f"slope {fg.slope:.4f}")
            checks["gagliardo_prefactor"] = _check(
                mc.agrees_with(fp.limit_value),
                f"{fp.limit_value:.6g} vs MC {mc.mean:.6g} +- {3 * mc.std_error:.3g}")
        if "energy_deficit" in by_q:
            cv = by_q["energy_deficit"]
            fd = fit_powerlaw(cv, "power", drop_largest=a.drop_largest)
            fits["energy_deficit"] = fd
            K2 = fits["l2star_pow"].limit_value if "l2star_pow" in fits else talenti_integrals(n)[1]
            target = gamma * mc.mean / K2 ** (2 / params.two_star)
            win = cv.values[a.drop_largest:]
            checks["deficit_exponent"] = _check(abs(fd.slope / (2 - 2 * s) - 1) <= 0.10, f"exponent {fd.slope:.4f}")
            checks["deficit_coefficient"] = _check(abs(fd.prefactor / target - 1) <= 0.10,
                                                   f"{fd.prefactor:.6g} vs {target:.6g}")
            checks["deficit_positive"] = _check(bool(np.all(win > 0)), "deficit > 0 in the fit window")
    except FitError as exc:
        checks["fits"] = _check(False, str(exc))
    results = {"n": n, "s": s, "gamma": gamma, "c_emb": c, "S_n": S_n, "epsilons": list(eps),
               "mc_v1_seminorm": mc.to_dict(), "fits": {k: f.to_dict() for k, f in fits.items()}}
    tables = {"asymptotics_curves": curves_to_csv(curves)}
    tags = tuple(TAGS[q] for q in a.quantities)
    return Outcome(results, checks, tables, tags)


def cmd_tail(cfg: RunConfig, args) -> Outcome:
    params = cfg.make_params(0.0)
    n, s = params.n, params.s
    t = cfg.tail
    v1 = Bubble(1.0, n)
    f = lambda r: eval_bubble(v1, r)  # noqa: E731
    rows = []
    for k, R in enumerate(t.radii):
        est = tail_integral(f, R, s, n, t.samples, cfg.solver.seed + k, threads=args.threads)
        rows.append((R, est.mean, est.std_error, est.mean * R ** (2 * s)))
    scaled = [r[3] for r in rows]
    checks = {
        "bounded_scaled": _check(max(scaled) / min(scaled) <= t.max_ratio,
                                 f"max/min of I(R) R^(2s) = {max(scaled) / min(scaled):.4f}"),
        "decreasing": _check(all(b[1] < a[1] for a, b in zip(rows, rows[1:])), "I(R) decreasing in R"),
    }
    csv = "R,I,std_error,I_times_R2s\n" + "".join(
        f"{float(R)!r},{float(m)!r},{float(e)!r},{float(x)!r}\n" for R, m, e, x in rows)
    results = {"n": n, "s": s, "samples": t.samples,
               "rows": [dict(R=R, I=m, std_error=e, I_times_R2s=x) for R, m, e, x in rows]}
    return Outcome(results, checks, {"tail": csv}, (TAGS["tail"],))


COMMANDS = {
    "talenti-check": cmd_talenti_check,
    "cemb": cmd_cemb,
    "minimize": cmd_minimize,
    "sweep": cmd_sweep,
    "asymptotics": cmd_asymptotics,
    "tail": cmd_tail,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mixedsobolev", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML run configuration (defaults if omitted)")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")
        p.add_argument("--seed", type=int, help="overrides solver.seed")
        if name in ("minimize", "sweep"):
            p.add_argument("--with-cemb", action="store_true", help="compute c_emb inline instead of loading it")
    return ap


def _write(out_dir: str, command: str, cfg: RunConfig, outcome: Outcome, status: int, meta: dict):
    os.makedirs(out_dir, exist_ok=True)
    stem = command.replace("-", "_")
    report = {
        "command": command,
        "config_hash": config_hash(cfg),
        "config": cfg.to_dict(),
        "tags": list(outcome.tags),
        "results": _floats(outcome.results),
        "checks": _floats(outcome.checks),
        "status": status,
        "version": __version__,
    }
    with open(os.path.join(out_dir, f"{stem}.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2, allow_nan=True)
        fh.write("\n")
    for name, text in outcome.tables.items():
        with open(os.path.join(out_dir, f"{name}.csv"), "w", encoding="utf-8") as fh:
            fh.write(text)
    with open(os.path.join(out_dir, f"{stem}.meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.time()
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg = cfg.with_overrides(solver={"seed": args.seed})
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        args.out = args.out or cfg.output.directory
        if not hasattr(args, "with_cemb"):
            args.with_cemb = False
        outcome = COMMANDS[args.command](cfg, args)
    except (ConfigError, DependencyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if outcome.solver_failed:
        status = EXIT_SOLVER
    elif all(c["passed"] for c in outcome.checks.values()):
        status = EXIT_OK
    else:
        status = EXIT_CHECK
    meta = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "elapsed_seconds": time.time() - t0,
            "threads": args.threads, "python": platform.python_version(), "argv": list(sys.argv)}
    _write(args.out, args.command, cfg, outcome, status, meta)
    for name, c in outcome.checks.items():
        print(f"{'PASS' if c['passed'] else 'FAIL'} {name}: {c['detail']}")
    print(f"{args.command}: exit {status} -> {args.out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
