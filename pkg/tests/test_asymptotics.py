import json

import numpy as np
import pytest

from mixedsobolev.asymptotics import (TAGS, FitError, SweepCurve, curves_to_csv, default_epsilons, fit_powerlaw,
                                      fits_to_json, run_sweep)
from mixedsobolev.bubbles import talenti_integrals


def synthetic(values_fn, eps=None, quantity="grad_sq"):
    eps = default_epsilons(0.25, 10) if eps is None else eps
    return SweepCurve(eps, values_fn(eps), quantity, 5, 0.5, 0.25)


def test_offset_fit_recovers_synthetic_law():
    fit = fit_powerlaw(synthetic(lambda e: 7.0 + 3.0 * e**2))
    assert fit.limit_value == pytest.approx(7.0, rel=1e-10)
    assert fit.slope == pytest.approx(2.0, abs=1e-6)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-5)
    assert fit.slope_ci[0] <= fit.slope <= fit.slope_ci[1]


def test_offset_fit_with_decreasing_deviation_sign():
    fit = fit_powerlaw(synthetic(lambda e: 2.0 - 0.5 * e**1.5))
    assert fit.limit_value == pytest.approx(2.0, rel=1e-10)
    assert fit.prefactor == pytest.approx(-0.5, rel=1e-5)


def test_power_fit_and_interval():
    rng = np.random.default_rng(0)
    curve = synthetic(lambda e: 4.0 * e**0.7 * np.exp(1e-3 * rng.standard_normal(e.size)))
    fit = fit_powerlaw(curve, "power")
    assert fit.limit_value is None
    assert fit.slope_ci[0] < 0.7 < fit.slope_ci[1]
    assert fit.prefactor_ci[0] < 4.0 < fit.prefactor_ci[1]


def test_noise_floor_points_are_excluded():
    eps = default_epsilons(0.25, 10)
    vals = 5.0 + eps
    # the two smallest eps sit at the rounding floor of the limit
    vals[-2:] = [5.0 * (1 + 4e-16), 5.0]
    fit = fit_powerlaw(synthetic(lambda e: vals, eps))
    assert fit.excluded == (float(eps[-2]), float(eps[-1]))
    assert fit.slope == pytest.approx(1.0, abs=1e-6)


def test_fit_errors():
    with pytest.raises(FitError, match="usable points"):
        fit_powerlaw(synthetic(lambda e: 1 + e, default_epsilons(0.25, 5)))
    with pytest.raises(FitError, match="decade"):
        fit_powerlaw(synthetic(lambda e: 1 + e, default_epsilons(0.25, 8, ratio=1.2)))
    with pytest.raises(FitError, match="flat"):
        fit_powerlaw(synthetic(lambda e: np.full(e.size, 3.0)))
    with pytest.raises(FitError, match="positive"):
        fit_powerlaw(synthetic(lambda e: -e, quantity="energy_deficit"), "power")
    with pytest.raises(ValueError, match="unknown model"):
        fit_powerlaw(synthetic(lambda e: 1 + e), "spline")


def test_curve_validation():
    with pytest.raises(ValueError, match="decreasing"):
        SweepCurve(np.array([0.1, 0.2]), np.array([1.0, 2.0]), "grad_sq", 5, 0.5, 0.25)
    with pytest.raises(ValueError, match="finite"):
        SweepCurve(np.array([0.2, 0.1]), np.array([1.0, np.nan]), "grad_sq", 5, 0.5, 0.25)
    with pytest.raises(ValueError, match="positive"):
        SweepCurve(np.array([0.2, 0.1]), np.array([1.0, -1.0]), "grad_sq", 5, 0.5, 0.25)
    SweepCurve(np.array([0.2, 0.1]), np.array([1.0, -1.0]), "energy_deficit", 5, 0.5, 0.25)


def test_gradient_sweep_limit(params5, grid5):
    curve = run_sweep(params5, "grad_sq", default_epsilons(0.25), grid=grid5)
    assert curve.tag == TAGS["grad_sq"]
    fit = fit_powerlaw(curve)
    assert fit.limit_value == pytest.approx(talenti_integrals(5)[0], rel=1e-8)


def test_unresolved_epsilons_are_refused(params5, grid5):
    curve = run_sweep(params5, "l2star_pow", [0.05, 1e-9], grid=grid5)
    assert curve.refused == (1e-9,)
    assert len(curve.values) == 1


def test_run_sweep_rejects_unknown_quantity(params5):
    with pytest.raises(ValueError, match="unknown quantity"):
        run_sweep(params5, "volume", [0.1])
    with pytest.raises(ValueError, match="forms"):
        run_sweep(params5, "energy_deficit", [0.1])


def test_exports():
    c = synthetic(lambda e: 7.0 + 3.0 * e**2)
    lines = curves_to_csv([c]).splitlines()
    assert lines[0] == "tag,quantity,epsilon,value,nodes_inside"
    assert len(lines) == 11
    payload = json.loads(fits_to_json([fit_powerlaw(c)]))
    assert payload[0]["tag"] == TAGS["grad_sq"]
