import math

import numpy as np
import pytest

from tiltcond.catalog import planar_triangle
from tiltcond.conditioning import (
    ConditionEstimate,
    ScaleRow,
    ScaleSchedule,
    Thresholds,
    classify,
    conditioning_class,
    fit_power_law,
    global_condition_number,
    local_condition_number,
    positivity_witness,
    regularity_radius,
    strong_convexity_modulus,
)
from tiltcond.efficient_set import weakly_efficient_set
from tiltcond.errors import GlobalEstimatePassed, NoExteriorDirection, NotASolution
from tiltcond.minnorm import stationarity
from tiltcond.problem import Ball, Quadratic, VectorFunction

FAST = ScaleSchedule(pairs_per_scale=16)


def test_schedule():
    etas = ScaleSchedule().etas(2.0)
    assert etas[0] == 0.5 and len(etas) == 9
    assert np.all(np.diff(etas) < 0)
    assert ScaleSchedule().etas(0.4)[0] == pytest.approx(0.2)
    with pytest.raises(ValueError):
        ScaleSchedule(eta0=3.0).etas(2.0)


def test_power_law_fit_recovers_exponent():
    etas = 0.5 * 2.0 ** -np.arange(9)
    alpha, r2 = fit_power_law(etas, 0.63 * etas ** (-2 / 3))
    assert alpha == pytest.approx(2 / 3)
    assert r2 == pytest.approx(1.0)


def test_classification_rules():
    etas = 0.5 * 2.0 ** -np.arange(9)
    assert classify(etas, np.full(9, 0.5))[0] == "finite"
    assert classify(etas, etas ** -0.5)[0] == "divergent"
    wobble = 0.5 + 0.2 * (-1) ** np.arange(9)
    assert classify(etas, wobble)[0] == "indeterminate"
    # a slow drift that never plateaus and is too shallow to call divergent
    assert classify(etas, etas ** -0.05, Thresholds())[0] == "indeterminate"


def test_global_examples(biq, square, quartic):
    est = global_condition_number(biq, FAST)
    assert est.classification == "finite" and est.value == pytest.approx(0.5, rel=0.05)
    est = global_condition_number(square, FAST)
    assert est.classification == "finite" and est.value == pytest.approx(0.5, abs=1e-6)
    est = global_condition_number(quartic, FAST)
    assert est.classification == "divergent" and abs(est.alpha - 2 / 3) <= 0.1
    assert math.isinf(est.value)


def test_local_examples(biq, quartic):
    assert local_condition_number(quartic, [0.0], FAST).classification == "divergent"
    est = local_condition_number(biq, [0.0], FAST)
    assert est.classification == "finite" and est.value == pytest.approx(0.5, rel=0.1)
    est = local_condition_number(biq, [0.5], FAST)
    assert est.classification == "finite" and abs(est.value) <= 0.05
    with pytest.raises(NotASolution):
        local_condition_number(biq, [-0.5], FAST)


def test_pair_exclusion_is_counted(biq):
    est = global_condition_number(biq, FAST, thresholds=Thresholds(exclusion=0.5))
    assert all(r.n_pairs + r.n_excluded == 16 for r in est.rows)
    assert sum(r.n_excluded for r in est.rows) > 0


def test_determinism(biq):
    a = global_condition_number(biq, ScaleSchedule(pairs_per_scale=8, seed=3)).to_csv()
    b = global_condition_number(biq, ScaleSchedule(pairs_per_scale=8, seed=3)).to_csv()
    c = global_condition_number(biq, ScaleSchedule(pairs_per_scale=8, seed=4)).to_csv()
    assert a == b and a != c


def test_csv_layout(biq):
    text = global_condition_number(biq, ScaleSchedule(pairs_per_scale=4, k_max=3)).to_csv()
    lines = text.splitlines()
    assert lines[0] == "scale_index,eta,n_pairs,n_excluded,K_eta,err_bar,p_best,q_best"
    assert [ln.split(",")[0] for ln in lines[5:]] == [
        "classification", "value", "uncertainty", "fit_residual_r2", "seed", "thresholds"]


def test_strong_convexity_implies_finite(catalog_functions):
    for name, f in catalog_functions.items():
        if strong_convexity_modulus(f) is None:
            continue
        N = 10 if f.m > 2 else None
        est = global_condition_number(f, ScaleSchedule(pairs_per_scale=8), N)
        assert est.classification == "finite", name
        assert est.monotone


def test_global_and_pointwise_agree(biq, quartic):
    assert global_condition_number(biq, FAST).classification == "finite"
    xs = weakly_efficient_set(biq, [0.0], 4).points
    assert all(local_condition_number(biq, x, FAST).classification == "finite" for x in xs)
    assert global_condition_number(quartic, FAST).classification != "finite"
    assert local_condition_number(quartic, [0.0], FAST).classification != "finite"


def test_positivity_witness_examples(biq, square, quartic):
    w = positivity_witness(biq, [0.0])
    assert w.satisfied and w.kappa == pytest.approx(2.0, rel=0.1)
    for step in w.steps:
        assert stationarity(biq, step.x, step.tilt) <= 1e-9
        assert step.dist_x_to_unperturbed_set == pytest.approx(np.linalg.norm(step.tilt) / 2, abs=1e-9)
        # the tilted segment [x_s, x_s + 1] still contains x_bar = 0
        assert step.dist_xbar_to_tilted_set <= 1 / 200
    w = positivity_witness(square, [0.0])
    assert w.satisfied and w.kappa == pytest.approx(2.0, rel=0.1)
    w = positivity_witness(quartic, [0.0])
    assert w.satisfied and w.kappa <= 12


def test_witness_not_constructible_inside_full_dimensional_set():
    f = planar_triangle()
    with pytest.raises(NoExteriorDirection):
        positivity_witness(f, [0.25, 0.25], grid_resolution=10)


def test_strong_convexity_modulus(quartic, square):
    f = VectorFunction(Ball(2, 1.0), (Quadratic(2 * np.eye(2), [0, 0]), Quadratic(2 * np.eye(2), [1, 0])))
    assert strong_convexity_modulus(f) == pytest.approx(1.0)
    assert strong_convexity_modulus(quartic) is None
    assert strong_convexity_modulus(square) == pytest.approx(1.0)


def _estimate(kind, cls, value, unc):
    row = ScaleRow(0, 0.1, 1, 0, value, 0.0, None, None)
    return ConditionEstimate(kind, (row,), cls, value, unc, 0.0, 1.0, 0, 10, 1.0)


def test_regularity_radius():
    assert regularity_radius(_estimate("pointwise", "finite", 0.5, 0.01)) == (2.0, "finite")
    assert regularity_radius(_estimate("pointwise", "divergent", math.inf, 0.0)) == (0.0, "zero")
    assert regularity_radius(_estimate("pointwise", "finite", 0.0, 0.05)).status == "indeterminate"
    with pytest.raises(GlobalEstimatePassed):
        regularity_radius(_estimate("global", "finite", 0.5, 0.0))


def test_conditioning_class(biq, quartic):
    c = conditioning_class(biq)
    assert c.w1 and c.w1_star
    loc = _estimate("pointwise", "divergent", math.inf, 0.0)
    glob = _estimate("global", "divergent", math.inf, 0.0)
    c = conditioning_class(quartic, loc, glob)
    assert c.t1 is True and c.w1 is False and c.w1_star is False
