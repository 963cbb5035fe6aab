import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tiltcond.catalog import biquadratic
from tiltcond.conditioning import ScaleSchedule
from tiltcond.distance import (
    d_star,
    d_z,
    fixed_point_solution_set,
    nadler_lim_check,
    tilt_map,
    verify_global_bound,
    verify_pointwise_bound,
)
from tiltcond.efficient_set import weakly_efficient_set
from tiltcond.errors import ContractionPreconditionViolated, DimensionMismatch, DomainMismatch, NotContractive
from tiltcond.problem import Ball, Builtin, PerturbationH, Polynomial, Quadratic, VectorFunction, perturb_componentwise
from tiltcond.setdist import hausdorff

FAST = ScaleSchedule(pairs_per_scale=16)


def test_dz_examples():
    q = Quadratic(2 * np.eye(2), [0.0, 0.0])
    assert d_z(q, q, 1.0).value == 0.0
    assert d_z(q, Quadratic(2 * np.eye(2), [1.0, -3.0], 2.0), 1.0).value == 0.0
    r = d_z(q, Quadratic(np.eye(2), [0.0, 0.0]), 1.0)
    assert r.value == pytest.approx(1.0) and r.method == "exact-quadratic"


def test_dz_polynomial_and_sampled_routes():
    assert d_z(Polynomial((0, 0, 0, 0, 1.0)), Polynomial((0, 1.0, 0, 0, 1.0)), 1.0).value == pytest.approx(0, abs=1e-12)
    assert d_z(Polynomial((0, 0, 0, 0, 1.0)), Polynomial((0, 0, 1.0)), 1.0).value == pytest.approx(10.0, rel=1e-6)
    a, b = Builtin("logcosh", 2), Builtin("logcosh", 2, 1.0, [0.0, 0.0])
    r = d_z(a, b, 1.0)
    assert r.method == "sampled" and r.value == 0.0 and r.n_pairs > 0
    # lower estimate of lip(grad logcosh) = 1, attained at the origin
    r = d_z(a, Quadratic(np.zeros((2, 2)), [0.0, 0.0]), 1.0)
    assert 0.8 <= r.value <= 1.0 + 1e-12
    with pytest.raises(DomainMismatch):
        d_z(a, Builtin("logcosh", 1), 1.0)


sym2 = arrays(np.float64, (2, 2), elements=st.floats(-3, 3, allow_subnormal=False)).map(lambda A: A + A.T)


@settings(deadline=None, max_examples=100)
@given(sym2, sym2, sym2)
def test_dz_is_a_pseudodistance(A, B, C):
    qa, qb, qc = (Quadratic(M, [0.0, 0.0]) for M in (A, B, C))
    ab, ba = d_z(qa, qb, 1.0).value, d_z(qb, qa, 1.0).value
    assert ab >= 0 and ab == pytest.approx(ba, abs=1e-12)
    assert d_z(qa, qc, 1.0).value <= ab + d_z(qb, qc, 1.0).value + 1e-9


def test_dstar_examples(biq):
    assert d_star(biq, biq).value == 0.0
    g = perturb_componentwise(biq, PerturbationH.isotropic(biq.ball, 0.2))
    r = d_star(biq, g)
    assert r.value == pytest.approx(0.2) and r.method == "exact"
    doubled = VectorFunction(biq.ball, (Quadratic([[4.0]], [0.0]), Quadratic([[4.0]], [-4.0], 2.0)))
    assert d_star(biq, doubled).value == pytest.approx(2.0)
    with pytest.raises(DimensionMismatch):
        d_star(biq, VectorFunction(biq.ball, biq.components[:1]))


@pytest.mark.parametrize("Qh", [[[0.3]], [[-0.7]]])
def test_dstar_shortcut_matches_grid(biq, Qh):
    h = PerturbationH.quadratic(biq.ball, Qh)
    g = perturb_componentwise(biq, h)
    assert abs(d_star(biq, g, use_shortcut=False).value - h.lip_grad_h) <= 1e-9


@pytest.mark.parametrize("p, lo, hi", [(0.0, 0.0, 2 / 2.2), (0.1, 0.1 / 2.2, 2.1 / 2.2)])
def test_fixed_point_examples(biq, p, lo, hi):
    h = PerturbationH.isotropic(biq.ball, 0.2)
    run = fixed_point_solution_set(biq, h, [p])
    assert run.converged
    assert run.limit.points.min() == pytest.approx(lo, abs=1e-4)
    assert run.limit.points.max() == pytest.approx(hi, abs=1e-4)
    direct = weakly_efficient_set(perturb_componentwise(biq, h), [p])
    assert hausdorff(run.limit, direct).value <= 1e-4


def test_fixed_point_soundness_and_rate(biq):
    for eps in (0.1, 0.2, 0.4):
        h = PerturbationH.isotropic(biq.ball, eps)
        g = perturb_componentwise(biq, h)
        for p in (-0.2, 0.0, 0.3):
            run = fixed_point_solution_set(biq, h, [p])
            direct = weakly_efficient_set(g, [p])
            assert hausdorff(run.limit, direct).value <= 2 * (run.limit.fill_distance + direct.fill_distance) + 1e-6
            # K(gamma) = 1/2 for this family and d* = eps
            assert run.theta_hat <= 0.5 * eps + 0.05


def test_fixed_point_zero_perturbation_is_immediate(biq):
    run = fixed_point_solution_set(biq, PerturbationH.zero(biq.ball), [0.3])
    assert run.iterations == 1 and run.theta_hat == 0.0
    assert hausdorff(run.limit, weakly_efficient_set(biq, [0.3])).value == 0.0


def test_fixed_point_preconditions(biq):
    with pytest.raises(ContractionPreconditionViolated):
        fixed_point_solution_set(biq, PerturbationH.isotropic(biq.ball, 1.5), [0.0])
    with pytest.raises(ContractionPreconditionViolated):
        fixed_point_solution_set(biq, PerturbationH.isotropic(biq.ball, 0.1), [0.0], contraction_bound=1.2)


def test_pointwise_bound_examples(biq):
    chk = verify_pointwise_bound(biq, PerturbationH.isotropic(biq.ball, 0.2), [0.0], FAST)
    assert chk.verdict == "holds"
    assert chk.lhs == pytest.approx(1 / 2.2, rel=0.02)
    assert chk.rhs == pytest.approx(0.5 / 0.9, rel=0.02)
    chk = verify_pointwise_bound(biq, PerturbationH.zero(biq.ball), [0.0], FAST)
    assert chk.verdict in ("holds", "holds (marginal)")
    assert chk.lhs == pytest.approx(chk.rhs, rel=1e-6)
    chk = verify_pointwise_bound(biq, PerturbationH.isotropic(biq.ball, 2.5), [0.0], FAST)
    assert chk.verdict == "hypotheses-unmet" and chk.lhs is None
    assert not chk.flags["lip_times_c_below_one"]


def test_pointwise_bound_requires_vanishing_gradient(biq):
    h = PerturbationH.quadratic(biq.ball, [[0.2]], [0.1])
    chk = verify_pointwise_bound(biq, h, [0.0], FAST)
    assert chk.verdict == "hypotheses-unmet" and not chk.flags["grad_h_vanishes"]


def test_global_bound_examples():
    f = biquadratic()
    chk = verify_global_bound(f, PerturbationH.isotropic(f.ball, 0.2), FAST)
    assert chk.verdict == "holds" and chk.hypotheses_met
    assert chk.lhs == pytest.approx(1 / 2.2, rel=0.02) and chk.rhs == pytest.approx(0.5 / 0.9, rel=0.02)
    chk = verify_global_bound(f, PerturbationH.zero(f.ball), FAST)
    assert chk.verdict in ("holds", "holds (marginal)") and chk.lhs == pytest.approx(chk.rhs, rel=1e-6)


def test_global_bound_flags_large_perturbation():
    f = biquadratic()
    # max|grad h| = 2 * 1.2 exceeds delta_f = 2
    chk = verify_global_bound(f, PerturbationH.isotropic(f.ball, 1.2), FAST)
    assert chk.verdict == "hypotheses-unmet"
    assert chk.lhs is None


def test_nadler_lim_examples():
    D = np.linspace(-1, 1, 11)[:, None]
    same = nadler_lim_check(lambda x: x / 2, lambda x: x / 2, 0.5, D)
    assert same.verdict == "holds" and same.lhs == 0.0
    chk = nadler_lim_check(lambda x: x / 2, lambda x: x / 2 + 0.1, 0.5, D)
    assert chk.lhs == pytest.approx(0.2) and chk.rhs == pytest.approx(0.2)
    assert chk.verdict in ("holds", "holds (marginal)")
    with pytest.raises(NotContractive):
        nadler_lim_check(lambda x: 2 * x, lambda x: x, 0.5, D)
    with pytest.raises(NotContractive):
        nadler_lim_check(lambda x: x / 2, lambda x: x / 2, 1.0, D)


def test_nadler_lim_on_tilt_maps(biq):
    S1 = tilt_map(biq, PerturbationH.isotropic(biq.ball, 0.1), [0.0], 50)
    S2 = tilt_map(biq, PerturbationH.isotropic(biq.ball, 0.2), [0.0], 50)
    D = np.linspace(0, 1, 41)[:, None]
    chk = nadler_lim_check(S1, S2, 0.1, D, fill=0.0125)
    assert chk.verdict in ("holds", "holds (marginal)")
    assert chk.lhs == pytest.approx(1 / 1.05 - 1 / 1.1, abs=0.03)
