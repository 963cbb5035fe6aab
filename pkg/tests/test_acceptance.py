"""Acceptance criteria, one test per criterion, each at its stated tolerance.

Every test records a ``criterion N: PASS|FAIL`` line; the lines are printed in
the pytest terminal summary and when this file is run as a script.
"""

import filecmp
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import excess_double_loop, hausdorff_double_loop, min_norm_by_grid
from tiltcond.catalog import biquadratic, planar_pair, planar_triangle, quartic_pair, scalar_square
from tiltcond.conditioning import ScaleSchedule, global_condition_number, local_condition_number, positivity_witness
from tiltcond.distance import fixed_point_solution_set, verify_global_bound, verify_pointwise_bound
from tiltcond.efficient_set import weakly_efficient_set
from tiltcond.minnorm import hull_lipschitz_constant, min_norm_point, stationarity
from tiltcond.problem import PerturbationH, perturb_componentwise
from tiltcond.setdist import excess, hausdorff


def record(n, ok, detail):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


CATALOG = {
    "quartic-pair": (quartic_pair, None),
    "biquadratic": (biquadratic, None),
    "scalar": (scalar_square, None),
    "planar-pair": (planar_pair, None),
    "planar-triangle": (planar_triangle, 10),
}


def test_criterion_01_segment_endpoints():
    f = quartic_pair()
    details, ok = [], True
    for p in (0.05, 0.1, 0.2):
        t0 = time.perf_counter()
        c = weakly_efficient_set(f, [p])
        dt = time.perf_counter() - t0
        lo_err = abs(c.points.min() - p / 2)
        hi_err = abs(c.points.max() - (p / 4) ** (1 / 3))
        ok &= lo_err <= 1e-3 and hi_err <= 1e-3 and dt < 5
        details.append(f"p={p}: err=({lo_err:.1e},{hi_err:.1e}) {dt:.2f}s")
    record(1, ok, "; ".join(details))


def test_criterion_02_divergence_detected():
    f = quartic_pair()
    t0 = time.perf_counter()
    loc = local_condition_number(f, [0.0])
    glob = global_condition_number(f)
    dt = time.perf_counter() - t0
    ok = all(e.classification == "divergent" and 0.57 <= e.alpha <= 0.77 for e in (loc, glob)) and dt < 60
    record(2, ok, f"local {loc.classification} alpha={loc.alpha:.3f}; "
                  f"global {glob.classification} alpha={glob.alpha:.3f}; {dt:.1f}s")


def test_criterion_03_finite_oracle():
    f = biquadratic()
    t0 = time.perf_counter()
    glob = global_condition_number(f)
    loc = local_condition_number(f, [0.0])
    dt = time.perf_counter() - t0
    ok = (glob.classification == "finite" and 0.475 <= glob.value <= 0.525
          and loc.classification == "finite" and 0.45 <= loc.value <= 0.55 and dt < 60)
    record(3, ok, f"c*={glob.value:.6f} c(0)={loc.value:.6f} {dt:.1f}s")


def test_criterion_04_scalar_reduction():
    est = global_condition_number(scalar_square())
    ok = est.classification == "finite" and abs(est.value - 0.5) <= 1e-3
    record(4, ok, f"c*={est.value:.9f} (unique minimizer p/2 gives 0.5)")


def test_criterion_05_min_norm_oracle():
    rng = np.random.default_rng(2024)
    worst_gap = worst_res = 0.0
    for _ in range(100):
        m, n = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        V = rng.uniform(-1, 1, (m, n))
        r = min_norm_point(V)
        worst_gap = max(worst_gap, abs(r.norm - min_norm_by_grid(V, 1e-3)))
        worst_res = max(worst_res, -r.optimality_residual(V))
    record(5, worst_gap <= 1e-3 and worst_res <= 1e-9,
           f"max |norm - grid oracle|={worst_gap:.2e}, worst Wolfe residual={worst_res:.2e}")


def test_criterion_06_stationarity_lipschitz():
    rng = np.random.default_rng(6)
    worst = -math.inf
    for make, _ in CATALOG.values():
        f = make()
        K = hull_lipschitz_constant(f).K
        for _ in range(200):
            x, y = rng.standard_normal((2, f.n))
            x *= f.radius * rng.random() / np.linalg.norm(x)
            y *= f.radius * rng.random() / np.linalg.norm(y)
            worst = max(worst, abs(stationarity(f, x) - stationarity(f, y)) - K * np.linalg.norm(x - y))
    record(6, worst <= 1e-6, f"max(|s(x)-s(y)| - K|x-y|) = {worst:.2e} over 5 problems x 200 pairs")


def test_criterion_07_positivity():
    finest = {}
    for name, (make, N) in CATALOG.items():
        f = make()
        pairs = 16 if N else 64
        finest[name] = global_condition_number(f, ScaleSchedule(pairs_per_scale=pairs), N).lower_confidence
    w = positivity_witness(biquadratic(), [0.0])
    ok = min(finest.values()) >= 1e-4 and w.satisfied and abs(w.kappa - 2) <= 0.2
    record(7, ok, f"min finest quotient={min(finest.values()):.3g}; kappa={w.kappa:.6f}")


def test_criterion_08_fixed_point_lemma():
    f = biquadratic()
    details, ok = [], True
    for eps in (0.1, 0.2):
        h = PerturbationH.isotropic(f.ball, eps)
        g = perturb_componentwise(f, h)
        for p in (0.0, 0.1):
            run = fixed_point_solution_set(f, h, [p])
            d = hausdorff(run.limit, weakly_efficient_set(g, [p])).value
            ok &= d <= 1e-3 and run.theta_hat <= 0.6 * eps
            details.append(f"eps={eps},p={p}: dH={d:.1e} theta={run.theta_hat:.3f}")
    record(8, ok, "; ".join(details))


def test_criterion_09_global_bound_sweep():
    # B(0, 3): max|grad h| = 3 eps stays below delta_f = 4 for the whole sweep
    f = biquadratic(3.0)
    details, ok = [], True
    for eps in (0.1, 0.5, 1.0):
        h = PerturbationH.isotropic(f.ball, eps)
        glob = verify_global_bound(f, h)
        target = 1 / (2 + eps)
        ok &= (glob.verdict == "holds" and abs(glob.lhs - target) <= 0.05 * target
               and glob.lhs <= 0.5 / (1 - 0.5 * eps)
               and glob.flags["ii_grad_h_below_delta"] and glob.flags["iii_d_star_below_inverse_c"])
        loc = verify_pointwise_bound(f, h, [0.0])
        ok &= loc.verdict == "holds"
        details.append(f"eps={eps}: c*(g)={glob.lhs:.4f} rhs={glob.rhs:.4f} pointwise {loc.verdict}")
    record(9, ok, "; ".join(details))


def test_criterion_10_set_metric_conventions():
    rng = np.random.default_rng(10)
    ok = True
    for _ in range(100):
        n = int(rng.integers(1, 4))
        A = rng.normal(size=(int(rng.integers(1, 51)), n))
        B = rng.normal(size=(int(rng.integers(1, 51)), n))
        ok &= excess(A, B).value == excess_double_loop(A, B)
        ok &= hausdorff(A, B).value == hausdorff_double_loop(A, B)
    empty = np.zeros((0, 2))
    A = rng.normal(size=(5, 2))
    ok &= excess(empty, A).value == 0.0 and excess(empty, empty).value == 0.0
    ok &= excess(A, empty).value == math.inf
    record(10, bool(ok), "100 random cloud pairs match the double loop exactly; e(empty,A)=0, e(A,empty)=inf")


def test_criterion_11_catalog_determinism(tmp_path):
    dirs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        cmd = [sys.executable, "-m", "tiltcond.cli", "catalog", "--seed", "7", "--out", str(d),
               "--report", str(tmp_path / f"report{k}.json")]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        assert proc.returncode in (0, 1), proc.stderr
        dirs.append(d)
    names = sorted(p.name for p in dirs[0].glob("*.csv"))
    same = names == sorted(p.name for p in dirs[1].glob("*.csv"))
    match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
    same &= not mismatch and not errors and len(match) == len(names) > 1
    record(11, same, f"{len(match)} CSV files byte-identical across two runs with seed 7")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
