"""Built-in problems with closed-form answers, and the suite of checks run against them."""

from __future__ import annotations

import csv
import io
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._rng import stream, uniform_ball
from .conditioning import (
    ScaleSchedule,
    global_condition_number,
    local_condition_number,
    positivity_witness,
)
from .distance import fixed_point_solution_set, verify_global_bound, verify_pointwise_bound
from .efficient_set import weakly_efficient_set
from .minnorm import hull_lipschitz_constant, min_norm_point, stationarity_batch
from .problem import Ball, PerturbationH, Polynomial, Quadratic, VectorFunction, perturb_componentwise
from .setdist import excess, hausdorff

# --------------------------------------------------------------------------- problems


@dataclass(frozen=True)
class CatalogProblem:
    name: str
    f: VectorFunction
    note: str
    grid_resolution: int | None = None
    pairs_per_scale: int = 64
    global_value: float | None = None  # closed-form c*(f), None when divergent


def quartic_pair() -> VectorFunction:
    """``(x^2, x^4)`` on ``[-1, 1]``; ``WE_f(p) = [p/2, (p/4)^(1/3)]`` for small ``p > 0``."""
    return VectorFunction(Ball(1, 1.0), (Polynomial((0.0, 0.0, 1.0)), Polynomial((0.0, 0.0, 0.0, 0.0, 1.0))))


def biquadratic(radius: float = 2.0) -> VectorFunction:
    """``(x^2, (x - 1)^2)``; ``WE_f(p) = [p/2, p/2 + 1]``."""
    return VectorFunction(Ball(1, radius), (Quadratic([[2.0]], [0.0]), Quadratic([[2.0]], [-2.0], 1.0)))


def scalar_square() -> VectorFunction:
    """``x^2`` on ``[-1, 1]`` with unique minimizer ``p / 2``."""
    return VectorFunction(Ball(1, 1.0), (Quadratic([[2.0]], [0.0]),))


def planar_pair() -> VectorFunction:
    """``(|x|^2, |x - a|^2)`` with ``a = (1, 1/2)`` on ``B(0, 3)``; a segment moving by ``p / 2``."""
    a = np.array([1.0, 0.5])
    return VectorFunction(Ball(2, 3.0), (Quadratic(2 * np.eye(2), [0.0, 0.0]), Quadratic(2 * np.eye(2), -2 * a, a @ a)))


def planar_triangle() -> VectorFunction:
    """Three squared distances to the vertices of a right triangle; ``WE_f(p)`` is the triangle shifted by ``p / 2``."""
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return VectorFunction(Ball(2, 3.0), tuple(Quadratic(2 * np.eye(2), -2 * v, v @ v) for v in verts))


def problems() -> dict[str, CatalogProblem]:
    return {
        "quartic-pair": CatalogProblem("quartic-pair", quartic_pair(), "(x^2, x^4) on [-1, 1]"),
        "biquadratic": CatalogProblem("biquadratic", biquadratic(), "(x^2, (x-1)^2) on B(0, 2)", global_value=0.5),
        "scalar": CatalogProblem("scalar", scalar_square(), "x^2 on [-1, 1]", global_value=0.5),
        "planar-pair": CatalogProblem("planar-pair", planar_pair(), "(|x|^2, |x-a|^2) on B(0, 3)", global_value=0.5),
        "planar-triangle": CatalogProblem("planar-triangle", planar_triangle(), "three vertex distances on B(0, 3)",
                                          grid_resolution=10, pairs_per_scale=16, global_value=0.5),
    }


# --------------------------------------------------------------------------- checks


@dataclass
class Check:
    criterion: int
    name: str
    passed: bool
    value: str
    expected: str
    seconds: float = 0.0


@dataclass
class CatalogReport:
    checks: list[Check] = field(default_factory=list)
    artifacts: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["criterion", "check", "value", "expected", "result"])
        for c in self.checks:
            w.writerow([c.criterion, c.name, c.value, c.expected, "pass" if c.passed else "fail"])
        return buf.getvalue()

    def table(self) -> str:
        rows = [(str(c.criterion), c.name, c.value, c.expected, "PASS" if c.passed else "FAIL") for c in self.checks]
        head = ("crit", "check", "value", "expected", "result")
        widths = [max(len(r[i]) for r in rows + [head]) for i in range(5)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        return "\n".join([fmt.format(*head)] + [fmt.format(*r) for r in rows])


def _g(x: float) -> str:
    return format(float(x), ".6g")


class _Runner:
    def __init__(self, report: CatalogReport, progress=None):
        self.report = report
        self.progress = progress

    def check(self, criterion: int, name: str, passed: bool, value: str, expected: str, t0: float):
        c = Check(criterion, name, bool(passed), value, expected, time.perf_counter() - t0)
        self.report.checks.append(c)
        if self.progress is not None:
            self.progress(c)


def grid_min_norm(V: np.ndarray, step: float = 1e-3, coarse: float = 0.05) -> float:
    """Smallest ``|lambda' V|`` over simplex weights, by grid search.

    With more than ``dim + 1`` rows the search runs on every face spanned by
    ``dim + 1`` of them, since the nearest hull point lies in such a face and
    a face is where the objective is strictly convex (a flat valley in the
    weights would otherwise stall local refinement).  Each face is searched
    exhaustively at ``step`` when its grid is small; otherwise a coarse
    exhaustive grid is followed by local refinement down to ``step``.
    """
    V = np.asarray(V, dtype=float)
    m, dim = V.shape
    if m > dim + 1:
        return min(grid_min_norm(V[list(S)], step, coarse) for S in itertools.combinations(range(m), dim + 1))

    def lattice(n):
        for c in itertools.combinations(range(n + m - 1), m - 1):
            b = (-1,) + c + (n + m - 1,)
            yield [b[i + 1] - b[i] - 1 for i in range(m)]

    def norms(L):
        return np.linalg.norm(L @ V, axis=1)

    n_fine = round(1 / step)
    if math.comb(n_fine + m - 1, m - 1) <= 2_000_000:
        L = np.array(list(lattice(n_fine)), dtype=float) / n_fine
        return float(norms(L).min())
    n0 = round(1 / coarse)
    L = np.array(list(lattice(n0)), dtype=float) / n0
    best = L[np.argmin(norms(L))]
    h = coarse
    offsets = np.array(list(itertools.product((-2, -1, 0, 1, 2), repeat=m)), dtype=float)
    while True:
        for _ in range(200):
            cand = best + h * offsets
            cand = cand[np.all(cand >= -1e-15, axis=1)]
            cand = np.clip(cand, 0, None)
            cand /= cand.sum(axis=1, keepdims=True)
            nxt = cand[np.argmin(norms(cand))]
            if np.allclose(nxt, best):
                break
            best = nxt
        if h <= step:
            return float(norms(best[None])[0])
        h = max(h / 5, step)


def _check_quartic(r: _Runner, seed: int, out: dict):
    f = quartic_pair()
    for p in (0.05, 0.1, 0.2):
        t0 = time.perf_counter()
        cloud = weakly_efficient_set(f, [p])
        lo, hi = float(cloud.points.min()), float(cloud.points.max())
        ok = abs(lo - p / 2) <= 1e-3 and abs(hi - (p / 4) ** (1 / 3)) <= 1e-3
        ok = ok and time.perf_counter() - t0 < 5
        r.check(1, f"quartic-pair WE({p}) endpoints", ok, f"[{_g(lo)}, {_g(hi)}]",
                f"[{_g(p / 2)}, {_g((p / 4) ** (1 / 3))}] +-1e-3", t0)
    sched = ScaleSchedule(seed=seed)
    for kind in ("local", "global"):
        t0 = time.perf_counter()
        if kind == "local":
            est = local_condition_number(f, [0.0], sched)
        else:
            est = global_condition_number(f, sched)
        out[f"quartic-pair_{kind}.csv"] = est.to_csv()
        ok = est.classification == "divergent" and 0.57 <= est.alpha <= 0.77 and time.perf_counter() - t0 < 60
        r.check(2, f"quartic-pair {kind} divergence", ok, f"{est.classification} alpha={_g(est.alpha)}",
                "divergent, alpha in [0.57, 0.77]", t0)


def _check_finite(r: _Runner, seed: int, out: dict):
    sched = ScaleSchedule(seed=seed)
    f = biquadratic()
    t0 = time.perf_counter()
    est = global_condition_number(f, sched)
    out["biquadratic_global.csv"] = est.to_csv()
    ok = est.classification == "finite" and 0.475 <= est.value <= 0.525 and time.perf_counter() - t0 < 60
    r.check(3, "biquadratic global c*", ok, f"{est.classification} {_g(est.value)}", "[0.475, 0.525]", t0)
    t0 = time.perf_counter()
    est = local_condition_number(f, [0.0], sched)
    out["biquadratic_local.csv"] = est.to_csv()
    ok = est.classification == "finite" and 0.45 <= est.value <= 0.55 and time.perf_counter() - t0 < 60
    r.check(3, "biquadratic local c(0)", ok, f"{est.classification} {_g(est.value)}", "[0.45, 0.55]", t0)
    t0 = time.perf_counter()
    est = global_condition_number(scalar_square(), sched)
    out["scalar_global.csv"] = est.to_csv()
    ok = est.classification == "finite" and abs(est.value - 0.5) <= 1e-3
    r.check(4, "scalar global c*", ok, f"{est.classification} {_g(est.value)}", "0.5 +-1e-3", t0)


def _check_minnorm(r: _Runner, seed: int):
    t0 = time.perf_counter()
    rng = stream(seed, "minnorm-oracle")
    worst_gap, worst_res = 0.0, 0.0
    for _ in range(100):
        m = int(rng.integers(1, 6))
        n = int(rng.integers(1, 4))
        V = rng.uniform(-1, 1, (m, n))
        res = min_norm_point(V)
        worst_gap = max(worst_gap, abs(res.norm - grid_min_norm(V)))
        worst_res = max(worst_res, -res.optimality_residual(V))
    ok = worst_gap <= 1e-3 and worst_res <= 1e-9
    r.check(5, "min-norm vs simplex grid (100 sets)", ok, f"gap={_g(worst_gap)} residual={_g(worst_res)}",
            "gap<=1e-3, residual<=1e-9", t0)


def _check_lipschitz(r: _Runner, seed: int, probs: dict[str, CatalogProblem]):
    for name, cp in probs.items():
        t0 = time.perf_counter()
        f = cp.f
        rng = stream(seed, "lipschitz", name)
        X = uniform_ball(rng, 200, f.n) * f.radius
        Y = uniform_ball(rng, 200, f.n) * f.radius
        K = hull_lipschitz_constant(f).K
        slack = np.abs(stationarity_batch(f, X) - stationarity_batch(f, Y)) - K * np.linalg.norm(X - Y, axis=1)
        worst = float(slack.max())
        r.check(6, f"{name} |s(x)-s(y)| <= K|x-y|", worst <= 1e-6, f"max excess {_g(worst)}", "<= 1e-6", t0)


def _check_positivity(r: _Runner, seed: int, probs: dict[str, CatalogProblem], out: dict):
    for name, cp in probs.items():
        if not cp.f.certificate.convex:
            continue
        t0 = time.perf_counter()
        est = global_condition_number(cp.f, ScaleSchedule(seed=seed, pairs_per_scale=cp.pairs_per_scale),
                                      cp.grid_resolution)
        out.setdefault(f"{name}_global.csv", est.to_csv())
        r.check(7, f"{name} finest-scale quotient", est.lower_confidence >= 1e-4, _g(est.lower_confidence),
                ">= 1e-4", t0)
    t0 = time.perf_counter()
    w = positivity_witness(biquadratic(), [0.0], seed=seed)
    ok = w.satisfied and abs(w.kappa - 2) <= 0.2
    r.check(7, "biquadratic positivity witness", ok, f"kappa={_g(w.kappa)}", "2 +-10%", t0)


def _check_fixed_point(r: _Runner):
    f = biquadratic()
    for eps in (0.1, 0.2):
        h = PerturbationH.isotropic(f.ball, eps)
        g = perturb_componentwise(f, h)
        for p in (0.0, 0.1):
            t0 = time.perf_counter()
            run = fixed_point_solution_set(f, h, [p])
            d = hausdorff(run.limit, weakly_efficient_set(g, [p])).value
            ok = run.converged and d <= 1e-3 and run.theta_hat <= 0.6 * eps
            r.check(8, f"fixed point eps={eps} p={p}", ok, f"dH={_g(d)} theta={_g(run.theta_hat)}",
                    f"dH<=1e-3, theta<={_g(0.6 * eps)}", t0)


def _check_eckart_young(r: _Runner, seed: int, out: dict):
    # radius 3 keeps max|grad h| = 3 eps below delta_f = 4 for every eps in the sweep
    f = biquadratic(3.0)
    sched = ScaleSchedule(seed=seed)
    for eps in (0.1, 0.5, 1.0):
        h = PerturbationH.isotropic(f.ball, eps)
        t0 = time.perf_counter()
        chk = verify_global_bound(f, h, sched)
        target = 1 / (2 + eps)
        lhs = chk.lhs if chk.lhs is not None else math.nan
        if "c_g" in chk.details:
            out[f"ey_global_eps{eps}.csv"] = chk.details["c_g"].to_csv()
        ok = (chk.verdict == "holds" and abs(lhs - target) <= 0.05 * target
              and chk.flags.get("ii_grad_h_below_delta", False) and chk.flags.get("iii_d_star_below_inverse_c", False))
        r.check(9, f"global bound eps={eps}", ok, f"{chk.verdict} lhs={_g(lhs)} rhs={_g(chk.rhs or math.nan)}",
                f"lhs={_g(target)} +-5% <= rhs", t0)
        t0 = time.perf_counter()
        chk = verify_pointwise_bound(f, h, [0.0], sched)
        lhs = chk.lhs if chk.lhs is not None else math.nan
        r.check(9, f"pointwise bound eps={eps}", chk.verdict == "holds", f"{chk.verdict} lhs={_g(lhs)}",
                "holds", t0)


def _check_setdist(r: _Runner, seed: int):
    t0 = time.perf_counter()
    rng = stream(seed, "setdist")
    ok = True
    for _ in range(50):
        n = int(rng.integers(1, 4))
        A = rng.normal(size=(int(rng.integers(1, 51)), n))
        B = rng.normal(size=(int(rng.integers(1, 51)), n))
        e_ab = max(min(math.sqrt(sum((a[k] - b[k]) ** 2 for k in range(n))) for b in B) for a in A)
        e_ba = max(min(math.sqrt(sum((a[k] - b[k]) ** 2 for k in range(n))) for a in A) for b in B)
        ok &= excess(A, B).value == e_ab and hausdorff(A, B).value == max(e_ab, e_ba)
    empty = np.zeros((0, 2))
    some = np.ones((3, 2))
    ok &= excess(empty, some).value == 0.0 and excess(some, empty).value == math.inf
    r.check(10, "excess/Hausdorff vs double loop, empty sets", bool(ok), "exact" if ok else "mismatch",
            "exact; e(empty,A)=0, e(A,empty)=inf", t0)


GROUPS = ("quartic-pair", "biquadratic", "minnorm", "lipschitz", "positivity", "fixed-point", "ey-sweep", "setdist")
ALIASES = {"paper-example": "quartic-pair"}


def run_catalog(seed: int = 0, only: str | None = None,
                progress: Callable[[Check], None] | None = None) -> CatalogReport:
    """Run the built-in suite; ``only`` restricts it to one group of :data:`GROUPS`."""
    only = ALIASES.get(only, only)
    if only is not None and only not in GROUPS:
        raise ValueError(f"unknown group {only!r}; choose from {', '.join(GROUPS)}")
    report = CatalogReport()
    r = _Runner(report, progress)
    out = report.artifacts
    probs = problems()
    steps = {
        "quartic-pair": lambda: _check_quartic(r, seed, out),
        "biquadratic": lambda: _check_finite(r, seed, out),
        "minnorm": lambda: _check_minnorm(r, seed),
        "lipschitz": lambda: _check_lipschitz(r, seed, probs),
        "positivity": lambda: _check_positivity(r, seed, probs, out),
        "fixed-point": lambda: _check_fixed_point(r),
        "ey-sweep": lambda: _check_eckart_young(r, seed, out),
        "setdist": lambda: _check_setdist(r, seed),
    }
    for name in GROUPS:
        if only is None or only == name:
            steps[name]()
    return report
