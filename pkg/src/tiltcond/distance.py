"""Pseudodistances between objectives, set-valued fixed points, and distance-theorem checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._rng import stream, uniform_ball
from .conditioning import (
    ConditionEstimate,
    ScaleSchedule,
    Thresholds,
    global_condition_number,
    local_condition_number,
    sampled_quotient_max,
)
from .efficient_set import (
    PointCloud,
    _fill_distance,
    dedup,
    default_grid_resolution,
    delta_estimate,
    is_weakly_efficient,
    minimize_scalarizations,
    simplex_grid,
    weakly_efficient_set,
)
from .errors import (
    ContractionPreconditionViolated,
    DomainMismatch,
    DimensionMismatch,
    NonconvexInput,
    NotContractive,
    SolutionSetTouchesBoundary,
)
from .problem import (
    Component,
    PerturbationH,
    Polynomial,
    Quadratic,
    VectorFunction,
    as_point,
    perturb_componentwise,
    weighted_sum,
)
from .setdist import hausdorff

# --------------------------------------------------------------------------- pseudodistances


@dataclass(frozen=True)
class PseudodistanceValue:
    value: float
    method: str  # "exact-quadratic" | "exact" | "grid" | "sampled"
    n_pairs: int = 0
    attaining_pair: tuple | None = None
    weights: np.ndarray | None = None


def _as_polynomial(c: Component):
    if isinstance(c, Polynomial):
        return c
    if isinstance(c, Quadratic) and c.dim == 1:
        return c.as_polynomial()
    return None


def d_z(phi1: Component, phi2: Component, radius: float, n_pairs: int = 2000, seed: int = 0) -> PseudodistanceValue:
    """``sup |D phi1(x) - D phi2(x) - D phi1(x') + D phi2(x')| / |x - x'|`` over the ball.

    Exact (spectral norm of the Hessian difference) for two quadratics; a dense
    second-derivative grid for univariate polynomials; otherwise a lower
    estimate from seeded random pairs plus all pairs of a coarse grid.
    """
    if phi1.dim != phi2.dim:
        raise DomainMismatch("both functions must live on the same ball")
    n = phi1.dim
    if isinstance(phi1, Quadratic) and isinstance(phi2, Quadratic):
        return PseudodistanceValue(float(np.linalg.norm(phi1.Q - phi2.Q, 2)), "exact-quadratic")
    a, b = _as_polynomial(phi1), _as_polynomial(phi2)
    if a is not None and b is not None:
        diff = Polynomial(tuple((a._poly - b._poly).coef))
        return PseudodistanceValue(diff.lipschitz_gradient(radius)[0], "grid")

    def dgrad(X):
        return phi1.grad(X) - phi2.grad(X)

    rng = stream(seed, "d_z")
    X = uniform_ball(rng, n_pairs, n) * radius
    Y = uniform_ball(rng, n_pairs, n) * radius
    side = 9 if n <= 2 else 4
    axes = np.linspace(-radius, radius, side)
    G = np.stack(np.meshgrid(*([axes] * n), indexing="ij"), -1).reshape(-1, n)
    G = G[np.linalg.norm(G, axis=1) <= radius]
    i, j = np.triu_indices(len(G), 1)
    X = np.concatenate([X, G[i]])
    Y = np.concatenate([Y, G[j]])
    gap = np.linalg.norm(X - Y, axis=1)
    keep = gap > 1e-12
    X, Y, gap = X[keep], Y[keep], gap[keep]
    q = np.linalg.norm(dgrad(X) - dgrad(Y), axis=1) / gap
    k = int(np.argmax(q))
    return PseudodistanceValue(float(q[k]), "sampled", len(q), (X[k], Y[k]))


def d_star(
    f: VectorFunction,
    g: VectorFunction,
    grid_resolution: int | None = None,
    n_pairs: int = 2000,
    seed: int = 0,
    use_shortcut: bool = True,
) -> PseudodistanceValue:
    """``max_lambda d_Z(sum lambda_i f_i, sum lambda_i g_i)`` over a simplex grid.

    When ``g`` was built as ``f + h e`` the weighted sums differ by ``h`` for
    every weight, so the value is ``lip(grad h)`` exactly.
    """
    if f.m != g.m or f.ball != g.ball:
        raise DimensionMismatch("f and g must have the same number of components and the same ball")
    if use_shortcut and g.origin is not None and g.origin[0] == f:
        h = g.origin[1]
        return PseudodistanceValue(h.lip_grad_h, "exact" if h.lip_exact else "grid")
    if use_shortcut and f.origin is not None and f.origin[0] == g:
        h = f.origin[1]
        return PseudodistanceValue(h.lip_grad_h, "exact" if h.lip_exact else "grid")
    N = grid_resolution or min(default_grid_resolution(f.m), 50)
    best = None
    for lam in simplex_grid(f.m, N):
        val = d_z(weighted_sum(f.components, lam), weighted_sum(g.components, lam), f.radius, n_pairs, seed)
        if best is None or val.value > best[0].value:
            best = (val, lam)
    val, lam = best
    return PseudodistanceValue(val.value, val.method, val.n_pairs, val.attaining_pair, lam)


# --------------------------------------------------------------------------- fixed points


@dataclass(frozen=True)
class FixedPointRun:
    deltas: tuple[float, ...]
    theta_hat: float
    converged: bool
    iterations: int
    limit: PointCloud
    iterates: tuple[np.ndarray, ...] = field(repr=False, default=())
    budget: int = 0


def _geometric_ratio(deltas) -> float:
    d = [x for x in deltas if x > 0]
    if len(d) < 2:
        return 0.0
    ratios = np.array(d[1:]) / np.array(d[:-1])
    return float(np.exp(np.mean(np.log(ratios))))


def fixed_point_solution_set(
    f: VectorFunction,
    h: PerturbationH,
    p,
    grid_resolution: int | None = None,
    max_iter: int = 200,
    tol: float = 1e-6,
    delta: float | None = None,
    contraction_bound: float | None = None,
    keep_iterates: bool = False,
) -> FixedPointRun:
    """Solution set of ``g = f + h e`` at tilt ``p`` as the fixed points of ``x -> WE_f(p - grad h(x))``.

    Iterates are clouds labelled by simplex weights.  At every step each point
    is replaced by the member of its image cloud carrying the same weight, so
    the cloud size stays equal to the grid budget.  Stops when the Hausdorff
    step falls below ``tol``.
    """
    if not f.certificate.convex:
        raise NonconvexInput("f must be certified convex")
    p = as_point(p, f.n)
    if delta is None:
        delta = delta_estimate(f).delta
    reach = float(np.linalg.norm(p)) + h.max_grad_norm
    if reach >= delta:
        raise ContractionPreconditionViolated(f"|p| + max|grad h| = {reach:.6g} is not below delta_f = {delta:.6g}")
    if contraction_bound is None and h.lip_grad_h > 0:
        contraction_bound = sampled_quotient_max(f, reach) * h.lip_grad_h
    if contraction_bound is not None and contraction_bound >= 1:
        raise ContractionPreconditionViolated(f"estimated contraction constant {contraction_bound:.6g} is not below 1")

    N = grid_resolution or default_grid_resolution(f.m)
    W = simplex_grid(f.m, N)
    X, conv = minimize_scalarizations(f, p, W)
    iterates = [X]
    prev_cloud = dedup(X)[0]
    deltas = []
    converged = False
    for _ in range(max_iter):
        X, conv = minimize_scalarizations(f, p - h.grad_at(X), W)
        cloud = dedup(X)[0]
        step = hausdorff(cloud, prev_cloud).value
        deltas.append(step)
        if keep_iterates:
            iterates.append(X)
        prev_cloud = cloud
        if step <= tol:
            converged = True
            break
    g = perturb_componentwise(f, h)
    limit, w = dedup(X, weights=W)
    fill = _fill_distance(g, p, limit, N) if g.certificate.convex else None
    return FixedPointRun(tuple(deltas), _geometric_ratio(deltas), converged and bool(conv.all()), len(deltas),
                         PointCloud(limit, p, N, fill, w), tuple(iterates) if keep_iterates else (), len(W))


def nearest_point_fixed_points(S: Callable, starts: np.ndarray, max_iter: int = 500, tol: float = 1e-12):
    """Fixed points of a set-valued map by the nearest-point Picard iteration from each start."""
    out = []
    for x in np.atleast_2d(starts):
        for _ in range(max_iter):
            img = np.atleast_2d(S(x))
            y = img[np.argmin(np.linalg.norm(img - x, axis=1))]
            moved = float(np.linalg.norm(y - x))
            x = y
            if moved <= tol:
                break
        out.append(x)
    return dedup(np.array(out))[0]


# --------------------------------------------------------------------------- bound checks


@dataclass(frozen=True)
class BoundCheck:
    verdict: str  # "holds" | "holds (marginal)" | "violated" | "hypotheses-unmet"
    flags: dict
    lhs: float | None = None
    rhs: float | None = None
    lhs_bar: float = 0.0
    rhs_bar: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def hypotheses_met(self) -> bool:
        return all(self.flags.values())


def _verdict(lhs, lhs_bar, rhs, rhs_bar) -> str:
    if lhs <= rhs:
        return "holds"
    if lhs - lhs_bar <= rhs + rhs_bar:
        return "holds (marginal)"
    return "violated"


def _unmet(flags, **details) -> BoundCheck:
    return BoundCheck("hypotheses-unmet", flags, details=details)


def pointwise_lip_grad(h: PerturbationH, x_bar, n_pairs: int = 512, seed: int = 0) -> tuple[float, float]:
    """``(lip(grad h; B(x_bar, rho)), lip(grad h; B(0, r)))`` with ``rho = r / 100``."""
    glob = h.lip_grad_h
    if isinstance(h.h, Quadratic):
        return glob, glob
    rho = 1e-2 * h.ball.radius
    rng = stream(seed, "lip-local")
    X = x_bar + rho * uniform_ball(rng, n_pairs, h.ball.dimension)
    Y = x_bar + rho * uniform_ball(rng, n_pairs, h.ball.dimension)
    gap = np.linalg.norm(X - Y, axis=1)
    q = np.linalg.norm(h.grad_at(X) - h.grad_at(Y), axis=1) / np.maximum(gap, 1e-300)
    return min(float(q.max()), glob), glob


def verify_pointwise_bound(
    f: VectorFunction,
    h: PerturbationH,
    x_bar,
    schedule: ScaleSchedule = ScaleSchedule(),
    grid_resolution: int | None = None,
    thresholds: Thresholds = Thresholds(),
) -> BoundCheck:
    """Check ``c(x_bar, g) <= c(x_bar, f) / (1 - c(x_bar, f) lip(grad h; x_bar))`` for ``g = f + h e``."""
    x_bar = f.ball.check(x_bar)
    g = perturb_componentwise(f, h)
    flags = {
        "f_convex": f.certificate.convex,
        "g_convex": g.certificate.convex,
        "x_bar_solution": f.certificate.convex and is_weakly_efficient(f, np.zeros(f.n), x_bar).is_member,
        "grad_h_vanishes": float(np.linalg.norm(h.grad_at(x_bar))) <= 1e-9,
    }
    if not all(flags.values()):
        return _unmet(flags)
    c_f = local_condition_number(f, x_bar, schedule, grid_resolution, thresholds=thresholds)
    flags["f_well_conditioned"] = c_f.classification == "finite"
    if not flags["f_well_conditioned"]:
        return _unmet(flags, c_f=c_f)
    lip_local, lip_global = pointwise_lip_grad(h, x_bar, seed=schedule.seed)
    flags["lip_times_c_below_one"] = lip_local * (c_f.value + c_f.uncertainty) < 1
    if not flags["lip_times_c_below_one"]:
        return _unmet(flags, c_f=c_f, lip_local=lip_local, lip_global=lip_global)
    c_g = local_condition_number(g, x_bar, schedule, grid_resolution, thresholds=thresholds)
    rhs = c_f.value / (1 - c_f.value * lip_local)
    hi = c_f.value + c_f.uncertainty
    rhs_bar = hi / (1 - hi * lip_local) - rhs
    lhs_bar = c_g.uncertainty
    if c_g.classification != "finite":
        lhs, lhs_bar = math.inf, 0.0
    else:
        lhs = c_g.value
    return BoundCheck(_verdict(lhs, lhs_bar, rhs, rhs_bar), flags, lhs, rhs, lhs_bar, rhs_bar,
                      {"c_f": c_f, "c_g": c_g, "lip_local": lip_local, "lip_global": lip_global})


def verify_global_bound(
    f: VectorFunction,
    h: PerturbationH,
    schedule: ScaleSchedule = ScaleSchedule(),
    grid_resolution: int | None = None,
    thresholds: Thresholds = Thresholds(),
) -> BoundCheck:
    """Check ``c*(g) <= c*(f) / (1 - c*(f) d*(f, g))`` for ``g = f + h e``."""
    g = perturb_componentwise(f, h)
    flags = {"f_convex": f.certificate.convex, "g_convex": g.certificate.convex}
    if not all(flags.values()):
        return _unmet(flags)
    try:
        delta_f = delta_estimate(f, seed=schedule.seed).delta
    except SolutionSetTouchesBoundary:
        flags["f_interior"] = False
        return _unmet(flags)
    try:
        delta_g = delta_estimate(g, seed=schedule.seed).delta
        flags["i_g_interior"] = True
    except SolutionSetTouchesBoundary:
        flags["i_g_interior"] = False
        return _unmet(flags, delta_f=delta_f)
    max_grad = h.max_grad_norm
    flags["ii_grad_h_below_delta"] = max_grad < delta_f
    c_f = global_condition_number(f, schedule, grid_resolution, delta_f, thresholds)
    flags["f_in_W1_star"] = c_f.classification == "finite"
    dstar = d_star(f, g).value
    details = {"c_f": c_f, "d_star": dstar, "delta_f": delta_f, "delta_g": delta_g, "max_grad_h": max_grad}
    if not flags["f_in_W1_star"]:
        return _unmet(flags, **details)
    flags["iii_d_star_below_inverse_c"] = dstar * (c_f.value + c_f.uncertainty) < 1
    if not all(flags.values()):
        return _unmet(flags, **details)
    c_g = global_condition_number(g, schedule, grid_resolution, delta_g, thresholds)
    details["c_g"] = c_g
    rhs = c_f.value / (1 - c_f.value * dstar)
    hi = c_f.value + c_f.uncertainty
    rhs_bar = hi / (1 - hi * dstar) - rhs
    if c_g.classification != "finite":
        lhs, lhs_bar = math.inf, 0.0
    else:
        lhs, lhs_bar = c_g.value, c_g.uncertainty
    return BoundCheck(_verdict(lhs, lhs_bar, rhs, rhs_bar), flags, lhs, rhs, lhs_bar, rhs_bar, details)


def nadler_lim_check(
    S1: Callable,
    S2: Callable,
    theta: float,
    domain,
    fill: float = 0.0,
    slack: float = 1e-9,
    max_iter: int = 500,
) -> BoundCheck:
    """Check ``d_H(F(S1), F(S2)) <= sup_x d_H(S1(x), S2(x)) / (1 - theta)`` on a sampled domain.

    ``S1`` and ``S2`` map a point to a cloud (array of points).  Both maps must
    be ``theta``-contractive on every sampled pair of domain points, up to
    ``slack + 2 fill``.  Fixed points are found by nearest-point Picard
    iteration started from every domain point.
    """
    if not 0 <= theta < 1:
        raise NotContractive(f"theta = {theta} must lie in [0, 1)")
    D = np.atleast_2d(np.asarray(domain, dtype=float))
    if D.shape[0] == 1 and D.shape[1] > 1:
        D = D.T
    images1 = [np.atleast_2d(S1(x)) for x in D]
    images2 = [np.atleast_2d(S2(x)) for x in D]
    i, j = np.triu_indices(len(D), 1)
    worst = 0.0
    for imgs in (images1, images2):
        for a, b in zip(i, j):
            gap = float(np.linalg.norm(D[a] - D[b]))
            excess = hausdorff(imgs[a], imgs[b]).value - theta * gap
            worst = max(worst, excess)
    if worst > slack + 2 * fill:
        raise NotContractive(f"contraction with theta = {theta} fails on samples by {worst:.3g}")
    F1 = nearest_point_fixed_points(S1, D, max_iter)
    F2 = nearest_point_fixed_points(S2, D, max_iter)
    lhs = hausdorff(F1, F2).value
    sup = max(hausdorff(a, b).value for a, b in zip(images1, images2))
    rhs = sup / (1 - theta)
    lhs_bar = 2 * fill
    rhs_bar = 2 * fill / (1 - theta)
    flags = {"contractive_on_samples": True}
    return BoundCheck(_verdict(lhs, lhs_bar, rhs, rhs_bar), flags, lhs, rhs, lhs_bar, rhs_bar,
                      {"fixed_points_1": F1, "fixed_points_2": F2, "sup_image_distance": sup})


def tilt_map(f: VectorFunction, h: PerturbationH, p, grid_resolution: int | None = None) -> Callable:
    """``x -> cloud of WE_f(p - grad h(x))``, the map whose fixed points form ``WE_{f + h e}(p)``."""
    p = as_point(p, f.n)

    def S(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return weakly_efficient_set(f, p - h.grad_at(x), grid_resolution).points

    return S


__all__ = [
    "BoundCheck",
    "ConditionEstimate",
    "FixedPointRun",
    "PseudodistanceValue",
    "d_star",
    "d_z",
    "fixed_point_solution_set",
    "nadler_lim_check",
    "tilt_map",
    "verify_global_bound",
    "verify_pointwise_bound",
]
