"""Pointwise and global condition numbers of the weakly efficient solution map.

Both condition numbers are limits as the tilt radius shrinks.  They are
estimated on a geometric schedule of radii ``eta_k = eta_0 2^-k``: at every
radius the largest sampled distance quotient is recorded, and the sequence of
per-scale maxima is classified as finite (plateau) or divergent (power-law
growth ``eta^-alpha``).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._rng import stream, uniform_ball
from .efficient_set import (
    PointCloud,
    default_grid_resolution,
    delta_estimate,
    is_weakly_efficient,
    weakly_efficient_set,
)
from .errors import GlobalEstimatePassed, NoExteriorDirection, NonconvexInput, NotASolution
from .minnorm import common_descent_direction, stationarity, stationarity_batch
from .problem import VectorFunction, as_point
from .setdist import nearest_distances

# points of one cloud certified stationary for the other tilt are at distance zero
# from the other solution set; stricter than the cloud membership tolerance
SET_MEMBER_TOL = 1e-9


@dataclass(frozen=True)
class Thresholds:
    alpha_min: float = 0.1
    r2_min: float = 0.9
    plateau: float = 0.05
    exclusion: float = 1e-3


@dataclass(frozen=True)
class ScaleSchedule:
    """Radii ``eta_0 2^-k`` for ``k = 0..k_max``; ``eta_0`` defaults to ``min(delta_f / 2, 0.5)``."""

    eta0: float | None = None
    k_max: int = 8
    pairs_per_scale: int = 64
    seed: int = 0

    def etas(self, delta: float) -> np.ndarray:
        eta0 = self.eta0 if self.eta0 is not None else min(delta / 2, 0.5)
        if not 0 < eta0 < delta:
            raise ValueError(f"eta_0 = {eta0} must lie in (0, delta_f = {delta})")
        return eta0 * 2.0 ** -np.arange(self.k_max + 1)


@dataclass(frozen=True)
class ScaleRow:
    index: int
    eta: float
    n_pairs: int
    n_excluded: int
    K: float
    err_bar: float
    p_best: np.ndarray | None
    q_best: np.ndarray | None
    rho: float | None = None


@dataclass(frozen=True)
class ConditionEstimate:
    kind: str  # "global" | "pointwise"
    rows: tuple[ScaleRow, ...]
    classification: str  # "finite" | "divergent" | "indeterminate"
    value: float  # extrapolated value (finite) or +inf
    uncertainty: float
    alpha: float
    r2: float
    seed: int
    grid_resolution: int
    delta: float
    x_bar: np.ndarray | None = None
    thresholds: Thresholds = field(default_factory=Thresholds)

    @property
    def etas(self) -> np.ndarray:
        return np.array([r.eta for r in self.rows])

    @property
    def quotients(self) -> np.ndarray:
        return np.array([r.K for r in self.rows])

    @property
    def lower_confidence(self) -> float:
        """Largest sampled quotient at the finest scale."""
        return self.rows[-1].K

    @property
    def monotone(self) -> bool:
        """Whether the per-scale maxima are nondecreasing in the radius (to 1e-9 relative)."""
        K = self.quotients
        return bool(np.all(K[:-1] >= K[1:] * (1 - 1e-9) - 1e-12))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scale_index", "eta", "n_pairs", "n_excluded", "K_eta", "err_bar", "p_best", "q_best"])
        for r in self.rows:
            w.writerow([r.index, _fmt(r.eta), r.n_pairs, r.n_excluded, _fmt(r.K), _fmt(r.err_bar),
                        _fmt_vec(r.p_best), _fmt_vec(r.q_best)])
        w.writerow(["classification", self.classification])
        if self.classification == "divergent":
            w.writerow(["exponent", _fmt(self.alpha)])
        else:
            w.writerow(["value", _fmt(self.value)])
            w.writerow(["uncertainty", _fmt(self.uncertainty)])
        w.writerow(["fit_residual_r2", _fmt(self.r2)])
        w.writerow(["seed", self.seed])
        t = self.thresholds
        w.writerow(["thresholds", f"alpha>{t.alpha_min};r2>={t.r2_min};plateau<={t.plateau}"])
        return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def _fmt_vec(v) -> str:
    if v is None:
        return ""
    return " ".join(_fmt(x) for x in np.atleast_1d(v))


# --------------------------------------------------------------------------- classification


def fit_power_law(etas, K) -> tuple[float, float]:
    """Least-squares fit ``log K = a - alpha log eta`` over positive entries; returns ``(alpha, R^2)``."""
    etas, K = np.asarray(etas, float), np.asarray(K, float)
    ok = (K > 0) & np.isfinite(K)
    if ok.sum() < 3:
        return 0.0, 0.0
    x, y = np.log(etas[ok]), np.log(K[ok])
    slope, icpt = np.polyfit(x, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (slope * x + icpt)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(-slope), r2


def classify(etas, K, thresholds: Thresholds = Thresholds()):
    """Return ``(classification, value, uncertainty, alpha, r2)``.

    Finite when the last three per-scale maxima agree to the plateau tolerance;
    divergent when a power law with exponent above ``alpha_min`` fits with
    ``R^2 >= r2_min``.
    """
    K = np.asarray(K, dtype=float)
    alpha, r2 = fit_power_law(etas, K)
    tail = K[-3:]
    last = float(K[-1])
    spread = float(np.max(np.abs(tail - last)))
    if np.all(np.isfinite(tail)) and spread <= thresholds.plateau * last + 1e-12:
        return "finite", last, spread, alpha, r2
    if alpha > thresholds.alpha_min and r2 >= thresholds.r2_min:
        return "divergent", math.inf, math.inf, alpha, r2
    return "indeterminate", last, spread, alpha, r2


# --------------------------------------------------------------------------- clouds


class CloudCache:
    """Memoized weakly efficient clouds of one problem at one grid resolution."""

    def __init__(self, f: VectorFunction, grid_resolution: int | None = None):
        self.f = f
        self.N = grid_resolution or default_grid_resolution(f.m)
        self._store: dict[bytes, PointCloud] = {}

    def __call__(self, p) -> PointCloud:
        p = as_point(p, self.f.n)
        key = p.tobytes()
        if key not in self._store:
            self._store[key] = weakly_efficient_set(self.f, p, self.N)
        return self._store[key]


def solution_set_excess(A: np.ndarray, B: PointCloud, f: VectorFunction):
    """Excess of the points ``A`` over the solution set sampled by ``B``.

    A point of ``A`` that is itself stationary for the tilt of ``B`` lies in
    that solution set and contributes zero; any other point contributes its
    distance to the cloud.  Returns ``(value, a, b)``.
    """
    if len(A) == 0:
        return 0.0, None, None
    if len(B) == 0:
        return math.inf, None, None
    dist, idx = nearest_distances(A, B.points)
    order = np.lexsort((np.arange(len(dist)), -dist))
    interior = np.linalg.norm(A, axis=1) < f.radius * (1 - 1e-12)
    for s in range(0, len(order), 64):
        chunk = order[s:s + 64]
        chunk = chunk[dist[chunk] > 0]
        if chunk.size == 0:
            break
        member = (stationarity_batch(f, A[chunk], B.tilt) <= SET_MEMBER_TOL) & interior[chunk]
        if not member.all():
            i = chunk[np.argmin(member)]
            return float(dist[i]), A[i], B.points[idx[i]]
    return 0.0, None, None


def solution_set_hausdorff(A: PointCloud, B: PointCloud, f: VectorFunction) -> float:
    return max(solution_set_excess(A.points, B, f)[0], solution_set_excess(B.points, A, f)[0])


def _err_bar(A: PointCloud, B: PointCloud, gap: float) -> float:
    if A.fill_distance is None or B.fill_distance is None:
        return math.nan
    return (A.fill_distance + B.fill_distance) / gap


def _better(val, p, q, best):
    if best is None or val > best[0]:
        return True
    if val == best[0]:
        return (tuple(p) + tuple(q)) < (tuple(best[1]) + tuple(best[2]))
    return False


def _tilt_pairs(f, schedule: ScaleSchedule, label: str):
    rng = stream(schedule.seed, label, "pairs")
    U = uniform_ball(rng, 2 * schedule.pairs_per_scale, f.n)
    return U[0::2], U[1::2]


def _prepare(f, schedule, grid_resolution, delta):
    if not f.certificate.convex:
        raise NonconvexInput("condition numbers are estimated only for certified convex problems")
    if delta is None:
        delta = delta_estimate(f, seed=schedule.seed).delta
    return schedule.etas(delta), CloudCache(f, grid_resolution), delta


def _sweep(f, etas, cache, schedule, thresholds, quotient, radius_of=None):
    Up, Uq = _tilt_pairs(f, schedule, "tilts")
    rows = []
    for k, eta in enumerate(etas):
        best, n_used, n_excl, bar = None, 0, 0, math.nan
        rho = None if radius_of is None else radius_of(k)
        for up, uq in zip(Up, Uq):
            p, q = eta * up, eta * uq
            gap = float(np.linalg.norm(p - q))
            if gap < thresholds.exclusion * eta:
                n_excl += 1
                continue
            n_used += 1
            A, B = cache(p), cache(q)
            val = quotient(A, B, rho) / gap
            if _better(val, p, q, best):
                best = (val, p, q)
                bar = _err_bar(A, B, gap)
        K = best[0] if best else 0.0
        rows.append(ScaleRow(k, float(eta), n_used, n_excl, K, bar,
                             best[1] if best else None, best[2] if best else None, rho))
    return tuple(rows)


def global_condition_number(
    f: VectorFunction,
    schedule: ScaleSchedule = ScaleSchedule(),
    grid_resolution: int | None = None,
    delta: float | None = None,
    thresholds: Thresholds = Thresholds(),
) -> ConditionEstimate:
    """Estimate ``c*(f) = limsup d_H(WE_f(p), WE_f(q)) / |p - q|`` as ``p, q -> 0``."""
    etas, cache, delta = _prepare(f, schedule, grid_resolution, delta)

    def quotient(A, B, _rho):
        return solution_set_hausdorff(A, B, f)

    rows = _sweep(f, etas, cache, schedule, thresholds, quotient)
    cls, value, unc, alpha, r2 = classify(etas, [r.K for r in rows], thresholds)
    return ConditionEstimate("global", rows, cls, value, unc, alpha, r2, schedule.seed, cache.N, delta,
                             thresholds=thresholds)


def neighborhood_radius(eta0: float, k: int) -> float:
    """Radius of the neighborhood of the reference solution at scale ``k``.

    Shrinks like ``eta_k^(1/4)``, slower than the tilt radius, so that a solution
    set moving like ``|p|^(1/3)`` stays inside the neighborhood.
    """
    return eta0 * 2.0 ** (-k / 4)


def local_condition_number(
    f: VectorFunction,
    x_bar,
    schedule: ScaleSchedule = ScaleSchedule(),
    grid_resolution: int | None = None,
    delta: float | None = None,
    thresholds: Thresholds = Thresholds(),
) -> ConditionEstimate:
    """Estimate ``c(x_bar, f)``, the Lipschitz modulus of ``WE_f`` at ``0`` for ``x_bar``.

    Quotients use the one-sided excess of ``WE_f(p)`` intersected with a
    neighborhood of ``x_bar`` over ``WE_f(q)``, as in the Aubin property.
    """
    x_bar = f.ball.check(x_bar)
    if not f.certificate.convex:
        raise NonconvexInput("condition numbers are estimated only for certified convex problems")
    if not is_weakly_efficient(f, np.zeros(f.n), x_bar).is_member:
        raise NotASolution("x_bar is not in WE_f(0)")
    etas, cache, delta = _prepare(f, schedule, grid_resolution, delta)
    eta0 = float(etas[0])

    def quotient(A, B, rho):
        pts = A.points[np.linalg.norm(A.points - x_bar, axis=1) <= rho]
        return solution_set_excess(pts, B, f)[0]

    rows = _sweep(f, etas, cache, schedule, thresholds, quotient, lambda k: neighborhood_radius(eta0, k))
    cls, value, unc, alpha, r2 = classify(etas, [r.K for r in rows], thresholds)
    return ConditionEstimate("pointwise", rows, cls, value, unc, alpha, r2, schedule.seed, cache.N, delta,
                             x_bar=x_bar, thresholds=thresholds)


def sampled_quotient_max(f: VectorFunction, eta: float, n_pairs: int = 16, seed: int = 0,
                         grid_resolution: int | None = None) -> float:
    """Sampled ``K(eta)``: largest Hausdorff quotient over random tilt pairs of norm below ``eta``."""
    cache = CloudCache(f, grid_resolution)
    U = uniform_ball(stream(seed, "K(eta)"), 2 * n_pairs, f.n) * eta
    best = 0.0
    for p, q in zip(U[0::2], U[1::2]):
        gap = float(np.linalg.norm(p - q))
        if gap < 1e-3 * eta:
            continue
        best = max(best, solution_set_hausdorff(cache(p), cache(q), f) / gap)
    return best


# --------------------------------------------------------------------------- positivity


@dataclass(frozen=True)
class WitnessStep:
    x: np.ndarray
    tilt: np.ndarray
    stationarity: float
    dist_xbar_to_tilted_set: float
    dist_x_to_unperturbed_set: float


@dataclass(frozen=True)
class PositivityWitness:
    steps: tuple[WitnessStep, ...]
    kappa: float
    satisfied: bool
    direction: np.ndarray


def _exterior_direction(f, x_bar, t_min, seed):
    n = f.n
    cands = [np.eye(n)[j] * sgn for j in range(n) for sgn in (1.0, -1.0)]
    if n > 1:
        cands += list(uniform_ball(stream(seed, "directions"), 16, n))
    for d in cands:
        d = d / np.linalg.norm(d)
        if stationarity(f, x_bar + t_min * d) > 1e-12:
            return d
    return None


def positivity_witness(
    f: VectorFunction,
    x_bar,
    steps: int = 16,
    t0: float | None = None,
    grid_resolution: int | None = None,
    seed: int = 0,
) -> PositivityWitness:
    """Build tilts ``p_s = -v_f(x_s)`` along points ``x_s -> x_bar`` outside ``WE_f(0)``.

    ``x_s = x_bar + (t0 / s) d`` for an outward direction ``d``.  By construction
    ``x_s`` is stationary for the tilt ``p_s``.  ``kappa`` is the smallest
    constant with ``|p_s| <= kappa d(x_s, WE_f(0))`` over the second half of the
    sequence.
    """
    x_bar = f.ball.check(x_bar)
    if not f.certificate.convex:
        raise NonconvexInput("f must be certified convex")
    if not is_weakly_efficient(f, np.zeros(f.n), x_bar).is_member:
        raise NotASolution("x_bar is not in WE_f(0)")
    cache = CloudCache(f, grid_resolution)
    we0 = cache(np.zeros(f.n))
    if len(we0) == 0 or np.max(np.linalg.norm(we0.points, axis=1)) >= f.radius - 1e-6:
        raise NotASolution("WE_f(0) must be strictly inside the ball")
    if t0 is None:
        t0 = 0.25 * (f.radius - float(np.linalg.norm(x_bar)))
    d = _exterior_direction(f, x_bar, t0 / steps, seed)
    if d is None:
        raise NoExteriorDirection("every tested direction stays inside WE_f(0); witness not constructible")
    out = []
    for s in range(1, steps + 1):
        x = x_bar + (t0 / s) * d
        p = common_descent_direction(f, x) * -1.0
        st = stationarity(f, x, p)
        tilted = cache(p)
        d_bar = float(nearest_distances(x_bar[None], tilted.points)[0][0]) if len(tilted) else math.inf
        d_x = float(nearest_distances(x[None], we0.points)[0][0])
        out.append(WitnessStep(x, p, st, d_bar, d_x))
    tail = out[steps // 2:]
    ratios = [np.linalg.norm(w.tilt) / w.dist_x_to_unperturbed_set if w.dist_x_to_unperturbed_set > 0 else math.inf
              for w in tail]
    kappa = float(max(ratios))
    ok = all(w.stationarity <= 1e-9 for w in out) and math.isfinite(kappa) and kappa > 0
    return PositivityWitness(tuple(out), kappa, ok, d)


# --------------------------------------------------------------------------- certificates and radius


def strong_convexity_modulus(f: VectorFunction) -> float | None:
    """Smallest strong-convexity modulus over the components, or ``None``."""
    cert = f.certificate
    return cert.modulus if cert.strongly_convex else None


class Radius(NamedTuple):
    value: float | None
    status: str  # "finite" | "zero" | "indeterminate"


def regularity_radius(estimate: ConditionEstimate) -> Radius:
    """Radius of metric regularity ``1 / c(x_bar, f)`` for a pointwise estimate."""
    if estimate.kind != "pointwise":
        raise GlobalEstimatePassed("the radius identity is pointwise; pass a local estimate")
    if estimate.classification == "divergent":
        return Radius(0.0, "zero")
    if estimate.classification != "finite" or estimate.value - estimate.uncertainty <= 0:
        return Radius(None, "indeterminate")
    return Radius(1.0 / estimate.value, "finite")


@dataclass(frozen=True)
class ConditioningClass:
    """Membership flags; ``None`` means not determined by the supplied evidence."""

    t1: bool | None
    w1: bool | None
    w1_star: bool | None


def conditioning_class(f: VectorFunction, local: ConditionEstimate | None = None,
                       global_estimate: ConditionEstimate | None = None) -> ConditioningClass:
    strong = strong_convexity_modulus(f) is not None
    convex = f.certificate.convex
    t1 = w1 = None
    if local is not None:
        positive = local.classification == "divergent" or (
            local.classification == "finite" and local.value - local.uncertainty > 0)
        t1 = convex and positive
        w1 = local.classification == "finite"
    if strong:
        w1 = True
    w1_star = True if strong else (None if global_estimate is None else global_estimate.classification == "finite")
    return ConditioningClass(t1, w1, w1_star)
