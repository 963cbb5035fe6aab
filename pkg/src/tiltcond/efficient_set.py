"""Point-cloud approximations of weakly efficient sets under tilt perturbations.

For an R^m_+-convex objective every weakly efficient point minimizes some
weighted sum ``sum_i lam_i (f_i(x) - <p, x>)`` with ``lam`` in the unit
simplex, so sweeping a simplex grid of weights and minimizing each
scalarization samples the whole set.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (
    BoundaryPoint,
    DimensionMismatch,
    NonconvexInput,
    NonConvergence,
    SolutionSetTouchesBoundary,
)
from ._rng import stream
from .minnorm import hull_lipschitz_constant, stationarity, stationarity_batch
from .problem import Quadratic, VectorFunction, as_point

MEMBERSHIP_TOL = 1e-7
SOLVER_TOL = 1e-10
DEDUP_RADIUS = 1e-7
PG_MAX_ITER = 100_000
INTERIOR_MARGIN = 1e-6


def default_grid_resolution(m: int) -> int:
    return {1: 1, 2: 200, 3: 40}.get(m, 12)


def simplex_grid(m: int, N: int) -> np.ndarray:
    """All weights ``k / N`` with ``k`` nonnegative integers summing to ``N``.

    Rows are in lexicographic order of ``k``; shape ``(comb(N + m - 1, m - 1), m)``.
    """
    if m < 1 or N < 1:
        raise ValueError("need m >= 1 and N >= 1")
    if m == 1:
        return np.ones((1, 1))
    rows = np.empty((comb(N + m - 1, m - 1), m))
    for r, bars in enumerate(itertools.combinations(range(N + m - 1), m - 1)):
        prev = -1
        for j, b in enumerate(bars):
            rows[r, j] = b - prev - 1
            prev = b
        rows[r, m - 1] = N + m - 2 - prev
    return rows[::-1] / N


def _require_convex(f: VectorFunction):
    if not f.certificate.convex:
        raise NonconvexInput("f is not certified R^m_+-convex")


# --------------------------------------------------------------------------- scalarization


def _weighted_gradient(f: VectorFunction, X, P, L):
    return np.einsum("bi,bin->bn", L, f.gradients(X)) - P


def _projected_gradient(f, P, L, X0, step_lip, max_iter=PG_MAX_ITER, tol=SOLVER_TOL):
    X = f.ball.project(X0.copy())
    active = np.ones(len(X), dtype=bool)
    inv = 1.0 / np.maximum(step_lip, 1e-12)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Xa = X[idx]
        G = _weighted_gradient(f, Xa, P[idx], L[idx])
        Y = f.ball.project(Xa - inv[idx, None] * G)
        gm = np.linalg.norm(Xa - Y, axis=1) / inv[idx]
        X[idx] = Y
        active[idx[gm <= tol]] = False
    return X, ~active


def _bisection_1d(f, P, L):
    """Root of the nondecreasing weighted derivative on ``[-r, r]`` (n = 1)."""
    r = f.radius
    B = len(P)
    lo = np.full(B, -r)
    hi = np.full(B, r)

    def phi(x):
        return _weighted_gradient(f, x[:, None], P, L)[:, 0]

    at_lo = phi(lo) >= 0
    at_hi = phi(hi) <= 0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        done = (mid <= lo) | (mid >= hi)
        if done.all():
            break
        pos = phi(mid) > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    # pick the endpoint of the final bracket with the smaller |phi|
    X = np.where(np.abs(phi(lo)) <= np.abs(phi(hi)), lo, hi)
    X = np.where(at_lo, -r, np.where(at_hi & ~at_lo, r, X))
    return X[:, None], np.ones(B, dtype=bool)


def _quadratic_batch(f, P, L):
    comps = f.components
    Qs = np.stack([c.Q for c in comps])
    bs = np.stack([c.b for c in comps])
    A = np.einsum("bi,ijk->bjk", L, Qs)
    c = P - L @ bs
    X = np.einsum("bjk,bk->bj", np.linalg.pinv(A, hermitian=True), c)
    resid = np.linalg.norm(np.einsum("bjk,bk->bj", A, X) - c, axis=1)
    scale = 1.0 + np.linalg.norm(c, axis=1)
    inside = np.linalg.norm(X, axis=1) <= f.radius
    ok = inside & (resid <= SOLVER_TOL * scale)
    conv = np.ones(len(P), dtype=bool)
    if not ok.all():
        bad = np.flatnonzero(~ok)
        lip = np.linalg.norm(A[bad], ord=2, axis=(1, 2))
        Xb, cb = _projected_gradient(f, P[bad], L[bad], X[bad], lip)
        X[bad] = Xb
        conv[bad] = cb
    return X, conv


def minimize_scalarizations(f: VectorFunction, P, L) -> tuple[np.ndarray, np.ndarray]:
    """Minimize ``sum_i L[b, i] (f_i(x) - <P[b], x>)`` over the ball for every row ``b``.

    Returns the minimizers ``(B, n)`` and per-row convergence flags.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = np.broadcast_to(P, (len(L), f.n))
    P = np.ascontiguousarray(P, dtype=float)
    if all(isinstance(c, Quadratic) for c in f.components):
        return _quadratic_batch(f, P, L)
    if f.n == 1:
        return _bisection_1d(f, P, L)
    lips = np.array([c.lipschitz_gradient(f.radius)[0] for c in f.components])
    return _projected_gradient(f, P, L, np.zeros((len(L), f.n)), L @ lips)


def scalar_minimize(f: VectorFunction, p, weights) -> np.ndarray:
    """Minimizer over the ball of ``sum_i weights[i] (f_i(x) - <p, x>)``."""
    _require_convex(f)
    p = as_point(p, f.n)
    lam = np.asarray(weights, dtype=float)
    if lam.shape != (f.m,):
        raise DimensionMismatch(f"weights must have length {f.m}")
    if np.any(lam < 0) or abs(lam.sum() - 1) > 1e-12:
        raise ValueError("weights must lie in the unit simplex")
    X, conv = minimize_scalarizations(f, p[None], lam[None])
    if not conv[0]:
        raise NonConvergence("projected gradient hit its iteration cap")
    return X[0]


# --------------------------------------------------------------------------- clouds


@dataclass(frozen=True)
class PointCloud:
    """Finite sample of a weakly efficient set ``WE_f(p)``.

    ``fill_distance`` bounds the distance from any point of the true set to the
    cloud; ``None`` means no bound is available (no strong convexity).
    """

    points: np.ndarray
    tilt: np.ndarray
    grid_resolution: int
    fill_distance: float | None = None
    weights: np.ndarray | None = field(default=None, repr=False)
    n_discarded: int = 0

    def __len__(self):
        return len(self.points)

    @property
    def dimension(self):
        return self.points.shape[1]

    def write(self, path) -> None:
        """Delimited text: a header row, then one point per row with 17 significant digits."""
        fill = "unquantified" if self.fill_distance is None else f"{self.fill_distance:.16e}"
        p = " ".join(f"{v:.16e}" for v in self.tilt)
        lines = [f"# p={p} grid_resolution={self.grid_resolution} fill_distance={fill}"]
        lines += [",".join(f"{v:.16e}" for v in row) for row in self.points]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read(cls, path) -> "PointCloud":
        lines = Path(path).read_text().splitlines()
        m = _HEADER.match(lines[0])
        if m is None:
            raise ValueError(f"{path}: malformed cloud header")
        tilt = np.array([float(v) for v in m["p"].split()])
        fill = None if m["fill"] == "unquantified" else float(m["fill"])
        rows = [[float(v) for v in line.split(",")] for line in lines[1:] if line.strip()]
        pts = np.array(rows, dtype=float).reshape(-1, len(tilt))
        return cls(pts, tilt, int(m["grid"]), fill)


_HEADER = re.compile(r"# p=(?P<p>.*) grid_resolution=(?P<grid>\d+) fill_distance=(?P<fill>\S+)$")


def dedup(points: np.ndarray, radius: float = DEDUP_RADIUS, weights=None):
    """Sort lexicographically, then drop points within ``radius`` of an already kept one."""
    if len(points) == 0:
        return points, weights
    order = np.lexsort(points.T[::-1])
    pts = points[order]
    if pts.shape[1] == 1:
        keep = np.ones(len(pts), dtype=bool)
        last = pts[0, 0]
        for k in range(1, len(pts)):
            if pts[k, 0] - last < radius:
                keep[k] = False
            else:
                last = pts[k, 0]
    else:
        keep = np.zeros(len(pts), dtype=bool)
        kept = []
        for k, x in enumerate(pts):
            if not kept or np.min(np.linalg.norm(pts[kept] - x, axis=1)) >= radius:
                keep[k] = True
                kept.append(k)
    w = None if weights is None else weights[order][keep]
    return pts[keep], w


def _fill_distance(f: VectorFunction, p, points, N) -> float | None:
    cert = f.certificate
    if f.m == 1:
        return SOLVER_TOL
    if not cert.strongly_convex:
        return None
    mu = 2 * cert.modulus
    # l1 distance from any simplex weight to the nearest grid weight
    l1 = 1.0 / N if f.m == 2 else f.m / N
    G = np.max(np.linalg.norm(f.gradients(points) - p, axis=-1))
    return float(l1 * G / mu + SOLVER_TOL / mu)


def scalarization_sweep(f: VectorFunction, p, grid_resolution: int | None = None):
    """Raw minimizers for every simplex-grid weight (no certification)."""
    p = as_point(p, f.n)
    N = grid_resolution or default_grid_resolution(f.m)
    W = simplex_grid(f.m, N)
    X, conv = minimize_scalarizations(f, p, W)
    return X, W, conv


def certify_points(f, p, X, W, tol=MEMBERSHIP_TOL):
    """Boolean mask of points whose stationarity for ``f^p`` is at most ``tol``.

    The scalarization weight gives an upper bound on the stationarity measure;
    the exact minimal-norm computation is run only where that bound is not enough.
    """
    resid = np.linalg.norm(np.einsum("bi,bin->bn", W, f.gradients(X) - p), axis=1)
    interior = np.linalg.norm(X, axis=1) < f.radius * (1 - 1e-12)
    ok = resid <= tol
    need = ~ok
    if need.any():
        ok[need] = stationarity_batch(f, X[need], p) <= tol
    return ok & interior


def weakly_efficient_set(
    f: VectorFunction,
    p,
    grid_resolution: int | None = None,
    tol: float = MEMBERSHIP_TOL,
    delta: float | None = None,
) -> PointCloud:
    """Point cloud for ``WE_f(p)`` from a simplex-grid sweep of scalarizations."""
    _require_convex(f)
    p = as_point(p, f.n)
    if delta is not None and np.linalg.norm(p) >= delta:
        raise ValueError(f"|p| = {np.linalg.norm(p):.6g} is not below delta_f = {delta:.6g}")
    N = grid_resolution or default_grid_resolution(f.m)
    X, W, conv = scalarization_sweep(f, p, N)
    ok = certify_points(f, p, X, W, tol) & conv
    pts, w = dedup(X[ok], weights=W[ok])
    return PointCloud(pts, p, N, _fill_distance(f, p, pts, N) if len(pts) else None, w, int((~ok).sum()))


class Membership(NamedTuple):
    is_member: bool
    certificate: float


def is_weakly_efficient(f: VectorFunction, p, x, tol: float = MEMBERSHIP_TOL) -> Membership:
    """First-order membership test ``stationarity(f^p, x) <= tol`` for interior ``x``."""
    _require_convex(f)
    x = f.ball.check(x)
    if np.linalg.norm(x) >= f.radius * (1 - 1e-12):
        raise BoundaryPoint("the first-order characterization holds only at interior points")
    s = stationarity(f, x, as_point(p, f.n))
    return Membership(bool(s <= tol), s)


# --------------------------------------------------------------------------- interiority


@dataclass(frozen=True)
class InteriorityCertificate:
    delta: float
    max_tested_tilt: float
    witness_margin: float
    directions: int


def _tilt_margin(f, P, N):
    margin = np.inf
    for p in P:
        X, _, _ = scalarization_sweep(f, p, N)
        margin = min(margin, f.radius - float(np.max(np.linalg.norm(X, axis=1))))
    return margin


def delta_estimate(
    f: VectorFunction,
    tilt_samples: int = 8,
    seed: int = 0,
    grid_resolution: int | None = None,
    iterations: int = 40,
) -> InteriorityCertificate:
    """Largest tested tilt radius ``delta`` keeping every sampled ``WE_f(p)`` strictly interior.

    Bisection on the tilt magnitude; at each magnitude ``tilt_samples`` random
    unit directions are tested (both signs in one dimension).
    """
    _require_convex(f)
    N = grid_resolution or min(default_grid_resolution(f.m), 50)
    margin0 = _tilt_margin(f, [np.zeros(f.n)], N)
    if margin0 <= INTERIOR_MARGIN:
        raise SolutionSetTouchesBoundary("WE_f(0) is not strictly inside the ball")
    if f.n == 1:
        D = np.array([[1.0], [-1.0]])
    else:
        D = stream(seed, "delta-directions").standard_normal((tilt_samples, f.n))
        D /= np.linalg.norm(D, axis=1, keepdims=True)
    # beyond this tilt no interior first-order point can exist
    g0 = np.max(np.linalg.norm(f.gradients(np.zeros(f.n)), axis=-1))
    hi = float(g0 + hull_lipschitz_constant(f).K * f.radius) * 1.01 + 1e-9
    lo, best_margin = 0.0, margin0
    hi_margin = _tilt_margin(f, hi * D, N)
    if hi_margin > INTERIOR_MARGIN:
        return InteriorityCertificate(hi, hi, min(margin0, hi_margin), len(D))
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        margin = _tilt_margin(f, mid * D, N)
        if margin > INTERIOR_MARGIN:
            lo, best_margin = mid, min(margin0, margin)
        else:
            hi = mid
        if hi - lo <= 1e-6 * hi:
            break
    return InteriorityCertificate(lo, lo, best_margin, len(D))
