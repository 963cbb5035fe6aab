"""Minimal-norm elements of gradient hulls.

The gradient hull of ``f`` at ``x`` is ``conv{grad f_1(x), ..., grad f_m(x)}``.
Its distance to the origin is the stationarity measure; the negated
minimal-norm element is the common descent direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyVertexList
from .problem import VectorFunction, as_point

GAP_TOL = 1e-12
_ZERO_WEIGHT = 1e-14


@dataclass(frozen=True)
class MinNormResult:
    point: np.ndarray
    norm: float
    coefficients: np.ndarray
    converged: bool
    iterations: int
    gap: float

    def optimality_residual(self, vertices) -> float:
        """``min_i <point, v_i - point>``; nonnegative at the exact optimum."""
        V = np.asarray(vertices, dtype=float)
        return float(np.min((V - self.point) @ self.point))


def _affine_minimizer(V: np.ndarray) -> np.ndarray:
    """Weights ``a`` (summing to one) minimizing ``|V' a|`` over the affine hull of rows of V.

    Solved as least squares in the edge vectors ``v_i - v_0`` rather than
    through the Gram matrix, so vertices of very different lengths do not
    lose accuracy to squaring.
    """
    k = V.shape[0]
    if k == 1:
        return np.ones(1)
    D = V[1:] - V[0]
    t = np.linalg.lstsq(D.T, -V[0], rcond=None)[0]
    return np.concatenate(([1.0 - t.sum()], t))


def min_norm_point(vertices, tol: float = GAP_TOL, max_iter: int | None = None) -> MinNormResult:
    """Nearest point of ``conv(vertices)`` to the origin (Wolfe's algorithm).

    Parameters
    ----------
    vertices : array_like, shape (m, n)
    tol : float
        Stop once ``max_i <-x, v_i - x> <= tol * |x| * M`` with
        ``M = max_i |v_i|``, the size of the round-off in that gap, or once
        ``|x| <= 1e3 * eps * M`` (the origin lies in the hull up to
        round-off).  The gap bounds ``|x - x*|^2``, so a cutoff that ignores
        ``|x|`` would accept a short vertex as optimal.
    max_iter : int, optional
        Cap on major iterations, default ``10 * m * n``.  Hitting the cap sets
        ``converged=False`` on the result.
    """
    V = np.asarray(vertices, dtype=float)
    if V.size == 0:
        raise EmptyVertexList("at least one vertex is required")
    if V.ndim == 1:
        V = V[:, None]
    if V.ndim != 2:
        raise DimensionMismatch(f"vertices must form an (m, n) array, got shape {V.shape}")
    m, n = V.shape
    if max_iter is None:
        max_iter = 10 * m * n

    sq = np.einsum("ij,ij->i", V, V)
    vmax = float(np.sqrt(sq.max()))
    floor = 1e3 * np.finfo(float).eps * vmax

    def settled(x, gap):
        r = float(np.linalg.norm(x))
        return r <= floor or gap <= tol * r * vmax

    def stalled_ok(x, gap):
        # no floating-point progress is possible; accept a gap at round-off size
        return settled(x, gap) or gap <= floor * vmax

    start = int(np.argmin(sq))
    corral = [start]
    w = np.ones(1)
    x = V[start].copy()
    converged = False
    it = 0
    gap = np.inf
    while it < max_iter:
        it += 1
        scores = V @ x
        j = int(np.argmin(scores))  # argmin breaks ties at the lowest index
        gap = float(x @ x - scores[j])
        if settled(x, gap):
            converged = True
            break
        if j in corral:
            # numerically stalled; the affine step below cannot improve further
            converged = stalled_ok(x, gap)
            break
        corral.append(j)
        w = np.append(w, 0.0)
        while True:
            a = _affine_minimizer(V[corral])
            if np.all(a > _ZERO_WEIGHT):
                w = a
                break
            neg = a <= _ZERO_WEIGHT
            ratios = w[neg] / np.maximum(w[neg] - a[neg], 1e-300)
            theta = min(1.0, float(np.min(ratios)))
            w = theta * a + (1 - theta) * w
            keep = w > _ZERO_WEIGHT
            if keep.all():
                # guard against round-off leaving no weight at exactly zero
                keep[np.argmin(w)] = False
            corral = [c for c, k in zip(corral, keep) if k]
            w = w[keep]
            w = w / w.sum()
        if j not in corral:
            # the new vertex was dropped at once: its optimal weight is below
            # resolution, so x cannot improve in floating point
            converged = stalled_ok(x, gap)
            break
        x = w @ V[corral]
    else:
        scores = V @ x
        gap = float(x @ x - scores.min())
        converged = settled(x, gap)

    coefficients = np.zeros(m)
    coefficients[corral] = w
    return MinNormResult(x, float(np.linalg.norm(x)), coefficients, converged, it, gap)


def min_norm_batch(V: np.ndarray) -> np.ndarray:
    """Minimal-norm hull points for a batch of vertex sets, shape ``(B, m, n) -> (B, n)``.

    Closed form for ``m <= 2`` (segment projection); Wolfe's algorithm otherwise.
    """
    V = np.asarray(V, dtype=float)
    B, m, n = V.shape
    if m == 1:
        return V[:, 0, :].copy()
    if m == 2:
        a, b = V[:, 0, :], V[:, 1, :]
        d = b - a
        dd = np.einsum("ij,ij->i", d, d)
        t = np.where(dd > 0, -np.einsum("ij,ij->i", a, d) / np.where(dd > 0, dd, 1.0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        return a + t[:, None] * d
    return np.array([min_norm_point(Vb).point for Vb in V]).reshape(B, n)


def _hull_vertices(f: VectorFunction, x, p=None) -> np.ndarray:
    x = f.ball.check(x)
    G = f.gradients(x)
    if p is not None:
        G = G - as_point(p, f.n)
    return G


def stationarity(f: VectorFunction, x, p=None) -> float:
    """Distance from the origin to the gradient hull of the tilted problem ``f^p`` at ``x``.

    Uses ``H_{f^p}(x) = H_f(x) - {p}``; ``p=None`` means no tilt.
    """
    return min_norm_point(_hull_vertices(f, x, p)).norm


def stationarity_batch(f: VectorFunction, X: np.ndarray, p=None) -> np.ndarray:
    """Vectorized :func:`stationarity` for points ``X`` of shape ``(B, n)``."""
    G = f.gradients(np.asarray(X, dtype=float))
    if p is not None:
        G = G - np.asarray(p, dtype=float)
    return np.linalg.norm(min_norm_batch(G), axis=-1)


def common_descent_direction(f: VectorFunction, x) -> np.ndarray:
    """Negated minimal-norm element of the gradient hull at ``x``."""
    return -min_norm_point(_hull_vertices(f, x)).point


@dataclass(frozen=True)
class HullLipschitz:
    """Lipschitz constant shared by the gradient hull map and the stationarity measure."""

    K: float
    per_component: tuple[float, ...]
    exact: bool
    grid_step: float | None


def hull_lipschitz_constant(f: VectorFunction) -> HullLipschitz:
    """``K = max_i lip(grad f_i; B(0, r))``.

    Polynomial components are estimated on a grid of step ``r / 1e4``; the step
    is reported whenever such an estimate is involved.
    """
    vals, exact = [], True
    grid = False
    for c in f.components:
        L, ex = c.lipschitz_gradient(f.radius)
        vals.append(L)
        exact = exact and ex
        grid = grid or c.kind == "polynomial"
    return HullLipschitz(max(vals), tuple(vals), exact, f.radius / 1e4 if grid else None)
