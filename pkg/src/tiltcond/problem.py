"""Multiobjective problem instances on a closed ball centered at the origin.

A :class:`VectorFunction` is an ordered list of scalar components living on a
:class:`Ball`.  Components come in three kinds:

* ``quadratic``  -- ``0.5 x'Qx + b'x + c`` with symmetric ``Q``;
* ``polynomial`` -- univariate polynomial, ascending coefficients (``n == 1``);
* ``builtin``    -- a named analytic function with closed-form gradient.

All evaluation routines accept batched points of shape ``(..., n)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BadIndex,
    DimensionMismatch,
    DomainMismatch,
    PointOutsideBall,
    SpecParseError,
)

SYMMETRY_TOL = 1e-12
CURVATURE_TOL = 1e-12
POLY_GRID_DIVISIONS = 10_000


@dataclass(frozen=True)
class Ball:
    """Closed ball ``B(0, radius)`` in ``R^dimension``."""

    dimension: int
    radius: float
    tol: float = 1e-12

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.linalg.norm(x) <= self.radius * (1 + self.tol) + self.tol)

    def check(self, x) -> np.ndarray:
        x = as_point(x, self.dimension)
        if not self.contains(x):
            raise PointOutsideBall(f"|x| = {np.linalg.norm(x):.6g} exceeds radius {self.radius}")
        return x

    def project(self, X: np.ndarray) -> np.ndarray:
        norms = np.linalg.norm(X, axis=-1, keepdims=True)
        scale = np.where(norms > self.radius, self.radius / np.maximum(norms, 1e-300), 1.0)
        return X * scale


def as_point(x, n: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (n,):
        raise DimensionMismatch(f"expected a point of dimension {n}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class Certificate:
    """Convexity certificate; ``modulus`` is the strong-convexity constant alpha."""

    kind: str  # "strongly-convex" | "convex" | "uncertified"
    modulus: float | None = None

    @property
    def convex(self) -> bool:
        return self.kind in ("convex", "strongly-convex")

    @property
    def strongly_convex(self) -> bool:
        return self.kind == "strongly-convex"


UNCERTIFIED = Certificate("uncertified")
CONVEX = Certificate("convex")


def _certificate_from_curvature(min_curv: float) -> Certificate:
    # min_curv is the smallest Hessian eigenvalue (or second derivative) on the ball
    if min_curv > CURVATURE_TOL:
        return Certificate("strongly-convex", min_curv / 2)
    if min_curv >= -CURVATURE_TOL:
        return CONVEX
    return UNCERTIFIED


# --------------------------------------------------------------------------- components


class Component:
    """A scalar C^{1,1} function on ``R^n`` restricted to a ball."""

    kind: str
    dim: int

    def value(self, X):
        raise NotImplementedError

    def grad(self, X):
        raise NotImplementedError

    def lipschitz_gradient(self, radius: float) -> tuple[float, bool]:
        """Return ``(lip(grad; B(0, radius)), exact)``."""
        raise NotImplementedError

    def certificate(self, radius: float) -> Certificate:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Quadratic(Component):
    """``0.5 x'Qx + b'x + c``."""

    Q: np.ndarray
    b: np.ndarray
    c: float = 0.0
    kind = "quadratic"

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        n = Q.shape[0]
        if Q.shape != (n, n):
            raise DimensionMismatch(f"Q must be square, got shape {Q.shape}")
        if np.max(np.abs(Q - Q.T), initial=0.0) > SYMMETRY_TOL:
            raise ValueError("Q must be symmetric to 1e-12")
        b = np.zeros(n) if self.b is None else np.atleast_1d(np.asarray(self.b, dtype=float))
        if b.shape != (n,):
            raise DimensionMismatch(f"b must have length {n}, got shape {b.shape}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    def value(self, X):
        X = np.asarray(X, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", X, self.Q, X) + X @ self.b + self.c

    def grad(self, X):
        return np.asarray(X, dtype=float) @ self.Q + self.b

    def lipschitz_gradient(self, radius):
        return float(np.linalg.norm(self.Q, 2)), True

    @cached_property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.Q)[0])

    def certificate(self, radius):
        return _certificate_from_curvature(self.min_eigenvalue)

    def as_polynomial(self) -> "Polynomial":
        if self.dim != 1:
            raise DimensionMismatch("only univariate quadratics convert to polynomials")
        return Polynomial((self.c, float(self.b[0]), 0.5 * float(self.Q[0, 0])))

    def to_dict(self):
        return {"kind": "quadratic", "Q": self.Q.tolist(), "b": self.b.tolist(), "c": self.c}

    def __eq__(self, other):
        return (
            isinstance(other, Quadratic)
            and np.array_equal(self.Q, other.Q)
            and np.array_equal(self.b, other.b)
            and self.c == other.c
        )

    def __hash__(self):
        return hash((self.Q.tobytes(), self.b.tobytes(), self.c))


@dataclass(frozen=True)
class Polynomial(Component):
    """Univariate polynomial ``sum_k coeffs[k] x**k``."""

    coeffs: tuple[float, ...]
    kind = "polynomial"
    dim = 1

    def __post_init__(self):
        coeffs = tuple(float(a) for a in self.coeffs)
        if not coeffs:
            coeffs = (0.0,)
        object.__setattr__(self, "coeffs", coeffs)

    @cached_property
    def _poly(self):
        return np.polynomial.Polynomial(self.coeffs)

    @cached_property
    def _d1(self):
        return self._poly.deriv(1)

    @cached_property
    def _d2(self):
        return self._poly.deriv(2)

    def value(self, X):
        X = np.asarray(X, dtype=float)
        return self._poly(X[..., 0])

    def grad(self, X):
        X = np.asarray(X, dtype=float)
        return self._d1(X)

    def second_derivative_grid(self, radius):
        grid = np.linspace(-radius, radius, 2 * POLY_GRID_DIVISIONS + 1)
        return self._d2(grid)

    def lipschitz_gradient(self, radius):
        # grid step radius / 1e4; exact whenever the second derivative is constant
        return float(np.max(np.abs(self.second_derivative_grid(radius)))), len(self.coeffs) <= 3

    def certificate(self, radius):
        return _certificate_from_curvature(float(np.min(self.second_derivative_grid(radius))))

    def to_dict(self):
        return {"kind": "polynomial", "coeffs": list(self.coeffs)}


def _logcosh(z):
    a = np.abs(z)
    return a + np.log1p(np.exp(-2 * a)) - np.log(2.0)


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1 + np.tanh(0.5 * z))


def _huber(z):
    a = np.abs(z)
    return np.where(a <= 1, 0.5 * z**2, a - 0.5)


# name -> (value, derivative, lip of derivative); all separable and convex
BUILTINS = {
    "logcosh": (_logcosh, np.tanh, 1.0),
    "softplus": (_softplus, _sigmoid, 0.25),
    "huber": (_huber, lambda z: np.clip(z, -1.0, 1.0), 1.0),
}


@dataclass(frozen=True, eq=False)
class Builtin(Component):
    """``weight * sum_j phi(x_j - center_j)`` for a named separable ``phi``.

    Convexity is asserted by the caller (``convex``, ``strong_modulus``) rather
    than derived.
    """

    name: str
    dim: int
    weight: float = 1.0
    center: np.ndarray | None = None
    convex: bool = True
    strong_modulus: float | None = None
    kind = "builtin"

    def __post_init__(self):
        if self.name not in BUILTINS:
            raise ValueError(f"unknown builtin {self.name!r}; choose from {sorted(BUILTINS)}")
        center = np.zeros(self.dim) if self.center is None else np.atleast_1d(np.asarray(self.center, dtype=float))
        if center.shape != (self.dim,):
            raise DimensionMismatch(f"center must have length {self.dim}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "weight", float(self.weight))

    def value(self, X):
        phi = BUILTINS[self.name][0]
        return self.weight * phi(np.asarray(X, dtype=float) - self.center).sum(axis=-1)

    def grad(self, X):
        dphi = BUILTINS[self.name][1]
        return self.weight * dphi(np.asarray(X, dtype=float) - self.center)

    def lipschitz_gradient(self, radius):
        return abs(self.weight) * BUILTINS[self.name][2], True

    def certificate(self, radius):
        if self.strong_modulus is not None and self.strong_modulus > 0:
            return Certificate("strongly-convex", float(self.strong_modulus))
        return CONVEX if self.convex else UNCERTIFIED

    def to_dict(self):
        d = {"kind": "builtin", "name": self.name, "weight": self.weight, "center": self.center.tolist(),
             "convex": self.convex}
        if self.strong_modulus is not None:
            d["strong_modulus"] = self.strong_modulus
        return d

    def __eq__(self, other):
        return isinstance(other, Builtin) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))


@dataclass(frozen=True)
class Sum(Component):
    """Pointwise sum of components that cannot be merged into one kind."""

    parts: tuple[Component, ...]
    kind = "sum"

    @property
    def dim(self):
        return self.parts[0].dim

    def value(self, X):
        return sum(p.value(X) for p in self.parts)

    def grad(self, X):
        return sum(p.grad(X) for p in self.parts)

    def lipschitz_gradient(self, radius):
        # triangle-inequality bound, not exact
        return float(sum(p.lipschitz_gradient(radius)[0] for p in self.parts)), False

    def certificate(self, radius):
        certs = [p.certificate(radius) for p in self.parts]
        if not all(c.convex for c in certs):
            return UNCERTIFIED
        alpha = sum(c.modulus or 0.0 for c in certs)
        return Certificate("strongly-convex", alpha) if alpha > 0 else CONVEX

    def to_dict(self):
        return {"kind": "sum", "parts": [p.to_dict() for p in self.parts]}


def add_components(a: Component, b: Component) -> Component:
    """``a + b``, merged into a single kind whenever possible."""
    if a.dim != b.dim:
        raise DomainMismatch(f"cannot add components of dimension {a.dim} and {b.dim}")
    if isinstance(a, Quadratic) and isinstance(b, Quadratic):
        return Quadratic(a.Q + b.Q, a.b + b.b, a.c + b.c)
    if a.dim == 1 and isinstance(a, (Quadratic, Polynomial)) and isinstance(b, (Quadratic, Polynomial)):
        pa = a.as_polynomial() if isinstance(a, Quadratic) else a
        pb = b.as_polynomial() if isinstance(b, Quadratic) else b
        return Polynomial(tuple((pa._poly + pb._poly).coef))
    parts = (a.parts if isinstance(a, Sum) else (a,)) + (b.parts if isinstance(b, Sum) else (b,))
    return Sum(parts)


def weighted_sum(components: Sequence[Component], weights) -> Component:
    """``sum_i weights[i] * components[i]`` as a single component."""
    weights = [float(w) for w in weights]
    if all(isinstance(c, Quadratic) for c in components):
        Q = sum(w * c.Q for w, c in zip(weights, components))
        b = sum(w * c.b for w, c in zip(weights, components))
        return Quadratic(0.5 * (Q + Q.T), b, sum(w * c.c for w, c in zip(weights, components)))
    if components[0].dim == 1 and all(isinstance(c, (Quadratic, Polynomial)) for c in components):
        polys = [c.as_polynomial() if isinstance(c, Quadratic) else c for c in components]
        total = sum((w * p._poly for w, p in zip(weights, polys)), np.polynomial.Polynomial([0.0]))
        return Polynomial(tuple(total.coef))
    return _Weighted(tuple(components), tuple(weights))


@dataclass(frozen=True)
class _Weighted(Component):
    parts: tuple[Component, ...]
    weights: tuple[float, ...]
    kind = "weighted"

    @property
    def dim(self):
        return self.parts[0].dim

    def value(self, X):
        return sum(w * p.value(X) for w, p in zip(self.weights, self.parts))

    def grad(self, X):
        return sum(w * p.grad(X) for w, p in zip(self.weights, self.parts))

    def lipschitz_gradient(self, radius):
        return float(sum(abs(w) * p.lipschitz_gradient(radius)[0] for w, p in zip(self.weights, self.parts))), False

    def certificate(self, radius):
        return UNCERTIFIED

    def to_dict(self):
        return {"kind": "weighted", "weights": list(self.weights), "parts": [p.to_dict() for p in self.parts]}


def component_from_dict(d: dict, n: int, where: str = "component") -> Component:
    if not isinstance(d, dict):
        raise SpecParseError("expected an object", where)
    kind = d.get("kind")
    try:
        if kind == "quadratic":
            if "Q" not in d:
                raise SpecParseError("missing field 'Q'", f"{where}.Q")
            Q = np.asarray(d["Q"], dtype=float)
            if Q.ndim == 1:
                if Q.size != n * n:
                    raise SpecParseError(f"row-major Q needs {n * n} entries, got {Q.size}", f"{where}.Q")
                Q = Q.reshape(n, n)
            if Q.shape != (n, n):
                raise SpecParseError(f"Q must be {n}x{n}, got {Q.shape}", f"{where}.Q")
            if np.max(np.abs(Q - Q.T), initial=0.0) > SYMMETRY_TOL:
                raise SpecParseError("Q is not symmetric to 1e-12", f"{where}.Q")
            b = np.asarray(d.get("b", np.zeros(n)), dtype=float).reshape(-1)
            if b.shape != (n,):
                raise SpecParseError(f"b must have length {n}", f"{where}.b")
            return Quadratic(Q, b, float(d.get("c", 0.0)))
        if kind == "polynomial":
            if n != 1:
                raise SpecParseError("polynomial kind requires dimension 1", f"{where}.kind")
            if "coeffs" not in d:
                raise SpecParseError("missing field 'coeffs'", f"{where}.coeffs")
            return Polynomial(tuple(float(a) for a in d["coeffs"]))
        if kind == "builtin":
            if "name" not in d:
                raise SpecParseError("missing field 'name'", f"{where}.name")
            if d["name"] not in BUILTINS:
                raise SpecParseError(f"unknown builtin {d['name']!r}", f"{where}.name")
            return Builtin(
                d["name"], n, float(d.get("weight", 1.0)), d.get("center"),
                bool(d.get("convex", True)), d.get("strong_modulus"),
            )
        if kind == "sum":
            parts = [component_from_dict(p, n, f"{where}.parts[{k}]") for k, p in enumerate(d.get("parts", []))]
            if not parts:
                raise SpecParseError("sum needs at least one part", f"{where}.parts")
            return Sum(tuple(parts))
    except SpecParseError:
        raise
    except (TypeError, ValueError) as exc:
        raise SpecParseError(str(exc), where) from exc
    raise SpecParseError(f"unknown kind {kind!r}", f"{where}.kind")


# --------------------------------------------------------------------------- vector functions


@dataclass(frozen=True)
class VectorFunction:
    """An m-component objective on a ball.

    ``origin`` records ``(f, h)`` when the function was built as ``f + h e`` by
    :func:`perturb_componentwise`; it does not take part in equality.
    """

    ball: Ball
    components: tuple[Component, ...]
    origin: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a vector function needs at least one component")
        for k, c in enumerate(comps):
            if c.dim != self.ball.dimension:
                raise DimensionMismatch(f"component {k} has dimension {c.dim}, ball has {self.ball.dimension}")
        object.__setattr__(self, "components", comps)

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def n(self) -> int:
        return self.ball.dimension

    @property
    def radius(self) -> float:
        return self.ball.radius

    @cached_property
    def certificate(self) -> Certificate:
        certs = [c.certificate(self.radius) for c in self.components]
        if all(c.strongly_convex for c in certs):
            return Certificate("strongly-convex", min(c.modulus for c in certs))
        if all(c.convex for c in certs):
            return CONVEX
        return UNCERTIFIED

    def values(self, X) -> np.ndarray:
        """Component values for batched points, shape ``(..., m)``."""
        return np.stack([c.value(X) for c in self.components], axis=-1)

    def gradients(self, X) -> np.ndarray:
        """Component gradients for batched points, shape ``(..., m, n)``."""
        return np.stack([c.grad(X) for c in self.components], axis=-2)

    def __call__(self, x):
        return evaluate(self, x)

    def jacobian(self, x):
        return self.gradients(self.ball.check(x))

    def to_dict(self) -> dict:
        return {
            "dimension": self.n,
            "radius": self.radius,
            "objectives": [c.to_dict() for c in self.components],
        }


def evaluate(f: VectorFunction, x) -> np.ndarray:
    """``(f_1(x), ..., f_m(x))``."""
    x = f.ball.check(x)
    return f.values(x)


def gradient(f: VectorFunction, i: int, x) -> np.ndarray:
    """Exact gradient of component ``i`` (0-based) at ``x``."""
    if not 0 <= i < f.m:
        raise BadIndex(f"component index {i} out of range for m = {f.m}")
    x = f.ball.check(x)
    return f.components[i].grad(x)


@dataclass(frozen=True)
class TiltedProblem:
    """``f^p(x) = f(x) - [p] x``: every component loses the same linear term."""

    f: VectorFunction
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", as_point(self.p, self.f.n))

    @property
    def ball(self):
        return self.f.ball

    @property
    def m(self):
        return self.f.m

    @property
    def n(self):
        return self.f.n

    def values(self, X):
        X = np.asarray(X, dtype=float)
        return self.f.values(X) - (X @ self.p)[..., None]

    def gradients(self, X):
        return self.f.gradients(X) - self.p

    def __call__(self, x):
        x = self.ball.check(x)
        return self.values(x)

    def gradient(self, i: int, x):
        return gradient(self.f, i, x) - self.p

    def tilt(self, q) -> "TiltedProblem":
        return TiltedProblem(self.f, self.p + as_point(q, self.n))


def tilt(f: VectorFunction | TiltedProblem, p) -> TiltedProblem:
    """Subtract ``<p, x>`` from every component."""
    if isinstance(f, TiltedProblem):
        return f.tilt(p)
    return TiltedProblem(f, p)


@dataclass(frozen=True)
class PerturbationH:
    """Scalar perturbation ``h`` added to every component (``g = f + h e``)."""

    h: Component
    ball: Ball

    def __post_init__(self):
        if self.h.dim != self.ball.dimension:
            raise DomainMismatch("perturbation dimension does not match its ball")

    @cached_property
    def lip_grad_h(self) -> float:
        return self.h.lipschitz_gradient(self.ball.radius)[0]

    @property
    def lip_exact(self) -> bool:
        return self.h.lipschitz_gradient(self.ball.radius)[1]

    def grad_at(self, X):
        return self.h.grad(X)

    @cached_property
    def max_grad_norm(self) -> float:
        """``max_{|x| <= r} |grad h(x)|`` (upper bound for quadratics, sampled otherwise)."""
        r, n = self.ball.radius, self.ball.dimension
        if isinstance(self.h, Quadratic):
            return float(np.linalg.norm(self.h.Q, 2) * r + np.linalg.norm(self.h.b))
        if n == 1:
            X = np.linspace(-r, r, 2 * POLY_GRID_DIVISIONS + 1)[:, None]
        else:
            rng = np.random.default_rng(0)
            D = rng.standard_normal((4096, n))
            D /= np.linalg.norm(D, axis=1, keepdims=True)
            X = np.concatenate([D * r, D * r * rng.random((4096, 1))])
        return float(np.max(np.linalg.norm(self.h.grad(X), axis=-1)))

    @classmethod
    def quadratic(cls, ball: Ball, Q, b=None, c: float = 0.0) -> "PerturbationH":
        return cls(Quadratic(np.atleast_2d(Q), b, c), ball)

    @classmethod
    def isotropic(cls, ball: Ball, eps: float) -> "PerturbationH":
        """``h(x) = eps |x|^2 / 2``."""
        return cls.quadratic(ball, eps * np.eye(ball.dimension))

    @classmethod
    def zero(cls, ball: Ball) -> "PerturbationH":
        return cls.quadratic(ball, np.zeros((ball.dimension, ball.dimension)))


def perturb_componentwise(f: VectorFunction, h: PerturbationH) -> VectorFunction:
    """``g = f + h e``; certificates are recomputed from the merged components."""
    if h.ball != f.ball:
        raise DomainMismatch("perturbation must live on the same ball as f")
    comps = tuple(add_components(c, h.h) for c in f.components)
    return VectorFunction(f.ball, comps, origin=(f, h))


# --------------------------------------------------------------------------- problem files


def problem_from_dict(d: dict) -> tuple[VectorFunction, PerturbationH | None]:
    if not isinstance(d, dict):
        raise SpecParseError("top level must be an object")
    for key in ("dimension", "radius", "objectives"):
        if key not in d:
            raise SpecParseError(f"missing field {key!r}", key)
    n = d["dimension"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SpecParseError("must be a positive integer", "dimension")
    try:
        radius = float(d["radius"])
    except (TypeError, ValueError):
        raise SpecParseError("must be a number", "radius") from None
    if not radius > 0:
        raise SpecParseError("must be positive", "radius")
    center = d.get("center")
    if center is not None and np.any(np.asarray(center, dtype=float) != 0):
        raise SpecParseError("only balls centered at the origin are supported", "center")
    objectives = d["objectives"]
    if not isinstance(objectives, list) or not objectives:
        raise SpecParseError("must be a nonempty list", "objectives")
    ball = Ball(n, radius)
    comps = tuple(component_from_dict(o, n, f"objectives[{k}]") for k, o in enumerate(objectives))
    f = VectorFunction(ball, comps)
    h = None
    if d.get("perturbation") is not None:
        h = PerturbationH(component_from_dict(d["perturbation"], n, "perturbation"), ball)
    return f, h


def problem_to_dict(f: VectorFunction, h: PerturbationH | None = None) -> dict:
    d = f.to_dict()
    if h is not None:
        d["perturbation"] = h.h.to_dict()
    return d


def load_problem(path) -> tuple[VectorFunction, PerturbationH | None]:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from exc
    return problem_from_dict(data)


def dump_problem(path, f: VectorFunction, h: PerturbationH | None = None) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(f, h), indent=2) + "\n")
