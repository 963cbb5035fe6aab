"""Excess and Hausdorff distances between finite point sets.

Conventions for empty sets: ``e(empty, A) = 0``, ``e(empty, empty) = 0`` and
``e(A, empty) = +inf`` for nonempty ``A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_CHUNK = 4096


@dataclass(frozen=True)
class DistanceValue:
    value: float
    attaining_pair: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)

    def __float__(self):
        return self.value


def _as_array(A) -> np.ndarray:
    A = getattr(A, "points", A)
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return A.reshape(0, A.shape[-1] if A.ndim > 1 else 1)
    if A.ndim == 1:
        A = A[:, None]
    return A


def nearest_distances(A, B) -> tuple[np.ndarray, np.ndarray]:
    """For each row of ``A``: distance to the nearest row of ``B`` and its index.

    Squared distances are accumulated coordinate by coordinate, so results are
    reproducible regardless of chunking.
    """
    A, B = _as_array(A), _as_array(B)
    dist = np.empty(len(A))
    idx = np.empty(len(A), dtype=int)
    for s in range(0, len(A), _CHUNK):
        Ac = A[s:s + _CHUNK]
        sq = np.zeros((len(Ac), len(B)))
        for j in range(A.shape[1]):
            sq += (Ac[:, None, j] - B[None, :, j]) ** 2
        k = np.argmin(sq, axis=1)
        idx[s:s + _CHUNK] = k
        dist[s:s + _CHUNK] = np.sqrt(sq[np.arange(len(Ac)), k])
    return dist, idx


def excess(A, B) -> DistanceValue:
    """``e(A, B) = sup_{a in A} d(a, B)``."""
    A, B = _as_array(A), _as_array(B)
    if len(A) == 0:
        return DistanceValue(0.0)
    if len(B) == 0:
        return DistanceValue(math.inf)
    dist, idx = nearest_distances(A, B)
    i = int(np.argmax(dist))
    return DistanceValue(float(dist[i]), (A[i].copy(), B[idx[i]].copy()))


def hausdorff(A, B) -> DistanceValue:
    """``d_H(A, B) = max{e(A, B), e(B, A)}``; ties resolve to ``e(A, B)``."""
    ab, ba = excess(A, B), excess(B, A)
    if ab.value >= ba.value:
        return ab
    pair = None if ba.attaining_pair is None else ba.attaining_pair[::-1]
    return DistanceValue(ba.value, pair)
