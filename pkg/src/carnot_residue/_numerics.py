"""Small numerical helpers shared across modules."""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np


class CompensatedSum:
    """Running sum with Neumaier compensation.

    Blocks are first reduced with :func:`math.fsum` (exactly rounded), then
    folded into the running (hi, lo) pair, so the reduction order is fixed by
    the block order alone.
    """

    __slots__ = ("hi", "lo")

    def __init__(self, start: float = 0.0):
        self.hi = float(start)
        self.lo = 0.0

    def add(self, x: float) -> None:
        t = self.hi + x
        if abs(self.hi) >= abs(x):
            self.lo += (self.hi - t) + x
        else:
            self.lo += (x - t) + self.hi
        self.hi = t

    def add_array(self, values) -> None:
        self.add(math.fsum(np.asarray(values, dtype=float).tolist()))

    @property
    def value(self) -> float:
        return self.hi + self.lo


def richardson(h: Sequence[float], values: Sequence[complex]) -> tuple[complex, float]:
    """Extrapolate ``values[i] = g(h[i])`` to ``h = 0`` by Neville's scheme.

    ``g`` is assumed analytic at 0, so the polynomial interpolant through all
    points is the extrapolant. Returns the top entry of the tableau and the
    gap to the best lower-order entry as an error estimate.
    """
    h = [float(x) for x in h]
    col = [complex(v) for v in values]
    n = len(col)
    if n < 2:
        raise ValueError("need at least two points to extrapolate")
    diag = [col[-1]]
    for k in range(1, n):
        col = [
            (h[i] * col[i + 1] - h[i + k] * col[i]) / (h[i] - h[i + k])
            for i in range(n - k)
        ]
        diag.append(col[-1])
    best = diag[-1]
    err = abs(diag[-1] - diag[-2])
    if best.imag == 0.0:
        return best.real, err
    return best, err


def fd_weights(offsets: Sequence[float], order: int) -> np.ndarray:
    """Finite-difference weights for derivative ``order`` at 0 (Fornberg)."""
    x = np.asarray(offsets, dtype=float)
    n = len(x)
    if order >= n:
        raise ValueError("stencil too short for requested derivative order")
    c = np.zeros((n, order + 1))
    c1 = 1.0
    c4 = x[0]
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def isqrt_array(n: np.ndarray) -> np.ndarray:
    """Elementwise floor(sqrt(n)) for non-negative int64 arrays."""
    n = np.asarray(n, dtype=np.int64)
    r = np.floor(np.sqrt(n.astype(np.float64))).astype(np.int64)
    r -= (r * r > n).astype(np.int64)
    r += ((r + 1) * (r + 1) <= n).astype(np.int64)
    return r


def ceil_sqrt_array(n: np.ndarray) -> np.ndarray:
    """Elementwise ceil(sqrt(n)) for non-negative int64 arrays."""
    r = isqrt_array(n)
    return r + (r * r < n).astype(np.int64)


class Estimate(NamedTuple):
    """A numerical value with an absolute error estimate."""

    value: complex
    error: float
