"""Wodzicki residue of classical symbols on the flat torus, and the Connes check.

``res_w = (2 pi)^-d int_{T^d} int_{S^{d-1}} sigma_{-d}(x, xi) dxi dx``. The
torus is one periodic chart, so the trapezoid rule in ``x`` is spectrally
accurate. The sphere uses hyperspherical angles: trapezoid in the azimuth and
Gauss-Jacobi in the cosines of the polar angles, which absorbs the
``sin^k`` Jacobian factors exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy import special

from .spectral_models import torus_stream
from .trace_ideals import SingularSequence, dyadic_schedule, from_spectral, log_coefficient_fit, partial_sums

__all__ = [
    "ClassicalSymbol",
    "sphere_rule",
    "sphere_area",
    "WodzickiResult",
    "res_w",
    "ConnesReport",
    "connes_compare",
    "connes_check",
]


@dataclass(frozen=True)
class ClassicalSymbol:
    """Order ``-d`` component ``sigma(x, xi)`` on ``T^d x S^{d-1}``.

    ``sigma`` takes arrays ``x`` and ``xi`` of shape ``(..., d)``; only unit
    ``xi`` are ever passed, homogeneity fixing the rest.
    """

    d: int
    sigma: Callable[[np.ndarray, np.ndarray], np.ndarray]

    @classmethod
    def constant(cls, d: int, c: float = 1.0) -> ClassicalSymbol:
        return cls(d, lambda x, xi: np.full(x.shape[:-1], float(c)))

    def __add__(self, other: ClassicalSymbol) -> ClassicalSymbol:
        return ClassicalSymbol(self.d, lambda x, xi: self.sigma(x, xi) + other.sigma(x, xi))

    def __mul__(self, c: float) -> ClassicalSymbol:
        return ClassicalSymbol(self.d, lambda x, xi: c * self.sigma(x, xi))

    __rmul__ = __mul__

    def check_smooth(self, n: int = 16) -> float:
        """Max second difference over a random line of ``x``; finite for smooth symbols."""
        rng = np.random.default_rng(0)
        xi = rng.normal(size=self.d)
        xi /= np.linalg.norm(xi)
        t = np.linspace(0, 2 * np.pi, n, endpoint=False)
        x = t[:, None] * np.ones(self.d)
        f = self.sigma(x, np.broadcast_to(xi, x.shape))
        if not np.all(np.isfinite(f)):
            raise ValueError("symbol is not finite on the sample grid")
        return float(np.max(np.abs(np.roll(f, 1) - 2 * f + np.roll(f, -1))))


def sphere_area(d: int) -> float:
    """Area of the unit sphere in ``R^d``."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


@lru_cache(maxsize=32)
def sphere_rule(d: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``(M, d)`` and weights ``(M,)`` on ``S^{d-1}``.

    Exact for polynomials of total degree ``< 2 * order`` restricted to the sphere.
    """
    if d < 2:
        raise ValueError("sphere rule needs d >= 2")
    phi = 2 * np.pi * np.arange(2 * order) / (2 * order)
    pts = np.column_stack([np.cos(phi), np.sin(phi)])
    wts = np.full(2 * order, 2 * np.pi / (2 * order))
    # build S^{k} from S^{k-1}: xi = (u, sqrt(1-u^2) * eta), measure (1-u^2)^((k-2)/2) du deta
    for k in range(2, d):
        a = (k - 2) / 2
        u, wu = special.roots_jacobi(order, a, a)
        r = np.sqrt(1 - u**2)
        pts = np.concatenate(
            [u[:, None, None] * np.ones((1, len(wts), 1)), r[:, None, None] * pts[None, :, :]], axis=2
        ).reshape(-1, k + 1)
        wts = (wu[:, None] * wts[None, :]).ravel()
    return pts, wts


class WodzickiResult(NamedTuple):
    value: float
    error: float
    converged: bool
    grid: tuple[int, int]


def _integrate(sym: ClassicalSymbol, nx: int, order: int, chunk: int = 1 << 21) -> float:
    d = sym.d
    xi, w = sphere_rule(d, order)
    axes = [2 * np.pi * np.arange(nx) / nx] * d
    xs = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    step = max(1, chunk // len(w))
    partial = []
    for i in range(0, len(xs), step):
        xb = xs[i : i + step]
        vals = sym.sigma(xb[:, None, :] + 0.0 * xi[None, :, :], np.broadcast_to(xi, (len(xb),) + xi.shape))
        partial.append(math.fsum((vals @ w).tolist()))
    # (2 pi)^-d * (2 pi / nx)^d * sum  ==  mean over the x grid
    return math.fsum(partial) / len(xs)


def res_w(sym: ClassicalSymbol, grid: tuple[int, int] = (8, 11), tol: float = 1e-8) -> WodzickiResult:
    """Residue with a refinement error estimate.

    ``grid = (nx, order)``: trapezoid points per torus axis and Gauss nodes per
    polar angle. The value uses the given grid; the error is its distance to
    the grids with ``nx // 2`` and with ``order - 4`` (conservative, since
    the coarser grids are the less accurate ones).
    """
    nx, order = map(int, grid)
    if nx < 2 or order < 5:
        raise ValueError("grid needs nx >= 2 and order >= 5")
    base = _integrate(sym, nx, order)
    err = abs(_integrate(sym, nx // 2, order) - base) + abs(_integrate(sym, nx, order - 4) - base)
    return WodzickiResult(base, err, err <= tol * max(1.0, abs(base)), (nx, order))


class ConnesReport(NamedTuple):
    A: float
    B: float
    rel_discrepancy: float
    N_target: int
    spread: float
    grid: tuple[int, int]

    def as_dict(self) -> dict:
        return {
            "A": self.A,
            "B": self.B,
            "rel_discrepancy": self.rel_discrepancy,
            "N_target": self.N_target,
            "spread": self.spread,
            "grid": list(self.grid),
        }


def connes_compare(
    A: float, sigma: SingularSequence, N_target: int, grid: tuple[int, int] = (0, 0), points: int = 11
) -> ConnesReport:
    """Compare ``A`` with the log-coefficient of the partial sums of ``sigma``.

    The fit uses ``points`` dyadic values of ``N`` ending near ``N_target``.
    """
    n0 = max(1, N_target >> (points - 1))
    Ns = dyadic_schedule(n0, N_target)
    fit = log_coefficient_fit(Ns, partial_sums(sigma, Ns))
    return ConnesReport(A, fit.c, abs(A - fit.c) / abs(A), int(N_target), fit.spread, tuple(grid))


def connes_check(d: int, N_target: int, grid: tuple[int, int] = (8, 11)) -> ConnesReport:
    """Compare ``res_w(1) / d`` with the log-coefficient of ``sum (1 + |k|^2)^(-d/2)``."""
    if not 2 <= d <= 4:
        raise ValueError("connes_check supports 2 <= d <= 4")
    A = res_w(ClassicalSymbol.constant(d), grid).value / d
    return connes_compare(A, from_spectral(torus_stream(d), d / 2), int(N_target), grid)
