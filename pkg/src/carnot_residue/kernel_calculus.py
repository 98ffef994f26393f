"""Pseudodifferential kernels over the fibred model.

A kernel of order ``m`` is recovered from ``k = (L_Z - m) P`` by integrating
the zoom action. All lambda-integrals are taken in the variable
``u = -log(lambda)``, where the singular endpoint becomes an exponential tail
and compact support gives a finite cutoff.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate, optimize

from ._numerics import Estimate, fd_weights, richardson
from .fibred_model import FibredDensityModel

__all__ = [
    "KernelSample",
    "KernelModel",
    "reconstruct_kernel",
    "cocycle",
    "TraceProfile",
    "local_trace_direct",
    "local_trace_extended",
    "incomplete_beta",
    "SimplePoleError",
    "ResidueEstimate",
    "trace_residue_at_pole",
    "CocycleResidue",
    "residue_from_cocycle",
    "POLE_WINDOW",
]

POLE_WINDOW = 1e-6
_EPS = np.finfo(float).eps
_QUAD = dict(epsabs=1e-14, epsrel=1e-12, limit=400)


def _quad(func: Callable[[float], complex], a: float, b: float, cplx: bool, **kw) -> tuple[complex, float]:
    opts = {**_QUAD, **kw}
    if cplx:
        val, err = integrate.quad(func, a, b, complex_func=True, **opts)
        return complex(val), abs(complex(err))
    val, err = integrate.quad(lambda t: float(np.real(func(t))), a, b, **opts)
    return float(val), float(err)


def _tail_length(rate: float, floor: float = 1e-17) -> float:
    """Length beyond which ``exp(-rate * u)`` is below ``floor``."""
    return -math.log(floor) / rate


# --- kernel reconstruction --------------------------------------------------


class KernelSample(NamedTuple):
    value: complex | None
    error: float
    singular: bool


class KernelModel:
    """Kernel ``P`` of order ``m`` with ``(L_Z - m) P = source``.

    ``P(z, h) = int_0^inf exp(u (m + d_H)) k(delta_{e^u} z, e^{-u} h) du``.
    """

    def __init__(self, source: FibredDensityModel, order: complex):
        if np.real(order) >= 0:
            raise ValueError("reconstruction needs Re(m) < 0")
        self.source = source
        self.order = complex(order) if np.iscomplexobj(order) else float(order)
        self.d_H = source.d_H
        self._w = np.asarray(source.algebra.weights, dtype=float)

    @property
    def trace_class(self) -> bool:
        return np.real(self.order) < -self.d_H

    def _exit_time(self, z: np.ndarray) -> float:
        """Smallest u with ``|delta_{e^u} z| >= support_radius`` (z != 0)."""
        R2 = self.source.support_radius**2

        def excess(u):
            return float(np.sum((np.exp(u * self._w) * z) ** 2) - R2)

        if excess(0.0) >= 0:
            return 0.0
        hi = math.log(self.source.support_radius / np.linalg.norm(z)) / self._w.min()
        if excess(hi) <= 0:
            return hi
        return optimize.brentq(excess, 0.0, hi, xtol=1e-15)

    def evaluate(self, z, h: float) -> KernelSample:
        z = np.asarray(z, dtype=float)
        a = self.order + self.d_H
        cplx = isinstance(a, complex)
        k = self.source

        def integrand(u):
            return np.exp(u * a) * k(np.exp(u * self._w) * z, math.exp(-u) * h)

        if not np.any(z):
            if not self.trace_class:
                return KernelSample(None, math.inf, True)
            upper = _tail_length(-np.real(a))
        else:
            upper = self._exit_time(z)
        if upper == 0.0:
            return KernelSample(0.0, 0.0, False)
        val, err = _quad(integrand, 0.0, upper, cplx)
        return KernelSample(val, err, False)

    def __call__(self, z, h):
        """Vectorised evaluation; raises at singular points."""
        z = np.asarray(z, dtype=float)
        h = np.broadcast_to(np.asarray(h, dtype=float), z.shape[:-1])
        flat_z = z.reshape(-1, z.shape[-1])
        flat_h = h.reshape(-1)
        out = []
        for zi, hi in zip(flat_z, flat_h):
            s = self.evaluate(zi, float(hi))
            if s.singular:
                raise ValueError("kernel is singular at the origin for Re(m) >= -d_H")
            out.append(s.value)
        return np.asarray(out).reshape(z.shape[:-1])


def reconstruct_kernel(k: FibredDensityModel, m: complex) -> KernelModel:
    """``P = int_0^1 (alpha_lambda)_* k  dlambda / lambda^(m+1)`` for ``Re(m) < 0``."""
    return KernelModel(k, m)


def cocycle(k: FibredDensityModel, m: complex, lam: float) -> FibredDensityModel:
    """``f(lam) = int_1^lam (alpha_t)_* k  dt / t^(m+1)`` as a quadrature-backed model.

    In ``v = log t`` the integral runs over ``[0, log lam]`` with integrand
    ``exp(-v (m + d_H)) k(delta_{e^-v} z, e^v h)``.
    """
    if lam <= 0:
        raise ValueError("cocycle parameter must be positive")
    lam = float(lam)
    L = math.log(lam)
    dH = k.d_H
    a = (complex(m) if np.iscomplexobj(m) else float(m)) + dH
    cplx = isinstance(a, complex)
    w = np.asarray(k.algebra.weights, dtype=float)

    def point(z, h):
        if L == 0.0:
            return 0.0

        def integrand(v):
            return np.exp(-v * a) * k(np.exp(-v * w) * z, math.exp(v) * h)

        return _quad(integrand, 0.0, L, cplx)[0]

    def value(z, h):
        z = np.asarray(z, dtype=float)
        h = np.broadcast_to(np.asarray(h, dtype=float), z.shape[:-1])
        flat = [point(zi, float(hi)) for zi, hi in zip(z.reshape(-1, z.shape[-1]), h.reshape(-1))]
        return np.asarray(flat).reshape(z.shape[:-1])

    stretch = max(1.0, 1.0 / lam) ** w.max()
    return FibredDensityModel(
        k.algebra,
        value,
        support_radius=k.support_radius * stretch,
        h_max=k.h_max / max(1.0, lam),
        label=f"cocycle({k.label},{lam:g})",
    )


# --- local traces -----------------------------------------------------------


class TraceProfile:
    """``h -> tr_h(k)`` with derivatives.

    Without closed-form derivatives, the n-th derivative uses a one-sided
    forward stencil of 6th order.
    """

    def __init__(
        self,
        func: Callable[[float], float],
        *,
        derivative: Callable[[float, int], float] | None = None,
        h_max: float = math.inf,
        scale: float = 1.0,
    ):
        self._func = func
        self._derivative = derivative
        self.h_max = float(h_max)
        self.scale = float(scale)

    @classmethod
    def from_model(cls, f: FibredDensityModel, analytic: bool = True) -> TraceProfile:
        origin = np.zeros(f.dim)
        deriv = None
        if analytic and f.analytic:
            deriv = lambda h, n: float(f.dh(origin, h, n))  # noqa: E731
        return cls(lambda h: float(f(origin, h)), derivative=deriv, h_max=f.h_max)

    @classmethod
    def exponential(cls, rate: float = -1.0, scale: float = 1.0) -> TraceProfile:
        return cls(
            lambda h: scale * math.exp(rate * h),
            derivative=lambda h, n: scale * rate**n * math.exp(rate * h),
        )

    @classmethod
    def constant(cls, c: float) -> TraceProfile:
        return cls(lambda h: c, derivative=lambda h, n: c if n == 0 else 0.0)

    @property
    def analytic(self) -> bool:
        return self._derivative is not None

    def __call__(self, h: float) -> float:
        return self._func(h)

    def derivative(self, h: float, n: int) -> float:
        if n == 0:
            return self._func(h)
        if self._derivative is not None:
            return self._derivative(h, n)
        return self.fd_derivative(h, n)

    def fd_derivative(self, h: float, n: int) -> float:
        offsets = list(range(n + 6))
        step = self.scale * _EPS ** (1.0 / (n + 6))
        wts = fd_weights(offsets, n)
        return math.fsum(wk * self._func(h + k * step) for wk, k in zip(wts, offsets)) / step**n


def _as_number(m):
    return complex(m) if np.iscomplexobj(m) or isinstance(m, complex) else float(m)


def local_trace_direct(k: TraceProfile, m: complex, h: float, d_H: int) -> Estimate:
    """``int_0^1 tr_{lambda h}(k) lambda^(-m-d_H-1) dlambda`` for ``Re(m) < -d_H``."""
    a = _as_number(m) + d_H
    if np.real(a) >= 0:
        raise ValueError("direct local trace needs Re(m) < -d_H")
    cplx = isinstance(a, complex)

    def integrand(u):
        return np.exp(u * a) * k(math.exp(-u) * h)

    # split so QUADPACK resolves the slow decay over many e-folds
    upper = _tail_length(-np.real(a))
    cuts = np.unique(np.concatenate([np.linspace(0.0, min(upper, 40.0), 9), [upper]]))
    total, err = 0.0, 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        v, e = _quad(integrand, lo, hi, cplx)
        total += v
        err += e
    return Estimate(total, err)


class SimplePoleError(ValueError):
    """Raised when the order sits on a pole of the continued local trace."""

    def __init__(self, index: int, pole: complex, residue: complex):
        self.index = index
        self.pole = pole
        self.residue = residue
        super().__init__(f"simple pole at m = {pole} (j = {index}); residue in m: {residue}")


def local_trace_extended(k: TraceProfile, m: complex, h: float, d_H: int, n: int) -> complex:
    """Continuation of the local trace to ``Re(m) < n - d_H``.

    Taylor-expands ``tr_h`` to order ``n`` at 0; the polynomial part is
    integrated exactly and the remainder against an incomplete Beta kernel.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    a = _as_number(m) + d_H
    if np.real(a) >= n:
        raise ValueError(f"Re(m) must be below n - d_H = {n - d_H}")
    for j in range(n):
        if abs(a - j) < POLE_WINDOW:
            residue = -(h**j) * k.derivative(0.0, j) / math.factorial(j)
            raise SimplePoleError(j, j - d_H, residue)
    head = sum(h**j / (math.factorial(j) * (j - a)) * k.derivative(0.0, j) for j in range(n))
    if h == 0.0:
        return head
    beta = a - n + 1
    cplx = isinstance(a, complex)

    def integrand(u):
        if u == 0.0:  # bounded endpoint; QUADPACK does not sample it
            return 0.0
        return k.derivative(h * u, n) * u ** (n - a - 1) * incomplete_beta(1.0 - u, n, beta)

    rest, _ = _quad(integrand, 0.0, 1.0, cplx)
    return head + h**n / math.factorial(n - 1) * rest


# --- incomplete Beta --------------------------------------------------------


def _rising_series(x: float, alpha: complex, beta: complex) -> complex:
    """``int_0^x t^(alpha-1) (1-t)^(beta-1) dt`` for ``0 < x <= 1/2``.

    Binomial expansion of ``(1-t)^(beta-1)``; terminates if ``beta`` is a
    positive integer.
    """
    coef = 1.0 + 0j
    total = 0j
    xa = np.exp(alpha * math.log(x))
    xi = 1.0
    for i in range(4000):
        term = coef * xa * xi / (alpha + i)
        total += term
        if coef == 0 or (i > 8 and abs(term) < 1e-18 * max(abs(total), 1e-300)):
            break
        coef *= (i + 1 - beta) / (i + 1)
        xi *= x
    return total


def _power_integral(c: complex, lo: float, hi: float) -> complex:
    """``int_lo^hi s^(c-1) ds`` for ``0 <= lo < hi``, stable as ``c -> 0``."""
    if lo == 0.0:
        return np.exp(c * math.log(hi)) / c
    L = math.log(hi / lo)
    z = c * L
    rel = 1 + z / 2 + z * z / 6 + z**3 / 24 if abs(z) < 1e-4 else np.expm1(z) / z
    return np.exp(c * math.log(lo)) * L * rel


def incomplete_beta(x: float, alpha: complex, beta: complex) -> complex:
    """``B(x; alpha, beta) = int_0^x t^(alpha-1) (1-t)^(beta-1) dt``.

    Series in ``t`` on ``[0, min(x, 1/2)]`` and in ``1 - t`` on
    ``[1/2, x]``, so each expansion converges at least like ``2^-i``.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if np.real(alpha) <= 0:
        raise ValueError("Re(alpha) must be positive")
    if x == 1.0 and np.real(beta) <= 0:
        raise ValueError("B(1; alpha, beta) diverges for Re(beta) <= 0")
    alpha = complex(alpha)
    beta = complex(beta)
    if x == 0.0:
        return 0j
    if x <= 0.5:
        return _rising_series(x, alpha, beta)
    total = _rising_series(0.5, alpha, beta)
    y = 1.0 - x
    coef = 1.0 + 0j
    for i in range(4000):
        term = coef * _power_integral(beta + i, y, 0.5)
        total += term
        coef *= (i + 1 - alpha) / (i + 1)
        if coef == 0 or (i > 8 and abs(term) < 1e-18 * max(abs(total), 1e-300)):
            break
    return total


# --- residues ---------------------------------------------------------------


class ResidueEstimate(NamedTuple):
    value: complex
    error: float
    converged: bool


def trace_residue_at_pole(
    k: TraceProfile,
    d_H: int,
    h: float,
    slope: float,
    *,
    pole_index: int = 0,
    eps: Sequence[float] = (1e-1, 1e-2, 1e-3),
    tol: float = 1e-4,
) -> ResidueEstimate:
    """Residue of ``s -> tr_h P(s)`` for orders ``mu(s) = -d_H + j + slope (s - s0)``.

    Extrapolates ``eps * tr_h P(s0 + eps)`` to ``eps = 0``. With ``j = 0`` the
    exact value is ``-tr_0(k) / slope``.
    """
    if slope == 0:
        raise ValueError("slope must be nonzero")
    j = int(pole_index)
    n = j + 2 + math.ceil(abs(slope) * max(eps))
    vals = [e * local_trace_extended(k, -d_H + j + slope * e, h, d_H, n) for e in eps]
    best, err = richardson(eps, vals)
    scale = max(1.0, abs(best))
    return ResidueEstimate(best, err, bool(err <= tol * scale))


class CocycleResidue(NamedTuple):
    value: float
    deviation: float
    samples: tuple[float, ...]


def residue_from_cocycle(k: FibredDensityModel, lambdas: Sequence[float], h: float = 0.0) -> CocycleResidue:
    """``tr_h f(lam) / log(lam)`` for the order ``-d_H`` cocycle, averaged over ``lambdas``."""
    lambdas = [float(x) for x in lambdas]
    if not lambdas or any(x <= 0 or x == 1.0 for x in lambdas):
        raise ValueError("lambda samples must be positive and different from 1")
    origin = np.zeros(k.dim)
    ratios = []
    for lam in lambdas:
        f = cocycle(k, -k.d_H, lam)
        ratios.append(float(np.real(f(origin, h))) / math.log(lam))
    mean = math.fsum(ratios) / len(ratios)
    return CocycleResidue(mean, max(abs(r - mean) for r in ratios), tuple(ratios))
