"""Single-chart model of fibred densities f(z, h) on the tangent groupoid.

A model stores the coefficient of ``f`` against Lebesgue measure ``|dz|`` in
exponential coordinates of one osculating fiber, together with optional
closed-form derivatives. Evaluators are vectorised: ``z`` has shape
``(..., dim)`` and ``h`` broadcasts against ``z[..., 0]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from ._numerics import fd_weights
from .graded_lie import GradedLieAlgebra, homogeneous_dimension

__all__ = [
    "HProfile",
    "exponential",
    "polynomial",
    "Bump",
    "gauss_bump",
    "poly_bump",
    "cos_window",
    "BUMPS",
    "FibredDensityModel",
    "builtin_model",
    "zoom_pushforward",
    "local_trace",
    "lie_derivative_Z",
    "check_support",
    "check_derivatives",
]

_EPS = np.finfo(float).eps


# --- h-profiles -------------------------------------------------------------


class HProfile:
    """Smooth function of the deformation parameter with all derivatives."""

    def __call__(self, h):
        return self.derivative(h, 0)

    def derivative(self, h, n: int):
        raise NotImplementedError


@dataclass(frozen=True)
class _Exponential(HProfile):
    rate: float
    scale: float

    def derivative(self, h, n: int):
        return self.scale * self.rate**n * np.exp(self.rate * np.asarray(h, dtype=float))


@dataclass(frozen=True)
class _Polynomial(HProfile):
    coeffs: tuple[float, ...]

    def derivative(self, h, n: int):
        p = Polynomial(self.coeffs).deriv(n) if n else Polynomial(self.coeffs)
        return p(np.asarray(h, dtype=float))


def exponential(rate: float = -1.0, scale: float = 1.0) -> HProfile:
    """``scale * exp(rate * h)``."""
    return _Exponential(float(rate), float(scale))


def polynomial(coeffs) -> HProfile:
    """Polynomial in ``h`` with coefficients in increasing degree."""
    return _Polynomial(tuple(float(c) for c in coeffs))


# --- radial bumps -----------------------------------------------------------


@dataclass(frozen=True)
class Bump:
    """Radial profile ``b(z) = phi(|z|^2 / R^2)`` supported in the ball of radius R.

    ``phi`` and ``dphi`` act on ``rho = |z|^2 / R^2`` and may assume ``rho < 1``.
    """

    name: str
    radius: float
    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]

    def _rho(self, z):
        z = np.asarray(z, dtype=float)
        return np.sum(z * z, axis=-1) / self.radius**2

    def __call__(self, z):
        rho = self._rho(z)
        inside = rho < 1.0
        out = np.zeros_like(rho)
        out[inside] = self.phi(rho[inside])
        return out

    def grad(self, z):
        z = np.asarray(z, dtype=float)
        rho = self._rho(z)
        inside = rho < 1.0
        d = np.zeros_like(rho)
        d[inside] = self.dphi(rho[inside])
        return (2.0 / self.radius**2) * d[..., None] * z


def gauss_bump(radius: float = 1.0) -> Bump:
    """``exp(-rho / (1 - rho))``: smooth, equal to 1 at the origin."""
    return Bump(
        "gauss_bump",
        float(radius),
        lambda r: np.exp(-r / (1.0 - r)),
        lambda r: -np.exp(-r / (1.0 - r)) / (1.0 - r) ** 2,
    )


def poly_bump(degree: int = 4, radius: float = 1.0) -> Bump:
    """``(1 - rho)**degree``: polynomial inside the support, C^(degree-1) at its edge."""
    if degree < 2:
        raise ValueError("poly_bump needs degree >= 2 for a continuous gradient")
    p = int(degree)
    return Bump(f"poly_bump({p})", float(radius), lambda r: (1.0 - r) ** p, lambda r: -p * (1.0 - r) ** (p - 1))


def cos_window(radius: float = 1.0) -> Bump:
    """``(1 + cos(pi r)) / 2`` with ``r = |z| / R``; even in ``r``, hence smooth at 0."""

    def phi(rho):
        return 0.5 * (1.0 + np.cos(np.pi * np.sqrt(rho)))

    def dphi(rho):
        # d/drho of cos(pi sqrt(rho)) = -(pi/2) sin(pi r)/r = -(pi^2/2) sinc(r)
        return -0.25 * np.pi**2 * np.sinc(np.sqrt(rho))

    return Bump("cos_window", float(radius), phi, dphi)


BUMPS = {"gauss_bump": gauss_bump, "poly_bump": poly_bump, "cos_window": cos_window}


# --- the model --------------------------------------------------------------


class FibredDensityModel:
    """Compactly supported coefficient function ``f(z, h)`` on one fiber.

    ``grad_z(z, h)`` returns shape ``(..., dim)``; ``dh(z, h, n)`` the n-th
    ``h``-derivative. Either may be ``None``, in which case finite differences
    are used: 4th-order central stencils, step ``1e-4 * support_radius`` for
    ``z`` and a rounding-balanced step for ``h``.
    """

    def __init__(
        self,
        algebra: GradedLieAlgebra,
        f: Callable,
        *,
        support_radius: float,
        h_max: float,
        grad_z: Callable | None = None,
        dh: Callable | None = None,
        label: str = "",
    ):
        if support_radius <= 0 or h_max <= 0:
            raise ValueError("support_radius and h_max must be positive")
        self.algebra = algebra
        self._f = f
        self.support_radius = float(support_radius)
        self.h_max = float(h_max)
        self._grad_z = grad_z
        self._dh = dh
        self.label = label

    @property
    def d_H(self) -> int:
        return homogeneous_dimension(self.algebra)

    @property
    def dim(self) -> int:
        return self.algebra.dim

    @property
    def analytic(self) -> bool:
        return self._grad_z is not None and self._dh is not None

    def __call__(self, z, h):
        z = np.asarray(z, dtype=float)
        return self._f(z, np.asarray(h, dtype=float))

    def grad_z(self, z, h):
        z = np.asarray(z, dtype=float)
        h = np.asarray(h, dtype=float)
        if self._grad_z is not None:
            return self._grad_z(z, h)
        step = 1e-4 * self.support_radius
        w = fd_weights([-2, -1, 1, 2], 1)
        out = np.zeros(z.shape)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = step
            acc = sum(wk * self(z + k * e, h) for wk, k in zip(w, (-2, -1, 1, 2)))
            out[..., i] = acc / step
        return out

    def dh(self, z, h, n: int = 1):
        z = np.asarray(z, dtype=float)
        h = np.asarray(h, dtype=float)
        if n == 0:
            return self(z, h)
        if self._dh is not None:
            return self._dh(z, h, n)
        step = max(1.0, self.h_max) * _EPS ** (1.0 / (n + 4)) if n > 1 else 1e-4 * max(1.0, self.h_max)
        half = (n + 1) // 2 + 1
        offsets = list(range(-half, half + 1))
        w = fd_weights(offsets, n)
        return sum(wk * self(z, h + k * step) for wk, k in zip(w, offsets)) / step**n

    # linear structure and pointwise products, used for derivation identities
    def __add__(self, other: FibredDensityModel) -> FibredDensityModel:
        self._check_compatible(other)
        grad = dh = None
        if self.analytic and other.analytic:
            grad = lambda z, h: self.grad_z(z, h) + other.grad_z(z, h)  # noqa: E731
            dh = lambda z, h, n: self.dh(z, h, n) + other.dh(z, h, n)  # noqa: E731
        return FibredDensityModel(
            self.algebra,
            lambda z, h: self(z, h) + other(z, h),
            support_radius=max(self.support_radius, other.support_radius),
            h_max=min(self.h_max, other.h_max),
            grad_z=grad,
            dh=dh,
            label=f"({self.label}+{other.label})",
        )

    def __mul__(self, other) -> FibredDensityModel:
        if isinstance(other, FibredDensityModel):
            return self._product(other)
        c = float(other)
        return FibredDensityModel(
            self.algebra,
            lambda z, h: c * self(z, h),
            support_radius=self.support_radius,
            h_max=self.h_max,
            grad_z=(lambda z, h: c * self.grad_z(z, h)) if self._grad_z else None,
            dh=(lambda z, h, n: c * self.dh(z, h, n)) if self._dh else None,
            label=f"{c:g}*{self.label}",
        )

    __rmul__ = __mul__

    def __sub__(self, other: FibredDensityModel) -> FibredDensityModel:
        return self + (-1.0) * other

    def _product(self, other: FibredDensityModel) -> FibredDensityModel:
        self._check_compatible(other)
        grad = dh = None
        if self.analytic and other.analytic:

            def grad(z, h):
                return self.grad_z(z, h) * other(z, h)[..., None] + self(z, h)[..., None] * other.grad_z(z, h)

            def dh(z, h, n):
                return sum(
                    math.comb(n, j) * self.dh(z, h, j) * other.dh(z, h, n - j) for j in range(n + 1)
                )

        return FibredDensityModel(
            self.algebra,
            lambda z, h: self(z, h) * other(z, h),
            support_radius=min(self.support_radius, other.support_radius),
            h_max=min(self.h_max, other.h_max),
            grad_z=grad,
            dh=dh,
            label=f"({self.label}*{other.label})",
        )

    def _check_compatible(self, other: FibredDensityModel) -> None:
        if other.algebra.weights != self.algebra.weights:
            raise ValueError("models live on different graded algebras")

    def __repr__(self) -> str:
        return f"<FibredDensityModel {self.label or '?'} R={self.support_radius:g} h_max={self.h_max:g}>"


def builtin_model(
    algebra: GradedLieAlgebra,
    name: str = "gauss_bump",
    *,
    h_profile: HProfile | None = None,
    radius: float = 1.0,
    degree: int = 4,
    amplitude: float = 1.0,
    h_max: float = 10.0,
) -> FibredDensityModel:
    """Product model ``amplitude * bump(z) * g(h)`` with closed-form derivatives."""
    if name not in BUMPS:
        raise ValueError(f"unknown test function {name!r}; choose from {sorted(BUMPS)}")
    bump = poly_bump(degree, radius) if name == "poly_bump" else BUMPS[name](radius)
    g = h_profile if h_profile is not None else exponential(-1.0)
    a = float(amplitude)
    return FibredDensityModel(
        algebra,
        lambda z, h: a * bump(z) * g(h),
        support_radius=radius,
        h_max=h_max,
        grad_z=lambda z, h: a * bump.grad(z) * np.asarray(g(h))[..., None],
        dh=lambda z, h, n: a * bump(z) * g.derivative(h, n),
        label=bump.name,
    )


def _inverse_dilation_factors(weights, lam: float) -> np.ndarray:
    return lam ** (-np.asarray(weights, dtype=float))


def zoom_pushforward(f: FibredDensityModel, lam: float) -> FibredDensityModel:
    """``(z, h) -> lam**(-d_H) * f(delta_{1/lam} z, lam * h)``."""
    if lam <= 0:
        raise ValueError("zoom parameter must be positive")
    lam = float(lam)
    dH = f.d_H
    inv = _inverse_dilation_factors(f.algebra.weights, lam)
    pref = lam ** (-dH)

    def value(z, h):
        return pref * f(z * inv, lam * h)

    grad = dh = None
    if f.analytic:
        grad = lambda z, h: pref * f.grad_z(z * inv, lam * h) * inv  # noqa: E731
        dh = lambda z, h, n: pref * lam**n * f.dh(z * inv, lam * h, n)  # noqa: E731
    w = f.algebra.weights
    stretch = max(lam ** min(w), lam ** max(w))
    return FibredDensityModel(
        f.algebra,
        value,
        support_radius=f.support_radius * stretch,
        h_max=f.h_max / lam,
        grad_z=grad,
        dh=dh,
        label=f"zoom({f.label},{lam:g})",
    )


def local_trace(f: FibredDensityModel, h: float) -> float:
    """Restriction to the unit space: ``f(0, h)``."""
    if abs(h) > f.h_max * (1 + 1e-12):
        raise ValueError(f"|h|={abs(h):g} exceeds the model's validity range h_max={f.h_max:g}")
    return float(f(np.zeros(f.dim), h))


def lie_derivative_Z(f: FibredDensityModel) -> FibredDensityModel:
    """Derivative of the zoom action at 1:

    ``(L_Z f)(z, h) = -d_H f - sum_i w_i z_i d_i f + h d_h f``.
    """
    dH = f.d_H
    w = np.asarray(f.algebra.weights, dtype=float)

    def value(z, h):
        z = np.asarray(z, dtype=float)
        h = np.asarray(h, dtype=float)
        euler = np.sum(w * z * f.grad_z(z, h), axis=-1)
        return -dH * f(z, h) - euler + h * f.dh(z, h, 1)

    return FibredDensityModel(
        f.algebra,
        value,
        support_radius=f.support_radius,
        h_max=f.h_max,
        label=f"L_Z({f.label})",
    )


def check_support(f: FibredDensityModel, rng: np.random.Generator, n: int = 256) -> float:
    """Largest ``|f|`` seen at random points outside the declared support."""
    direction = rng.normal(size=(n, f.dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = f.support_radius * (1.0 + rng.uniform(1e-9, 2.0, size=(n, 1)))
    h = rng.uniform(-f.h_max, f.h_max, size=n)
    return float(np.max(np.abs(f(direction * r, h))))


def check_derivatives(f: FibredDensityModel, rng: np.random.Generator, n: int = 64) -> float:
    """Max relative gap between closed-form and central-difference derivatives.

    Points are drawn inside ``0.9 * support_radius`` and ``0.5 * h_max``; gaps
    are measured relative to the largest derivative magnitude in the sample.
    """
    if not f.analytic:
        raise ValueError("model has no closed-form derivatives to check")
    fd = FibredDensityModel(f.algebra, f._f, support_radius=f.support_radius, h_max=f.h_max)
    z = rng.uniform(-1, 1, size=(n, f.dim))
    z *= 0.9 * f.support_radius * rng.uniform(0, 1, size=(n, 1)) / np.maximum(
        np.linalg.norm(z, axis=1, keepdims=True), 1e-300
    )
    h = rng.uniform(-0.5 * f.h_max, 0.5 * f.h_max, size=n)
    worst = 0.0
    for a, b in ((f.grad_z(z, h), fd.grad_z(z, h)), (f.dh(z, h, 1), fd.dh(z, h, 1))):
        scale = max(np.max(np.abs(a)), 1e-300)
        worst = max(worst, float(np.max(np.abs(a - b)) / scale))
    return worst
