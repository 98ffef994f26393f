"""Spectral zeta functions and their residue at the first pole.

``zeta(s) = sum_n a_n lambda_n^-s`` is summed exactly up to a cutoff and
completed beyond it with a fitted counting function
``N_a(L) ~ C L^e + B L^(e-1)``, ``e = d_H / m``. Writing the tail by parts,

    sum_{lambda > L} a lambda^-s = -L^-s N_a(L) + s int_L^inf N_a(t) t^(-s-1) dt,

keeps the exact boundary count and uses the model only inside the integral.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import stats

from ._numerics import richardson
from .spectral_models import SpectralStream

__all__ = [
    "ZetaProfile",
    "TailModel",
    "fit_tail",
    "zeta",
    "ResidueResult",
    "residue_at",
    "c_of",
    "res_dh",
    "random_weights",
    "residue_table",
    "write_residue_csv",
    "DEFAULT_EPS",
]

DEFAULT_EPS = (0.2, 0.1, 0.05, 0.025)
Weights = Callable[[np.ndarray], np.ndarray]


class TailModel(NamedTuple):
    C: float
    B: float
    exponent: float  # nominal d_H / m, used in the tail
    free_exponent: float  # unconstrained log-log slope, for the consistency check


def _weighted_pairs(stream: SpectralStream, weights: Weights | None, lam_cut: float):
    vals, mults = stream.pairs_upto(lam_cut)
    w = mults.astype(float)
    if weights is not None:
        w = w * np.asarray(weights(vals), dtype=float)
    return vals, w


def fit_tail(vals: np.ndarray, w: np.ndarray, exponent: float, lam_cut: float, points: int = 64) -> TailModel:
    """Least-squares fit of ``N_a`` on ``[lam_cut / 16, lam_cut]``."""
    lams = lam_cut * 2.0 ** np.linspace(-4, 0, points)
    N = np.cumsum(w)[np.searchsorted(vals, lams, side="right") - 1]
    A = np.column_stack([lams**exponent, lams ** (exponent - 1)])
    (C, B), *_ = np.linalg.lstsq(A, N, rcond=None)
    free = stats.linregress(np.log(lams), np.log(np.abs(N) + 1e-300)).slope if np.all(N != 0) else exponent
    return TailModel(float(C), float(B), float(exponent), float(free))


@dataclass(frozen=True)
class ZetaProfile:
    """``zeta_{A,P}`` for diagonal ``A`` with eigenspace weights ``a(lambda)``.

    ``weights=None`` means ``A = 1``. The cutoff data and tail fit are
    computed once at construction.
    """

    stream: SpectralStream
    weights: Weights | None = None
    lam_cut: float = 4096.0
    tail_model: TailModel = field(init=False)
    _vals: np.ndarray = field(init=False, repr=False)
    _w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.lam_cut <= 16:
            raise ValueError("lam_cut must exceed 16")
        vals, w = _weighted_pairs(self.stream, self.weights, self.lam_cut)
        object.__setattr__(self, "_vals", vals)
        object.__setattr__(self, "_w", w)
        if np.any(w != 0):
            tail = fit_tail(vals, w, self.exponent, self.lam_cut)
            if abs(tail.free_exponent / self.exponent - 1) > 0.05:
                raise ValueError(
                    f"counting exponent {tail.free_exponent:.4f} is not within 5% of d_H/m = {self.exponent:g}"
                )
        else:
            tail = TailModel(0.0, 0.0, self.exponent, self.exponent)
        object.__setattr__(self, "tail_model", tail)

    @property
    def exponent(self) -> float:
        return self.stream.d_H / self.stream.order_m

    @property
    def weighted(self) -> bool:
        return self.weights is not None

    def with_cut(self, lam_cut: float) -> ZetaProfile:
        return ZetaProfile(self.stream, self.weights, lam_cut)

    def truncated(self, lam_cut: float) -> ZetaProfile:
        """Profile at a smaller cutoff, reusing the enumerated data."""
        if lam_cut > self.lam_cut:
            return self.with_cut(lam_cut)
        new = object.__new__(ZetaProfile)
        cut = np.searchsorted(self._vals, lam_cut, side="right")
        for k, v in (
            ("stream", self.stream),
            ("weights", self.weights),
            ("lam_cut", float(lam_cut)),
            ("_vals", self._vals[:cut]),
            ("_w", self._w[:cut]),
        ):
            object.__setattr__(new, k, v)
        tail = (
            fit_tail(new._vals, new._w, self.exponent, lam_cut)
            if np.any(new._w != 0)
            else TailModel(0.0, 0.0, self.exponent, self.exponent)
        )
        object.__setattr__(new, "tail_model", tail)
        return new


def _sum_terms(terms: np.ndarray) -> complex:
    if np.iscomplexobj(terms):
        return complex(math.fsum(terms.real.tolist()), math.fsum(terms.imag.tolist()))
    return math.fsum(terms.tolist())


def zeta(zp: ZetaProfile, s: complex) -> complex:
    """``sum a_n lambda_n^-s`` for ``Re(s) > d_H / m``."""
    e = zp.exponent
    if np.real(s) <= e:
        raise ValueError(f"zeta is summed only for Re(s) > d_H/m = {e:g}")
    L = zp.lam_cut
    head = _sum_terms(zp._w * np.exp(-s * np.log(zp._vals)))
    t = zp.tail_model
    N_L = math.fsum(zp._w.tolist())
    tail = -(L ** (-s)) * N_L + s * (t.C * L ** (e - s) / (s - e) + t.B * L ** (e - 1 - s) / (s - e + 1))
    out = head + tail
    return out.real if isinstance(out, complex) and out.imag == 0 else out


class ResidueResult(NamedTuple):
    value: float
    error: float
    converged: bool
    lam_cut: float
    eps: tuple[float, ...]
    zeta_values: tuple[complex, ...]


def _extrapolate(zp: ZetaProfile, eps: Sequence[float], scale: float):
    e = zp.exponent
    zs = [zeta(zp, e + x / scale) for x in eps]
    g = [x * z for x, z in zip(eps, zs)]
    best, gap = richardson(eps, g)
    return float(np.real(best)), gap, zs


def _residue(
    zp: ZetaProfile, eps: Sequence[float], scale: float, rtol: float, max_cut: float
) -> ResidueResult:
    eps = tuple(float(x) for x in eps)
    prof = zp
    while True:
        value, gap, zs = _extrapolate(prof, eps, scale)
        half, _, _ = _extrapolate(prof.truncated(prof.lam_cut / 2), eps, scale)
        err = gap + abs(value - half)
        if err <= rtol * max(abs(value), 1e-300) or prof.lam_cut * 4 > max_cut:
            return ResidueResult(value, err, err <= rtol * max(abs(value), 1e-300), prof.lam_cut, eps, tuple(zs))
        prof = prof.with_cut(prof.lam_cut * 4)


def residue_at(
    zp: ZetaProfile,
    s0: float | None = None,
    *,
    eps: Sequence[float] = DEFAULT_EPS,
    rtol: float = 2e-3,
    max_cut: float = 2.0**20,
) -> ResidueResult:
    """``lim eps zeta(s0 + eps)`` at ``s0 = d_H / m`` by Richardson extrapolation.

    The cutoff is raised by factors of 4 until the extrapolant moves by less
    than ``rtol`` when the cutoff is halved. The reported error is the
    extrapolation gap plus that movement.
    """
    if s0 is not None and abs(s0 - zp.exponent) > 1e-12:
        raise ValueError(f"only the leading pole s0 = d_H/m = {zp.exponent:g} is supported")
    if not np.any(zp._w != 0):
        return ResidueResult(0.0, 0.0, True, zp.lam_cut, tuple(eps), tuple(0.0 for _ in eps))
    return _residue(zp, eps, 1.0, rtol, max_cut)


def c_of(zp: ZetaProfile, **kw) -> tuple[float, float]:
    """``C(A, P) = (m / d_H) Res_{s = d_H/m} zeta``, with its error."""
    r = residue_at(zp, **kw)
    k = zp.stream.order_m / zp.stream.d_H
    return k * r.value, k * r.error


def res_dh(
    t_weights: Weights | None,
    P: SpectralStream,
    *,
    lam_cut: float = 4096.0,
    eps: Sequence[float] = DEFAULT_EPS,
    rtol: float = 2e-3,
    max_cut: float = 2.0**20,
) -> ResidueResult:
    """Residue at ``s = 0`` of ``sum t_n lambda_n^(-s/m)`` for diagonal ``T``.

    ``t_weights(lambda)`` gives ``t`` on each eigenspace (``None`` means
    ``T = P^(-d_H/m)``). The sum equals ``zeta_a(d_H/m + s/m)`` with
    ``a = t lambda^(d_H/m)``, which is what is extrapolated in ``s``.
    """
    e = P.d_H / P.order_m
    if t_weights is None:
        a = None
    else:
        def a(vals):
            return np.asarray(t_weights(vals), dtype=float) * vals**e

    zp = ZetaProfile(P, a, lam_cut) if t_weights is None or _nonzero(t_weights, P, lam_cut) else None
    if zp is None:
        return ResidueResult(0.0, 0.0, True, lam_cut, tuple(eps), tuple(0.0 for _ in eps))
    return _residue(zp, eps, P.order_m, rtol, max_cut)


def _nonzero(weights: Weights, P: SpectralStream, lam_cut: float) -> bool:
    vals, _ = P.pairs_upto(lam_cut)
    return bool(np.any(np.asarray(weights(vals)) != 0))


def random_weights(seed: int, lo: float = 0.5, hi: float = 2.0) -> Weights:
    """Deterministic pseudo-random eigenspace weights in ``[lo, hi)``.

    Hashes the bit pattern of each eigenvalue (splitmix64 finaliser), so the
    weight of an eigenspace does not depend on how the stream is blocked.
    """
    key = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)

    def weights(vals):
        with np.errstate(over="ignore"):
            x = np.asarray(vals, dtype="<f8").view(np.uint64) ^ key
            x = x + np.uint64(0x9E3779B97F4A7C15)
            x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            x = x ^ (x >> np.uint64(31))
        u = (x >> np.uint64(11)).astype(float) / float(1 << 53)
        return lo + (hi - lo) * u

    return weights


def residue_table(result: ResidueResult) -> list[list[str]]:
    """Rows ``epsilon, zeta_value, eps_times_zeta, extrapolant``.

    The extrapolant in row ``k`` uses the first ``k + 1`` epsilons.
    """
    g = [x * z for x, z in zip(result.eps, result.zeta_values)]
    rows = []
    for i, (x, z) in enumerate(zip(result.eps, result.zeta_values)):
        ext = repr(float(np.real(richardson(result.eps[: i + 1], g[: i + 1])[0]))) if i else ""
        rows.append([repr(x), repr(float(np.real(z))), repr(float(np.real(g[i]))), ext])
    return rows


def write_residue_csv(path: Path, result: ResidueResult, header: dict | None = None) -> Path:
    """CSV with columns ``epsilon, zeta_value, eps_times_zeta, extrapolant``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epsilon", "zeta_value", "eps_times_zeta", "extrapolant"])
        w.writerows(residue_table(result))
    return path
