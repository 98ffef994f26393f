"""Singular-value sequences, weak-trace diagnostics and Dixmier approximants.

Sequences are run-length encoded: blocks of ``(values, mults)`` with values
nonincreasing across the whole sequence. All partial sums go through
:class:`CompensatedSum`, with each block reduced by ``math.fsum``.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np

from ._numerics import CompensatedSum
from .spectral_models import SpectralStream

__all__ = [
    "SingularSequence",
    "NotMonotoneError",
    "from_spectral",
    "from_function",
    "partial_sums",
    "dyadic_schedule",
    "WeakNorm",
    "weak_norm_estimate",
    "dixmier_estimate",
    "LogFit",
    "log_coefficient_fit",
    "write_partial_sums_csv",
]

Block = tuple[np.ndarray, np.ndarray]


class NotMonotoneError(ValueError):
    """A singular sequence increased or left the positive reals."""


@dataclass(frozen=True)
class SingularSequence:
    """Lazy nonincreasing nonnegative sequence ``mu(0) >= mu(1) >= ...``."""

    provenance: str
    block_factory: Callable[[], Iterator[Block]] = field(repr=False, compare=False)

    def blocks(self) -> Iterator[Block]:
        """Blocks with the monotonicity invariant checked on every window."""
        last = math.inf
        for vals, mults in self.block_factory():
            if vals.size == 0:
                continue
            if vals[0] > last or np.any(np.diff(vals) > 0) or vals[-1] < 0:
                raise NotMonotoneError(f"{self.provenance}: sequence is not nonincreasing and nonnegative")
            last = vals[-1]
            yield vals, mults

    def head(self, n: int) -> np.ndarray:
        out, have = [], 0
        for vals, mults in self.blocks():
            take = np.repeat(vals, mults)[: n - have]
            out.append(take)
            have += take.size
            if have >= n:
                break
        return np.concatenate(out) if out else np.empty(0)

    def scaled(self, a: float) -> SingularSequence:
        if a <= 0:
            raise ValueError("scale must be positive")
        return SingularSequence(
            f"{a:g}*{self.provenance}", lambda: ((a * v, m) for v, m in self.block_factory())
        )


def from_spectral(s: SpectralStream, p: float) -> SingularSequence:
    """Singular values of ``P^-p``: ``mu(n) = lambda(n)^-p``."""
    if p <= 0:
        raise ValueError("exponent p must be positive")
    return SingularSequence(
        f"{s.label}^-{p:g}", lambda: ((vals ** (-float(p)), mults) for vals, mults in s.blocks())
    )


def from_function(func: Callable[[np.ndarray], np.ndarray], label: str = "", block: int = 1 << 16) -> SingularSequence:
    """Sequence ``mu(n) = func(n)`` evaluated on index ranges."""

    def blocks():
        ones = np.ones(block, dtype=np.int64)
        for start in itertools.count(0, block):
            yield np.asarray(func(np.arange(start, start + block, dtype=float)), dtype=float), ones

    return SingularSequence(label or getattr(func, "__name__", "function"), blocks)


def dyadic_schedule(n0: int, n_max: int) -> list[int]:
    """``n0, 2 n0, 4 n0, ...`` up to ``n_max``."""
    if n0 < 1:
        raise ValueError("dyadic schedule must start at N >= 1")
    out = []
    n = int(n0)
    while n <= n_max:
        out.append(n)
        n *= 2
    return out


def partial_sums(sigma: SingularSequence, Ns: Sequence[int]) -> np.ndarray:
    """``S_N = sum_{n=0}^{N} mu(n)`` for each requested ``N`` (one pass)."""
    Ns = [int(n) for n in Ns]
    if any(n < 0 for n in Ns):
        raise ValueError("N must be nonnegative")
    order = sorted(range(len(Ns)), key=Ns.__getitem__)
    out = np.zeros(len(Ns))
    acc = CompensatedSum()
    done = 0  # terms consumed
    k = 0
    blocks = sigma.blocks()
    while k < len(order):
        try:
            vals, mults = next(blocks)
        except StopIteration:
            raise ValueError("sequence ended before the requested N") from None
        csum = np.cumsum(mults)
        end = done + int(csum[-1])
        while k < len(order) and Ns[order[k]] + 1 <= end:
            need = Ns[order[k]] + 1 - done
            i = int(np.searchsorted(csum, need, side="left"))
            full = math.fsum((vals[:i] * mults[:i]).tolist())
            before = int(csum[i - 1]) if i else 0
            part = CompensatedSum(acc.hi)
            part.lo = acc.lo
            part.add(full)
            part.add(float(vals[i]) * (need - before))
            out[order[k]] = part.value
            k += 1
        acc.add_array(vals * mults)
        done = end
    return out


class WeakNorm(NamedTuple):
    value: float  # max over n < N of (n+1) mu(n)
    tail_value: float  # the same max restricted to N/10 <= n < N
    stabilized: bool  # running max unchanged over the last decade of n


def weak_norm_estimate(sigma: SingularSequence, N: int) -> WeakNorm:
    """Estimate ``sup_n (n+1) mu(n)`` from the first ``N`` terms.

    Inside a run of equal values the product is largest at the run's last
    index, so one candidate per run suffices.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    lo = N // 10
    best = best_before = tail = 0.0
    done = 0
    for vals, mults in sigma.blocks():
        ends = done + np.cumsum(mults)  # one past each run's last index
        starts = ends - mults
        clip = np.minimum(ends, N)
        live = starts < N
        if not live.any():
            break
        cand = clip[live] * vals[live]
        best = max(best, float(cand.max()))
        pre = np.minimum(clip, lo)
        pre_live = starts < lo
        if pre_live.any():
            best_before = max(best_before, float((pre[pre_live] * vals[pre_live]).max()))
        in_tail = live & (clip > lo)
        if in_tail.any():
            tail = max(tail, float((clip[in_tail] * vals[in_tail]).max()))
        done = int(ends[-1])
        if done >= N:
            break
    return WeakNorm(best, tail, best == best_before)


def dixmier_estimate(sigma: SingularSequence, N: int) -> float:
    """``S_N / log(N + 2)``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return float(partial_sums(sigma, [N])[0]) / math.log(N + 2)


class LogFit(NamedTuple):
    c: float
    spread: float
    increments: np.ndarray
    offset: float  # max |S_N - c log N| over the fitted points


def log_coefficient_fit(Ns: Sequence[int], S: Sequence[float]) -> LogFit:
    """Coefficient ``c`` in ``S_N = c log N + O(1)`` from dyadic partial sums.

    ``c`` is the mean of ``(S_{2N} - S_N) / log 2`` over the upper half of the
    dyadic increments; ``spread`` is their max minus min.
    """
    Ns = np.asarray(Ns, dtype=float)
    S = np.asarray(S, dtype=float)
    if Ns.shape != S.shape:
        raise ValueError("Ns and S must have equal length")
    if np.any(Ns <= 0):
        raise ValueError("N must be positive")
    if len(Ns) < 8:
        raise ValueError("need at least 8 dyadic points")
    if not np.allclose(Ns[1:] / Ns[:-1], 2.0):
        raise ValueError("points must be dyadic (N doubling)")
    inc = np.diff(S) / math.log(2.0)
    upper = inc[len(inc) // 2 :]
    c = float(np.mean(upper))
    pts = slice(len(Ns) // 2, None)
    offset = float(np.max(np.abs(S[pts] - c * np.log(Ns[pts]))))
    return LogFit(c, float(upper.max() - upper.min()), inc, offset)


def write_partial_sums_csv(path: Path, Ns: Sequence[int], S: Sequence[float], header: dict | None = None) -> Path:
    """CSV with columns ``N, S_N, dixmier_estimate, increment``.

    ``header`` entries are written first as ``# key=value`` comment lines.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "S_N", "dixmier_estimate", "increment"])
        prev = None
        for n, s in zip(Ns, S):
            inc = "" if prev is None else repr((s - prev) / math.log(2.0))
            w.writerow([int(n), repr(float(s)), repr(float(s) / math.log(n + 2)), inc])
            prev = s
    return path
