"""Lazy eigenvalue streams for model positive operators on compact quotients.

Streams produce run-length blocks ``(values, mults)``: ``values`` strictly
increasing float64 inside a block and across blocks, ``mults`` positive
int64. Two models are provided:

* the flat torus ``R^d / (2 pi Z)^d`` with ``P = 1 - Laplacian``, spectrum
  ``1 + |k|^2`` over ``k`` in ``Z^d``;
* the Heisenberg nilmanifold ``Gamma \\ H`` with the sub-Laplacian
  ``P = 1 - (X^2 + Y^2)``.

For the Heisenberg model write the group law as
``(x, y, t)(x', y', t') = (x + x', y + y', t + t' + x y')`` with
``X = d_x``, ``Y = d_y + x d_t`` and lattice
``Gamma = {(2 pi a, 2 pi b, 4 pi^2 c / q)}``. Fourier analysis in ``t`` gives
central frequencies ``nu = q n / (2 pi)``. The ``n = 0`` sector is the torus
``T^2``. For ``n != 0`` the sector splits into ``q |n|`` copies of the
oscillator ``-d_x^2 + nu^2 x^2``, so the eigenvalues are
``1 + q |n| (2 l + 1) / (2 pi)`` with multiplicity ``q |n|`` for each sign
of ``n``. These formulas are checked against :func:`discretization_oracle`
before a stream is released past its validated prefix.
"""
from __future__ import annotations

import hashlib
import heapq
import itertools
import json
import math
import os
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Iterator, NamedTuple, Sequence

import numpy as np
from scipy import linalg, stats

from ._numerics import ceil_sqrt_array

__all__ = [
    "SpectralStream",
    "torus_stream",
    "sequence_stream",
    "HeisenbergSpec",
    "heisenberg_stream",
    "heisenberg_levels",
    "discretization_oracle",
    "OracleResult",
    "HeisenbergValidation",
    "validate_heisenberg",
    "UnvalidatedStreamError",
    "merge_pairs",
    "counting",
    "counting_many",
    "WeylFit",
    "weyl_fit",
    "write_cache",
    "read_cache",
    "cached_stream",
    "cache_dir",
    "RECORD_DTYPE",
    "MAX_RESOLUTION",
]

Block = tuple[np.ndarray, np.ndarray]
RECORD_DTYPE = np.dtype([("eigenvalue", "<f8"), ("multiplicity", "<u4")])
MAX_RESOLUTION = 2048  # plane waves per side; dense matrices of order 2*R+1


@dataclass(frozen=True)
class SpectralStream:
    """Nondecreasing eigenvalue sequence with multiplicities, enumerated lazily."""

    label: str
    order_m: float
    d_H: int
    block_factory: Callable[[], Iterator[Block]] = field(repr=False, compare=False)
    volume_note: str = ""
    params: tuple = ()

    def blocks(self) -> Iterator[Block]:
        return self.block_factory()

    def __iter__(self) -> Iterator[tuple[float, int]]:
        for vals, mults in self.blocks():
            yield from zip(vals.tolist(), mults.tolist())

    def head(self, n: int) -> list[tuple[float, int]]:
        return list(itertools.islice(iter(self), n))

    def pairs_upto(self, lam: float) -> Block:
        """All ``(value, mult)`` with ``value <= lam``."""
        vs, ms = [], []
        for vals, mults in self.blocks():
            cut = np.searchsorted(vals, lam, side="right")
            vs.append(vals[:cut])
            ms.append(mults[:cut])
            if cut < len(vals):
                break
        if not vs:
            return np.empty(0), np.empty(0, dtype=np.int64)
        return np.concatenate(vs), np.concatenate(ms)

    def expanded(self, count: int) -> np.ndarray:
        """First ``count`` eigenvalues repeated by multiplicity."""
        out, have = [], 0
        for vals, mults in self.blocks():
            if have >= count:
                break
            need = count - have
            csum = np.cumsum(mults)
            cut = min(int(np.searchsorted(csum, need, side="left")) + 1, len(vals))
            v, m = vals[:cut], mults[:cut].copy()
            if cut and csum[cut - 1] > need:
                m[-1] -= csum[cut - 1] - need
            out.append(np.repeat(v, m))
            have += int(m.sum())
        return np.concatenate(out) if out else np.empty(0)

    @property
    def key(self) -> str:
        text = json.dumps([self.label, self.order_m, self.d_H, list(self.params)], sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


# --- torus ------------------------------------------------------------------


def _partial_norms(k: int, bound: int) -> Block:
    """Squared norms ``< bound`` of nonnegative ``k``-vectors, weighted by sign count."""
    s = np.zeros(1, dtype=np.int64)
    w = np.ones(1, dtype=np.int64)
    x = np.arange(math.isqrt(max(bound - 1, 0)) + 1, dtype=np.int64)
    xw = np.where(x > 0, 2, 1)
    for _ in range(k):
        s2 = (s[:, None] + x[None, :] ** 2).ravel()
        w2 = (w[:, None] * xw[None, :]).ravel()
        keep = s2 < bound
        s, w = s2[keep], w2[keep]
    order = np.argsort(s, kind="stable")
    return s[order], w[order]


def _torus_blocks(d: int, target: int = 1 << 18) -> Iterator[Block]:
    n0, width = 0, 64
    table_bound = 0
    s_all = w_all = None
    while True:
        n1 = n0 + width
        if n1 > table_bound:
            table_bound = 2 * n1
            s_all, w_all = _partial_norms(d - 1, table_bound)
        cut = np.searchsorted(s_all, n1)
        s, w = s_all[:cut], w_all[:cut]
        lo = ceil_sqrt_array(np.maximum(n0 - s, 0))
        hi = ceil_sqrt_array(n1 - s)
        cnt = hi - lo
        total = int(cnt.sum())
        starts = np.repeat(lo - (np.cumsum(cnt) - cnt), cnt)
        z = np.arange(total, dtype=np.int64) + starts
        weight = np.repeat(w, cnt) * np.where(z > 0, 2, 1)
        offset = np.repeat(s, cnt) + z * z - n0
        mult = np.bincount(offset, weights=weight, minlength=width).astype(np.int64)
        nz = np.flatnonzero(mult)
        yield (1.0 + n0 + nz).astype(float), mult[nz]
        n0 = n1
        if total < target // 2:
            width *= 2
        elif total > 2 * target and width > 1:
            width //= 2


def torus_stream(d: int) -> SpectralStream:
    """Spectrum of ``1 - Laplacian`` on ``R^d / (2 pi Z)^d``: ``1 + n`` with multiplicity ``r_d(n)``."""
    if not 1 <= d <= 5:
        raise ValueError("torus dimension must be between 1 and 5")
    return SpectralStream(
        label=f"torus(d={d})",
        order_m=2.0,
        d_H=d,
        block_factory=lambda: _torus_blocks(d),
        volume_note="T^d = R^d/(2 pi Z)^d, volume (2 pi)^d",
        params=(("d", d),),
    )


def sequence_stream(
    label: str, order_m: float, d_H: int, func: Callable[[np.ndarray], np.ndarray], block: int = 1 << 16
) -> SpectralStream:
    """Stream with eigenvalues ``func(n)``, ``n = 0, 1, ...``, each of multiplicity 1.

    ``func`` must be strictly increasing.
    """

    def blocks():
        for start in itertools.count(0, block):
            vals = np.asarray(func(np.arange(start, start + block)), dtype=float)
            yield vals, np.ones(block, dtype=np.int64)

    return SpectralStream(label, float(order_m), int(d_H), blocks, params=(("block", block),))


# --- merging ----------------------------------------------------------------


def merge_pairs(*streams: Iterable[tuple[float, int]]) -> Iterator[tuple[float, int]]:
    """k-way merge of sorted ``(value, mult)`` iterables, summing equal values."""
    merged = heapq.merge(*streams, key=lambda p: p[0])
    current, total = None, 0
    for value, mult in merged:
        if value == current:
            total += mult
            continue
        if current is not None:
            yield current, total
        current, total = value, mult
    if current is not None:
        yield current, total


def _oscillator_keys(chains_per_unit: int) -> Iterator[tuple[int, int]]:
    """Merged oscillator family keyed by ``j = |n| (2 l + 1)``.

    Sub-stream ``n`` contributes keys ``n, 3n, 5n, ...`` with multiplicity
    ``2 * chains_per_unit * n`` (both signs of ``n``); it is activated only
    once the merge frontier reaches its first key.
    """
    heap: list[tuple[int, int]] = []
    next_n = 1
    while True:
        while not heap or next_n <= heap[0][0]:
            heapq.heappush(heap, (next_n, next_n))
            next_n += 1
        key, n = heapq.heappop(heap)
        mult = 2 * chains_per_unit * n
        heapq.heappush(heap, (key + 2 * n, n))
        while heap[0][0] == key:
            _, n2 = heapq.heappop(heap)
            mult += 2 * chains_per_unit * n2
            heapq.heappush(heap, (key + 2 * n2, n2))
        yield key, mult


def _chunk(pairs: Iterator[tuple[float, int]], size: int = 4096) -> Iterator[Block]:
    while True:
        chunk = list(itertools.islice(pairs, size))
        if not chunk:
            return
        vals, mults = zip(*chunk)
        yield np.asarray(vals, dtype=float), np.asarray(mults, dtype=np.int64)


# --- Heisenberg -------------------------------------------------------------


@dataclass(frozen=True)
class HeisenbergSpec:
    """Compact quotient ``Gamma \\ H`` with central lattice period ``4 pi^2 / q``."""

    q: int = 1
    validate_count: int = 50
    resolution: int = 64

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ValueError("q must be a positive integer")
        if self.validate_count < 1:
            raise ValueError("validate_count must be positive")
        if not 8 <= self.resolution <= MAX_RESOLUTION // 2:
            raise ValueError(f"resolution must lie in [8, {MAX_RESOLUTION // 2}]")

    @property
    def central_period(self) -> float:
        return 4 * math.pi**2 / self.q

    @property
    def weyl_constant(self) -> float:
        """Leading coefficient of ``N(L) ~ C L^2``, summing ``sum_l (2l+1)^-2 = pi^2/8``."""
        return math.pi**4 / (2 * self.q)


def heisenberg_levels(spec: HeisenbergSpec) -> Iterator[tuple[float, int]]:
    """Unvalidated merged spectrum: torus sector and oscillator sectors."""
    q = spec.q
    torus = iter(torus_stream(2))
    osc = ((1.0 + q * j / (2 * math.pi), mult) for j, mult in _oscillator_keys(q))
    return merge_pairs(torus, osc)


class UnvalidatedStreamError(RuntimeError):
    """Raised when enumeration passes the prefix checked against the oracle."""


class OracleResult(NamedTuple):
    values: np.ndarray  # converged eigenvalues, ascending, with multiplicity
    movement: np.ndarray  # relative change under resolution doubling
    excluded: int
    resolution: int


def _oscillator_galerkin(nu: float, half: float, resolution: int, top: float) -> np.ndarray:
    """Levels ``<= top`` of ``-d^2/dx^2 + nu^2 x^2`` on a periodic box ``[-half, half]``.

    Plane waves ``exp(i pi j x / half)``, ``|j| <= resolution``; the potential
    enters through the exact Fourier coefficients of the periodised ``x^2``.
    """
    j = np.arange(-resolution, resolution + 1)
    m = np.arange(0, 2 * resolution + 1)
    coef = np.empty(m.shape)
    coef[0] = half**2 / 3
    coef[1:] = 2 * half**2 * (-1.0) ** m[1:] / (np.pi**2 * m[1:] ** 2)
    H = nu**2 * linalg.toeplitz(coef)
    H[np.diag_indices_from(H)] += (np.pi * j / half) ** 2
    ev = linalg.eigh(H, eigvals_only=True, subset_by_value=(-np.inf, top))
    return np.sort(ev)


def _oracle_pass(spec: HeisenbergSpec, resolution: int, count: int) -> tuple[np.ndarray, float]:
    # n = 0 sector: functions periodic in x and y; Galerkin in x per y-mode k
    K = int(math.isqrt(4 * count)) + 2
    zero = []
    for k in range(-K, K + 1):
        ev = _oscillator_galerkin(0.0, math.pi, min(resolution, K + 1), np.inf) + k * k
        zero.extend(ev.tolist())
    zero = np.sort(1.0 + np.asarray(zero))
    top = zero[count - 1] + 1e-9
    levels = [(v, 1) for v in zero[zero <= top]]
    n = 1
    while True:
        nu = 2 * math.pi * n / spec.central_period
        if 1.0 + nu > top:
            break
        chains = round(2 * math.pi * nu)  # k-mode shift per x-period
        energy = top - 1.0
        half = math.sqrt(energy) / nu + 12.0 / math.sqrt(nu)
        for sign in (1, -1):
            ev = _oscillator_galerkin(sign * nu, half, resolution, energy)
            levels.extend((1.0 + e, chains) for e in ev)
        n += 1
    levels.sort()
    vals = np.repeat([v for v, _ in levels], [c for _, c in levels])
    return vals[:count], top


def discretization_oracle(spec: HeisenbergSpec, resolution: int, count: int) -> OracleResult:
    """Lowest ``count`` eigenvalues of ``P`` by sector-wise Fourier-Galerkin truncation.

    Each central Fourier sector is solved separately; the computation is
    repeated at twice the resolution and eigenvalues that move by more than
    ``1e-3`` relative are excluded.
    """
    if not 1 <= resolution <= MAX_RESOLUTION // 2:
        raise ValueError(f"resolution must lie in [1, {MAX_RESOLUTION // 2}]")
    if count < 1:
        raise ValueError("count must be positive")
    coarse, _ = _oracle_pass(spec, resolution, count)
    fine, _ = _oracle_pass(spec, 2 * resolution, count)
    movement = np.abs(fine - coarse) / np.abs(fine)
    ok = movement < 1e-3
    return OracleResult(fine[ok], movement, int(np.count_nonzero(~ok)), 2 * resolution)


class HeisenbergValidation(NamedTuple):
    passed: bool
    validated: int  # length of the matching prefix, counted with multiplicity
    max_rel_error: float


@lru_cache(maxsize=16)
def validate_heisenberg(spec: HeisenbergSpec, tol: float = 1e-3) -> HeisenbergValidation:
    """Compare the stream head against the discretization oracle."""
    oracle = discretization_oracle(spec, spec.resolution, spec.validate_count)
    if oracle.excluded:
        return HeisenbergValidation(False, 0, math.inf)
    head = np.repeat(*map(np.asarray, zip(*itertools.islice(heisenberg_levels(spec), spec.validate_count))))
    head = head[: spec.validate_count]
    rel = np.abs(head - oracle.values) / oracle.values
    bad = np.flatnonzero(rel > tol)
    validated = int(bad[0]) if bad.size else spec.validate_count
    return HeisenbergValidation(not bad.size, validated, float(rel.max()))


def heisenberg_stream(spec: HeisenbergSpec = HeisenbergSpec(), *, override: bool = False) -> SpectralStream:
    """Spectrum of ``1 - (X^2 + Y^2)`` on the Heisenberg nilmanifold, oracle-gated."""
    check = validate_heisenberg(spec)

    def blocks():
        pairs = heisenberg_levels(spec)
        if not (check.passed or override):
            pairs = _gate(pairs, check.validated)
        yield from _chunk(pairs)

    return SpectralStream(
        label=f"heisenberg(q={spec.q})",
        order_m=2.0,
        d_H=4,
        block_factory=blocks,
        volume_note="Gamma = {(2 pi a, 2 pi b, 4 pi^2 c / q)}, Haar volume 16 pi^4 / q",
        params=tuple(sorted(asdict(spec).items())),
    )


def _gate(pairs: Iterator[tuple[float, int]], limit: int) -> Iterator[tuple[float, int]]:
    seen = 0
    for value, mult in pairs:
        if seen + mult > limit:
            raise UnvalidatedStreamError(
                f"stream validated only for its first {limit} eigenvalues; pass override=True to continue"
            )
        seen += mult
        yield value, mult


# --- counting and Weyl fits -------------------------------------------------


def counting(s: SpectralStream, lam: float) -> int:
    """``N(lam)``: eigenvalues ``<= lam`` counted with multiplicity."""
    return int(counting_many(s, [lam])[0])


def counting_many(s: SpectralStream, lams: Sequence[float]) -> np.ndarray:
    """``N`` at several thresholds in one pass."""
    lams = np.asarray(lams, dtype=float)
    order = np.argsort(lams)
    out = np.zeros(len(lams), dtype=np.int64)
    if not len(lams):
        return out
    top = lams[order[-1]]
    acc = 0
    pending = list(order)
    for vals, mults in s.blocks():
        csum = acc + np.cumsum(mults)
        while pending and lams[pending[0]] < vals[-1]:
            i = pending.pop(0)
            idx = np.searchsorted(vals, lams[i], side="right")
            out[i] = csum[idx - 1] if idx else acc
        acc = int(csum[-1])
        if not pending or vals[-1] > top:
            break
    for i in pending:
        out[i] = acc
    return out


class WeylFit(NamedTuple):
    C: float
    exponent: float
    stderr: float
    lams: np.ndarray
    counts: np.ndarray
    C_nominal: float  # coefficient with the exponent pinned at d_H / m


def weyl_fit(s: SpectralStream, lam_range: tuple[float, float], per_octave: int = 2) -> WeylFit:
    """Least-squares fit of ``log N`` against ``log lam``.

    Sample points are ``lo * 2**(k / per_octave)`` up to ``hi``.
    """
    lo, hi = map(float, lam_range)
    if lo <= 0 or hi / lo < 100:
        raise ValueError("the fit range must span at least two decades")
    steps = int(math.floor(per_octave * math.log2(hi / lo) + 1e-9))
    lams = lo * 2.0 ** (np.arange(steps + 1) / per_octave)
    if len(lams) < 8:
        raise ValueError("need at least 8 fit points")
    counts = counting_many(s, lams)
    reg = stats.linregress(np.log(lams), np.log(counts))
    nominal = s.d_H / s.order_m
    c_nom = math.exp(np.mean(np.log(counts) - nominal * np.log(lams)))
    return WeylFit(math.exp(reg.intercept), reg.slope, reg.stderr, lams, counts, c_nom)


# --- binary cache -----------------------------------------------------------


def cache_dir() -> Path:
    return Path(os.environ.get("CARNOT_CACHE", Path.home() / ".cache" / "carnot_residue"))


def write_cache(s: SpectralStream, path: Path, lam_max: float) -> Path:
    """Write all eigenvalues ``<= lam_max`` as little-endian ``(f8, u4)`` records.

    A JSON sidecar ``<path>.json`` records the stream metadata and coverage.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    vals, mults = s.pairs_upto(lam_max)
    if mults.size and mults.max() >= 2**32:
        raise OverflowError("multiplicity does not fit in uint32")
    rec = np.empty(len(vals), dtype=RECORD_DTYPE)
    rec["eigenvalue"] = vals
    rec["multiplicity"] = mults
    tmp = path.with_suffix(path.suffix + ".tmp")
    rec.tofile(tmp)
    os.replace(tmp, path)
    meta = {
        "label": s.label,
        "order_m": s.order_m,
        "d_H": s.d_H,
        "params": [list(p) if isinstance(p, tuple) else p for p in s.params],
        "key": s.key,
        "lam_max": lam_max,
        "records": len(vals),
        "format": "little-endian records: float64 eigenvalue, uint32 multiplicity",
    }
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2))
    return path


def read_cache(path: Path, fallback: SpectralStream | None = None) -> SpectralStream:
    """Stream backed by a cache file; continues from ``fallback`` past the covered range."""
    path = Path(path)
    meta = json.loads(Path(str(path) + ".json").read_text())
    rec = np.fromfile(path, dtype=RECORD_DTYPE)
    lam_max = float(meta["lam_max"])

    def blocks():
        for i in range(0, len(rec), 1 << 16):
            part = rec[i : i + (1 << 16)]
            yield part["eigenvalue"].astype(float), part["multiplicity"].astype(np.int64)
        if fallback is None:
            return
        for vals, mults in fallback.blocks():
            keep = vals > lam_max
            if keep.any():
                yield vals[keep], mults[keep]

    params = tuple(tuple(p) if isinstance(p, list) else p for p in meta["params"])
    return SpectralStream(meta["label"], meta["order_m"], meta["d_H"], blocks, params=params)


def cached_stream(s: SpectralStream, lam_max: float, directory: Path | None = None) -> SpectralStream:
    """Load ``s`` from the cache, (re)building the file if it covers less than ``lam_max``."""
    directory = Path(directory) if directory is not None else cache_dir()
    path = directory / f"{s.key}.bin"
    meta_path = Path(str(path) + ".json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        if meta.get("key") == s.key and float(meta["lam_max"]) >= lam_max:
            return read_cache(path, fallback=s)
    write_cache(s, path, lam_max)
    return read_cache(path, fallback=s)
