"""Graded nilpotent Lie algebras: dilations, homogeneous dimension, group law.

Structure constants are stored densely as ``c[i, j, k]`` with
``[e_i, e_j] = sum_k c[i, j, k] e_k`` (0-based in Python, 1-based in text
files). An algebra is *exact* when its constants are integers or
:class:`fractions.Fraction`; then brackets, dilations and the BCH product are
computed in rational arithmetic.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "GradedLieAlgebra",
    "FiltrationReport",
    "homogeneous_dimension",
    "dilate",
    "dilation_determinant",
    "bch_multiply",
    "bch_series",
    "bch_word_coefficients",
    "verify_filtration",
    "abelian",
    "heisenberg",
    "engel",
    "load_algebra",
    "dump_algebra",
    "MAX_BCH_ORDER",
]

MAX_BCH_ORDER = 6
FLOAT_TOL = 1e-12


def _is_exact_scalar(x) -> bool:
    return isinstance(x, Rational) and not isinstance(x, bool)


class GradedLieAlgebra:
    """A graded Lie algebra in a basis adapted to the grading.

    Construction does not enforce the Lie axioms so that malformed data can
    still be inspected with :func:`verify_filtration`; the shipped presets are
    valid.
    """

    def __init__(self, weights: Sequence[int], structure_constants, *, name: str = ""):
        weights = tuple(int(w) for w in weights)
        if not weights:
            raise ValueError("algebra must have positive dimension")
        if any(w < 1 for w in weights):
            raise ValueError("grading weights must be positive integers")
        if list(weights) != sorted(weights):
            raise ValueError("basis must be ordered by nondecreasing weight")
        dim = len(weights)
        c = np.asarray(structure_constants, dtype=object)
        if c.shape != (dim, dim, dim):
            raise ValueError(f"structure constants must have shape {(dim, dim, dim)}, got {c.shape}")
        exact = all(_is_exact_scalar(v) for v in c.flat)
        if exact:
            c = np.vectorize(Fraction, otypes=[object])(c) if c.size else c
        else:
            c = c.astype(float)
        c.flags.writeable = False
        self._weights = weights
        self._c = c
        self._exact = exact
        self.name = name
        self._nonzero = tuple(
            (i, j, k, c[i, j, k]) for i, j, k in itertools.product(range(dim), repeat=3) if c[i, j, k] != 0
        )

    @property
    def dim(self) -> int:
        return len(self._weights)

    @property
    def weights(self) -> tuple[int, ...]:
        return self._weights

    @property
    def depth(self) -> int:
        return max(self._weights)

    @property
    def structure_constants(self) -> np.ndarray:
        return self._c

    @property
    def exact(self) -> bool:
        return self._exact

    def as_float(self) -> GradedLieAlgebra:
        return GradedLieAlgebra(self._weights, self._c.astype(float), name=self.name)

    def zero(self) -> np.ndarray:
        if self._exact:
            return np.array([Fraction(0)] * self.dim, dtype=object)
        return np.zeros(self.dim)

    def vector(self, values) -> np.ndarray:
        """Coerce ``values`` to this algebra's coordinate type."""
        if self._exact and all(_is_exact_scalar(v) for v in values):
            out = np.array([Fraction(v) for v in values], dtype=object)
        else:
            out = np.asarray(values, dtype=float)
        if out.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}")
        return out

    def bracket(self, x, y) -> np.ndarray:
        x = np.asarray(x)
        y = np.asarray(y)
        exact = x.dtype == object or y.dtype == object
        out = self.zero() if exact else np.zeros(self.dim)
        for i, j, k, c in self._nonzero:
            xi, yj = x[i], y[j]
            if xi and yj:
                out[k] = out[k] + c * xi * yj
        return out

    def __repr__(self) -> str:
        label = self.name or "GradedLieAlgebra"
        return f"<{label} dim={self.dim} weights={self._weights} exact={self._exact}>"


def homogeneous_dimension(g: GradedLieAlgebra) -> int:
    return sum(g.weights)


def dilate(g: GradedLieAlgebra, t, v) -> np.ndarray:
    """Apply the dilation ``delta_t``: component ``i`` is scaled by ``t**w_i``."""
    if t <= 0:
        raise ValueError("dilation parameter must be positive")
    v = np.asarray(v)
    if v.shape[-1] != g.dim:
        raise ValueError(f"expected vectors of length {g.dim}")
    if _is_exact_scalar(t) and v.dtype == object:
        t = Fraction(t)
        return np.array([t**w * vi for w, vi in zip(g.weights, v)], dtype=object)
    scale = float(t) ** np.asarray(g.weights, dtype=float)
    return v.astype(float) * scale


def dilation_determinant(g: GradedLieAlgebra, t):
    """Determinant of ``delta_t`` computed from the diagonal (exact for rational ``t``)."""
    if t <= 0:
        raise ValueError("dilation parameter must be positive")
    if _is_exact_scalar(t):
        t = Fraction(t)
        return math.prod((t**w for w in g.weights), start=Fraction(1))
    return float(np.prod(float(t) ** np.asarray(g.weights, dtype=float)))


@lru_cache(maxsize=None)
def bch_word_coefficients(order: int) -> dict[str, Fraction]:
    """Coefficients of right-nested brackets in Dynkin's form of the BCH series.

    ``log(exp X exp Y) = sum_w coef[w] * [w_1, [w_2, ... [w_{L-1}, w_L]]]`` over
    words ``w`` in ``{"X", "Y"}`` of length at most ``order``. Words whose
    nested bracket vanishes identically (last two letters equal) are dropped.
    """
    if not 1 <= order <= MAX_BCH_ORDER:
        raise ValueError(f"BCH order must be in 1..{MAX_BCH_ORDER}")
    coef: dict[str, Fraction] = {}
    blocks = [(r, s) for r in range(order + 1) for s in range(order + 1) if 0 < r + s <= order]

    def extend(word: str, n: int, denom: int) -> None:
        if n:
            L = len(word)
            term = Fraction((-1) ** (n - 1), n * L * denom)
            coef[word] = coef.get(word, Fraction(0)) + term
        for r, s in blocks:
            if len(word) + r + s <= order:
                extend(word + "X" * r + "Y" * s, n + 1, denom * math.factorial(r) * math.factorial(s))

    extend("", 0, 1)
    return {
        w: c for w, c in sorted(coef.items()) if c != 0 and (len(w) == 1 or w[-1] != w[-2])
    }


def bch_series(x, y, bracket: Callable, order: int):
    """Truncated BCH product of ``x`` and ``y`` for an arbitrary bracket."""
    coef = bch_word_coefficients(order)
    nested: dict[str, object] = {"X": x, "Y": y}

    def nest(word: str):
        if word not in nested:
            head = x if word[0] == "X" else y
            nested[word] = bracket(head, nest(word[1:]))
        return nested[word]

    exact = getattr(x, "dtype", None) == object
    total = None
    for word in sorted(coef, key=len):
        term = nest(word) * (coef[word] if exact else float(coef[word]))
        total = term if total is None else total + term
    return total


def bch_multiply(g: GradedLieAlgebra, x, y) -> np.ndarray:
    """Group product in exponential coordinates (exact for nilpotent ``g``)."""
    if g.depth > MAX_BCH_ORDER:
        raise ValueError(f"BCH table covers depth <= {MAX_BCH_ORDER}, algebra has depth {g.depth}")
    x = np.asarray(x)
    y = np.asarray(y)
    if x.dtype != object and y.dtype != object:
        x = x.astype(float)
        y = y.astype(float)
    elif x.dtype != object or y.dtype != object:
        x = x.astype(object) if x.dtype == object else x.astype(float)
        y = y.astype(object) if y.dtype == object else y.astype(float)
    # brackets of more than depth elements vanish by the grading
    if g.depth == 1:
        return x + y
    return bch_series(x, y, g.bracket, g.depth)


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    violation: tuple[int, ...] | None = None
    detail: str = ""


@dataclass(frozen=True)
class FiltrationReport:
    antisymmetry: CheckResult
    jacobi: CheckResult
    grading: CheckResult
    exact: bool = field(default=True)

    @property
    def passed(self) -> bool:
        return self.antisymmetry.passed and self.jacobi.passed and self.grading.passed

    def summary(self) -> str:
        parts = []
        for name in ("antisymmetry", "jacobi", "grading"):
            res = getattr(self, name)
            status = "pass" if res.passed else f"FAIL at {res.violation} ({res.detail})"
            parts.append(f"{name}: {status}")
        return "; ".join(parts)


def verify_filtration(g: GradedLieAlgebra, tol: float = FLOAT_TOL) -> FiltrationReport:
    """Check antisymmetry, Jacobi and grading compatibility.

    Violating index triples are reported 0-based. Exact algebras are checked
    exactly; float algebras to absolute tolerance ``tol``.
    """
    c = g.structure_constants
    d = g.dim
    bad = (lambda v: v != 0) if g.exact else (lambda v: abs(v) > tol)

    antisym = CheckResult(True)
    for i, j, k in itertools.product(range(d), repeat=3):
        if bad(c[i, j, k] + c[j, i, k]):
            antisym = CheckResult(False, (i, j, k), f"c[i,j,k] + c[j,i,k] = {c[i, j, k] + c[j, i, k]}")
            break

    jacobi = CheckResult(True)
    basis = [g.vector([1 if a == b else 0 for b in range(d)]) for a in range(d)]
    for i, j, l in itertools.product(range(d), repeat=3):
        ei, ej, el = basis[i], basis[j], basis[l]
        total = (
            g.bracket(ei, g.bracket(ej, el))
            + g.bracket(ej, g.bracket(el, ei))
            + g.bracket(el, g.bracket(ei, ej))
        )
        hits = [k for k in range(d) if bad(total[k])]
        if hits:
            jacobi = CheckResult(False, (i, j, l), f"component {hits[0]} = {total[hits[0]]}")
            break

    grading = CheckResult(True)
    w = g.weights
    for i, j, k in itertools.product(range(d), repeat=3):
        if bad(c[i, j, k]) and w[k] != w[i] + w[j]:
            grading = CheckResult(
                False, (i, j, k), f"bracket of weights {w[i]}+{w[j]} lands in weight {w[k]}"
            )
            break

    return FiltrationReport(antisym, jacobi, grading, exact=g.exact)


def _empty_constants(dim: int) -> np.ndarray:
    return np.full((dim, dim, dim), Fraction(0), dtype=object)


def _set_bracket(c: np.ndarray, i: int, j: int, k: int, value) -> None:
    c[i, j, k] = value
    c[j, i, k] = -value


def abelian(d: int) -> GradedLieAlgebra:
    """Trivial filtration: all weights 1, all brackets zero."""
    return GradedLieAlgebra([1] * d, _empty_constants(d), name=f"abelian({d})")


def heisenberg(n: int = 1) -> GradedLieAlgebra:
    """Heisenberg algebra h_n with basis X_1..X_n, Y_1..Y_n, Z and [X_i, Y_i] = Z."""
    if n < 1:
        raise ValueError("n must be >= 1")
    dim = 2 * n + 1
    c = _empty_constants(dim)
    for i in range(n):
        _set_bracket(c, i, n + i, dim - 1, Fraction(1))
    return GradedLieAlgebra([1] * (2 * n) + [2], c, name=f"heisenberg({n})")


def engel() -> GradedLieAlgebra:
    """Engel algebra: [e1, e2] = e3, [e1, e3] = e4, weights (1, 1, 2, 3)."""
    c = _empty_constants(4)
    _set_bracket(c, 0, 1, 2, Fraction(1))
    _set_bracket(c, 0, 2, 3, Fraction(1))
    return GradedLieAlgebra([1, 1, 2, 3], c, name="engel")


def load_algebra(path: str | Path, *, exact: bool = True) -> GradedLieAlgebra:
    """Read an algebra definition.

    Format (``#`` starts a comment)::

        dim 3
        weights 1 1 2
        1 2 3 1        # [e1, e2] = 1 * e3   (indices are 1-based)

    A bracket line without its antisymmetric partner also sets
    ``c[j][i][k] = -value``; an explicit partner line overrides that.
    """
    dim = None
    weights = None
    entries: list[tuple[int, int, int, Fraction]] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "dim":
            dim = int(parts[1])
        elif parts[0] == "weights":
            weights = [int(p) for p in parts[1:]]
        elif len(parts) == 4:
            i, j, k = (int(p) - 1 for p in parts[:3])
            entries.append((i, j, k, Fraction(parts[3])))
        else:
            raise ValueError(f"{path}:{lineno}: cannot parse {raw!r}")
    if dim is None or weights is None:
        raise ValueError(f"{path}: missing 'dim' or 'weights' header")
    if len(weights) != dim:
        raise ValueError(f"{path}: {len(weights)} weights given for dim {dim}")
    c = _empty_constants(dim)
    explicit = {(i, j, k) for i, j, k, _ in entries}
    for i, j, k, v in entries:
        if not all(0 <= a < dim for a in (i, j, k)):
            raise ValueError(f"{path}: index out of range in bracket {(i + 1, j + 1, k + 1)}")
        c[i, j, k] = v
        if (j, i, k) not in explicit:
            c[j, i, k] = -v
    g = GradedLieAlgebra(weights, c, name=Path(path).stem)
    return g if exact else g.as_float()


def dump_algebra(g: GradedLieAlgebra, path: str | Path) -> None:
    lines = [f"dim {g.dim}", "weights " + " ".join(str(w) for w in g.weights)]
    for i, j, k, v in g._nonzero:
        lines.append(f"{i + 1} {j + 1} {k + 1} {v}")
    Path(path).write_text("\n".join(lines) + "\n")
