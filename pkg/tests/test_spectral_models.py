import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnot_residue import spectral_models as sm


def _brute_counts(d, lams):
    """Count k in Z^d with 1 + |k|^2 <= lam by a dense lattice sweep."""
    R = int(math.isqrt(int(max(lams)))) + 1
    axis = np.arange(-R, R + 1)
    sq = axis**2
    n = sq
    for _ in range(d - 1):
        n = np.add.outer(n, sq).ravel()
    n = np.sort(n)
    return [int(np.searchsorted(n, lam - 1, side="right")) for lam in lams]


def test_torus_heads():
    assert torus_head(2, 5) == [(1.0, 1), (2.0, 4), (3.0, 4), (5.0, 4), (6.0, 8)]
    head = torus_head(1, 6)
    assert head[0] == (1.0, 1)
    assert all(v == 1 + j * j and m == 2 for j, (v, m) in enumerate(head[1:], 1))


def torus_head(d, n):
    return sm.torus_stream(d).head(n)


def test_torus_counts_match_brute_force():
    lams = [1, 2, 10, 100, 777, 3000, 10**4]
    for d in (1, 2, 3):
        s = sm.torus_stream(d)
        assert list(sm.counting_many(s, lams)) == _brute_counts(d, lams)
    assert sm.counting(sm.torus_stream(2), 2) == 5
    assert sm.counting(sm.torus_stream(2), 0.5) == 0


def test_torus_higher_dimensions_small_counts():
    lams = [5, 30, 120]
    for d in (4, 5):
        assert list(sm.counting_many(sm.torus_stream(d), lams)) == _brute_counts(d, lams)


def test_torus_stream_invariants():
    s = sm.torus_stream(3)
    vals, mults = s.pairs_upto(2e5)
    assert vals[0] == 1.0
    assert np.all(np.diff(vals) > 0)
    assert np.all(mults >= 1)
    # deterministic repeated enumeration
    v2, m2 = s.pairs_upto(2e5)
    assert np.array_equal(vals, v2) and np.array_equal(mults, m2)
    with pytest.raises(ValueError):
        sm.torus_stream(6)


def test_counting_monotone():
    s = sm.torus_stream(2)
    lams = np.sort(np.random.default_rng(0).uniform(0, 5000, 50))
    assert np.all(np.diff(sm.counting_many(s, lams)) >= 0)


def test_expanded_cuts_inside_a_run():
    e = sm.torus_stream(2).expanded(7)
    assert list(e) == [1, 2, 2, 2, 2, 3, 3]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.lists(st.integers(1, 10**4), min_size=0, max_size=200), min_size=1, max_size=6))
def test_merge_equals_sorted_concatenation(raw):
    streams = [sorted((float(v), 1 + v % 3) for v in set(r)) for r in raw]
    merged = list(sm.merge_pairs(*map(iter, streams)))
    expected = {}
    for v, m in itertools.chain(*streams):
        expected[v] = expected.get(v, 0) + m
    assert merged == sorted(expected.items())


def test_merge_large_prefix():
    rng = np.random.default_rng(1)
    streams = [np.unique(rng.integers(1, 10**6, 25_000)).astype(float) for _ in range(4)]
    merged = list(itertools.islice(sm.merge_pairs(*[((v, 1) for v in s) for s in streams]), 100_000))
    allv, counts = np.unique(np.concatenate(streams), return_counts=True)
    assert [v for v, _ in merged] == list(allv[: len(merged)])
    assert [m for _, m in merged] == list(counts[: len(merged)])


# --- Heisenberg -------------------------------------------------------------


def test_oscillator_keys_match_divisor_formula():
    # multiplicity of key j is 2 q * sum over n | j with j / n odd of n
    q = 2
    keys = list(itertools.islice(sm._oscillator_keys(q), 300))
    assert [k for k, _ in keys] == list(range(1, 301))
    for j, mult in keys:
        expected = 2 * q * sum(n for n in range(1, j + 1) if j % n == 0 and (j // n) % 2 == 1)
        assert mult == expected


def test_heisenberg_head_and_lowest_eigenvalue():
    s = sm.heisenberg_stream()
    head = s.head(3)
    assert head[0] == (1.0, 1)
    assert head[1][0] == pytest.approx(1 + 1 / (2 * math.pi), rel=1e-15)
    assert head[1][1] == 2


def test_oracle_count_one():
    r = sm.discretization_oracle(sm.HeisenbergSpec(), 16, 1)
    assert r.values[0] == pytest.approx(1.0, abs=1e-10)


def test_oracle_torus_sector_reproduces_plane_waves():
    # the n = 0 machinery alone: -d_x^2 on a 2 pi box plus k^2
    R = 12
    base = sm._oscillator_galerkin(0.0, math.pi, R, np.inf)
    levels = np.sort(np.add.outer(base, np.arange(-R, R + 1) ** 2).ravel()) + 1.0
    exact = np.sort(1.0 + np.add.outer(np.arange(-R, R + 1) ** 2, np.arange(-R, R + 1) ** 2).ravel())
    np.testing.assert_allclose(levels[:60], exact[:60], rtol=0, atol=1e-10)


def test_oracle_oscillator_levels():
    nu = 1.7
    ev = sm._oscillator_galerkin(nu, 10.0, 96, 40.0)
    expected = nu * (2 * np.arange(len(ev)) + 1)
    np.testing.assert_allclose(ev[:8], expected[:8], rtol=1e-9)


@pytest.mark.parametrize("q", [1, 3])
def test_heisenberg_matches_oracle(q):
    spec = sm.HeisenbergSpec(q=q, validate_count=50)
    oracle = sm.discretization_oracle(spec, spec.resolution, 50)
    assert oracle.excluded == 0
    assert oracle.movement.max() < 1e-3
    head = sm.heisenberg_stream(spec).expanded(50)
    np.testing.assert_allclose(head, oracle.values, rtol=1e-10)
    v = sm.validate_heisenberg(spec)
    assert v.passed and v.validated == 50


def test_gate_refuses_unvalidated_stream(monkeypatch):
    spec = sm.HeisenbergSpec(q=1, validate_count=20, resolution=32)
    wrong = sm.heisenberg_levels

    def shifted(s):
        return ((v * (1.0 if i < 2 else 1.01), m) for i, (v, m) in enumerate(wrong(s)))

    monkeypatch.setattr(sm, "heisenberg_levels", shifted)
    sm.validate_heisenberg.cache_clear()
    try:
        check = sm.validate_heisenberg(spec)
        assert not check.passed
        s = sm.heisenberg_stream(spec)
        with pytest.raises(sm.UnvalidatedStreamError):
            s.pairs_upto(1e3)
        assert len(sm.heisenberg_stream(spec, override=True).pairs_upto(1e3)[0]) > 20
    finally:
        sm.validate_heisenberg.cache_clear()


def test_weyl_fits():
    t2 = sm.weyl_fit(sm.torus_stream(2), (1e2, 1e4))
    assert t2.exponent == pytest.approx(1.0, abs=0.02)
    assert t2.C_nominal == pytest.approx(math.pi, rel=0.02)
    t4 = sm.weyl_fit(sm.torus_stream(4), (1e2, 1e4))
    assert t4.exponent == pytest.approx(2.0, abs=0.02)
    spec = sm.HeisenbergSpec()
    hf = sm.weyl_fit(sm.heisenberg_stream(spec), (1e2, 1e4))
    assert hf.exponent == pytest.approx(2.0, abs=0.02)
    assert hf.C_nominal == pytest.approx(spec.weyl_constant, rel=0.02)
    with pytest.raises(ValueError):
        sm.weyl_fit(sm.torus_stream(2), (1e2, 5e3))


def test_sequence_stream():
    s = sm.sequence_stream("integers", 1.0, 1, lambda n: n + 1.0)
    assert s.head(3) == [(1.0, 1), (2.0, 1), (3.0, 1)]
    assert sm.counting(s, 1000.5) == 1000


def test_cache_roundtrip(tmp_path, monkeypatch):
    s = sm.torus_stream(2)
    path = sm.write_cache(s, tmp_path / "t2.bin", 500.0)
    raw = np.fromfile(path, dtype=sm.RECORD_DTYPE)
    assert raw.dtype.itemsize == 12
    back = sm.read_cache(path, fallback=s)
    v1, m1 = s.pairs_upto(2000.0)
    v2, m2 = back.pairs_upto(2000.0)
    assert np.array_equal(v1, v2) and np.array_equal(m1, m2)
    monkeypatch.setenv("CARNOT_CACHE", str(tmp_path / "env"))
    assert sm.cache_dir() == tmp_path / "env"
    c = sm.cached_stream(s, 300.0)
    assert (tmp_path / "env" / f"{s.key}.bin").exists()
    assert sm.counting(c, 1000.0) == sm.counting(s, 1000.0)


def _magnetic_lattice_levels(nu, L, k):
    """Lowest levels of -d_x^2 - (d_y + i nu x)^2 on the twisted torus, Peierls-discretised."""
    from scipy import sparse
    from scipy.sparse.linalg import eigsh

    a = 2 * math.pi / L
    j, kk = np.meshgrid(np.arange(L), np.arange(L), indexing="ij")
    here = (j * L + kk).ravel()
    up = (j * L + (kk + 1) % L).ravel()
    right = (((j + 1) % L) * L + kk).ravel()
    y_phase = np.exp(-1j * nu * (j * a) * a).ravel()
    x_phase = np.where(j == L - 1, np.exp(1j * nu * 2 * math.pi * kk * a), 1.0).ravel()
    T = sparse.csr_matrix(
        (np.concatenate([y_phase, x_phase]), (np.concatenate([here, here]), np.concatenate([up, right]))),
        shape=(L * L, L * L),
    )
    H = (4 * sparse.identity(L * L) - T - T.getH()) / a**2
    return np.sort(eigsh(H, k=k, which="SA", return_eigenvectors=False))


@pytest.mark.parametrize("q,n", [(1, 1), (1, 3), (2, 1), (2, 2)])
def test_landau_degeneracy_independent_lattice(q, n):
    # independent route to the sector multiplicity q|n| and levels nu (2l + 1)
    nu = q * n / (2 * math.pi)
    deg = q * n
    ev = _magnetic_lattice_levels(nu, 48, 3 * deg)
    for level in range(3):
        cluster = ev[level * deg : (level + 1) * deg]
        np.testing.assert_allclose(cluster, nu * (2 * level + 1), rtol=1e-2)
    # the next level starts a gap of about 2 nu above the cluster
    nxt = _magnetic_lattice_levels(nu, 48, deg + 1)
    assert nxt[-1] > 2 * nu
