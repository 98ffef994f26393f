import math

import mpmath
import numpy as np
import pytest
from scipy import special

from carnot_residue import fibred_model as fm
from carnot_residue import graded_lie as gl
from carnot_residue import kernel_calculus as kc

HEIS = gl.heisenberg()
D_H = 4


def heis_model(name="gauss_bump", **kw):
    kw.setdefault("h_profile", fm.exponential(-1.0))
    return fm.builtin_model(HEIS, name, **kw)


# --- reconstruction ---------------------------------------------------------


def test_reconstruction_matches_fixed_gauss_legendre():
    # abelian d=1, k(z, h) = bump(z), m = -2: P(z) = int_0^1 lambda^(1 - 1) bump(z / lambda) dlambda
    bump = fm.gauss_bump(1.0)
    k = fm.builtin_model(gl.abelian(1), "gauss_bump", h_profile=fm.polynomial([1.0]))
    P = kc.reconstruct_kernel(k, -2.0)
    z = 0.5
    # bump(z / lambda) vanishes for lambda <= z; composite Gauss-Legendre on [z, 1]
    x, w = special.roots_legendre(40)
    edges = np.linspace(z, 1.0, 41)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        lam = 0.5 * (b - a) * x + 0.5 * (a + b)
        total += 0.5 * (b - a) * np.sum(w * bump(np.array([[z]]) / lam[:, None]))
    sample = P.evaluate([z], 0.0)
    assert not sample.singular
    assert sample.value == pytest.approx(total, rel=1e-10, abs=1e-14)


def test_reconstruction_linearity_and_zero():
    k1 = heis_model(radius=1.2)
    k2 = heis_model("poly_bump", degree=5, h_profile=fm.polynomial([1.0, -0.3]))
    rng = np.random.default_rng(0)
    z = rng.uniform(-0.6, 0.6, (6, 3))
    h = rng.uniform(0, 0.5, 6)
    P12 = kc.reconstruct_kernel(k1 + k2, -2.5)(z, h)
    P1 = kc.reconstruct_kernel(k1, -2.5)(z, h)
    P2 = kc.reconstruct_kernel(k2, -2.5)(z, h)
    np.testing.assert_allclose(P12, P1 + P2, rtol=1e-10, atol=1e-14)
    assert np.all(kc.reconstruct_kernel(0.0 * k1, -2.5)(z, h) == 0.0)


def test_reconstruction_origin_singularity_is_flagged():
    k = heis_model()
    assert kc.reconstruct_kernel(k, -2.0).evaluate(np.zeros(3), 0.0).singular
    s = kc.reconstruct_kernel(k, -5.0).evaluate(np.zeros(3), 0.3)
    assert not s.singular
    # at z = 0 the integral is the direct local trace
    ref = kc.local_trace_direct(kc.TraceProfile.from_model(k), -5.0, 0.3, D_H).value
    assert s.value == pytest.approx(ref, rel=1e-10)
    with pytest.raises(ValueError):
        kc.reconstruct_kernel(k, 0.5)


def test_kernel_equation_on_reconstruction():
    # (L_Z - m) P = k away from the origin, by central differences of the zoom family
    k = heis_model()
    m = -1.5
    P = kc.reconstruct_kernel(k, m)
    z = np.array([0.4, -0.3, 0.2])
    h = 0.3
    w = np.asarray(HEIS.weights, float)
    eps = 1e-3

    def zoomed(lam):
        return lam ** (-D_H) * P.evaluate(z * lam ** (-w), lam * h).value

    lz = (zoomed(1 + eps) - zoomed(1 - eps)) / (2 * eps)
    assert lz - m * P.evaluate(z, h).value == pytest.approx(float(k(z, h)), abs=1e-5)


def test_cocycle_integral_representation():
    # P - t^-m (alpha_t)_* P = int_t^1 (alpha_lam)_* k dlam / lam^(m+1) = -cocycle(k, m, t)
    k = heis_model(radius=1.1)
    m = -1.5
    P = kc.reconstruct_kernel(k, m)
    w = np.asarray(HEIS.weights, float)
    rng = np.random.default_rng(1)
    for t in (0.25, 0.5):
        f = kc.cocycle(k, m, t)
        for _ in range(3):
            z = rng.uniform(-0.5, 0.5, 3)
            h = rng.uniform(0, 0.5)
            pushed = t ** (-D_H) * P.evaluate(z * t ** (-w), t * h).value
            lhs = P.evaluate(z, h).value - t ** (-m) * pushed
            assert lhs == pytest.approx(-float(f(z, h)), rel=1e-8, abs=1e-12)


# --- cocycles ---------------------------------------------------------------


def test_cocycle_at_one_vanishes():
    assert kc.cocycle(heis_model(), -4.0, 1.0)(np.zeros(3), 0.2) == 0.0


def test_cocycle_identity_pointwise():
    k = heis_model()
    rng = np.random.default_rng(2)
    for m in (-4.0, -2.5):
        for _ in range(4):
            lam, mu = rng.uniform(0.5, 3.0, 2)
            z = rng.uniform(-0.4, 0.4, (1, 3))
            h = rng.uniform(-0.3, 0.3, 1)
            lhs = kc.cocycle(k, m, lam * mu)(z, h)
            rhs = kc.cocycle(k, m, lam)(z, h) + lam ** (-m) * fm.zoom_pushforward(kc.cocycle(k, m, mu), lam)(z, h)
            np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-14)


def test_cocycle_identity_traced():
    k = heis_model("cos_window")
    rng = np.random.default_rng(3)
    for _ in range(20):
        lam, mu = rng.uniform(0.2, 5.0, 2)
        h = rng.uniform(-0.5, 0.5)
        lhs = fm.local_trace(kc.cocycle(k, -D_H, lam * mu), h)
        rhs = fm.local_trace(kc.cocycle(k, -D_H, lam), h) + fm.local_trace(kc.cocycle(k, -D_H, mu), lam * h)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-14)


def test_cocycle_of_trace_free_kernel_vanishes_at_origin():
    # bump vanishing at the origin: tr_0 k = 0
    g = fm.gauss_bump(1.0)
    k = fm.FibredDensityModel(HEIS, lambda z, h: np.sum(z * z, axis=-1) * g(z), support_radius=1.0, h_max=10.0)
    for lam in (2.0, 4.0, 10.0):
        assert abs(fm.local_trace(kc.cocycle(k, -D_H, lam), 0.0)) < 1e-14
    r = kc.residue_from_cocycle(k, [2.0, 4.0, 10.0])
    assert abs(r.value) < 1e-14


# --- local traces -----------------------------------------------------------


def test_local_trace_direct_closed_forms():
    one = kc.TraceProfile.constant(1.0)
    assert kc.local_trace_direct(one, -D_H - 1.0, 0.7, D_H).value == pytest.approx(1.0, rel=1e-13)
    for a in (0.3, 2.0, 7.5):
        assert kc.local_trace_direct(one, -D_H - a, 0.7, D_H).value == pytest.approx(1 / a, rel=1e-10)
    # e^{-h lam} against lam^(a-1): lower incomplete gamma
    k = kc.TraceProfile.exponential(-1.0)
    h, a = 1.3, 2.5
    ref = special.gammainc(a, h) * special.gamma(a) / h**a
    assert kc.local_trace_direct(k, -D_H - a, h, D_H).value == pytest.approx(ref, rel=1e-11)
    with pytest.raises(ValueError):
        kc.local_trace_direct(one, -D_H + 0.1, 1.0, D_H)


def test_extended_constant_profile():
    one = kc.TraceProfile.constant(1.0)
    for m in (-D_H - 0.5, -D_H + 0.5, -D_H + 1.5 + 0.3j):
        for n in (3, 4):
            assert kc.local_trace_extended(one, m, 0.8, D_H, n) == pytest.approx(1 / (-m - D_H), rel=1e-12)


def test_extended_matches_direct_complex_order():
    k = kc.TraceProfile.exponential(-1.0)
    m = -D_H - 0.7 + 1.3j
    ref = kc.local_trace_direct(k, m, 1.0, D_H).value
    for n in (1, 2, 3):
        assert abs(kc.local_trace_extended(k, m, 1.0, D_H, n) - ref) <= 1e-9 * abs(ref)


def test_extended_n_independence_beyond_first_pole():
    k = kc.TraceProfile.exponential(-1.0)
    for m in (-D_H + 0.5, -D_H + 1.5, -D_H + 0.25 - 0.5j):
        n0 = math.floor(np.real(m) + D_H) + 1
        vals = [kc.local_trace_extended(k, m, 1.0, D_H, n) for n in range(n0, n0 + 3)]
        assert max(abs(v - vals[0]) for v in vals) <= 1e-10 * abs(vals[0])


def test_extended_with_finite_difference_profile():
    exact = kc.TraceProfile.exponential(-1.0)
    fd = kc.TraceProfile(lambda h: math.exp(-h))
    assert not fd.analytic
    for n in (1, 2, 3):
        assert fd.derivative(0.0, n) == pytest.approx(exact.derivative(0.0, n), rel=1e-6)
    a = kc.local_trace_extended(exact, -D_H + 0.5, 1.0, D_H, 2)
    b = kc.local_trace_extended(fd, -D_H + 0.5, 1.0, D_H, 2)
    assert b == pytest.approx(a, rel=1e-6)


def test_extended_domain_and_pole_errors():
    k = kc.TraceProfile.exponential(-1.0)
    with pytest.raises(ValueError):
        kc.local_trace_extended(k, -D_H + 2.5, 1.0, D_H, 2)
    with pytest.raises(ValueError):
        kc.local_trace_extended(k, -D_H - 1.0, 1.0, D_H, 0)
    with pytest.raises(kc.SimplePoleError) as info:
        kc.local_trace_extended(k, -D_H + 1 + 1e-8, 0.5, D_H, 3)
    assert info.value.index == 1
    assert info.value.residue == pytest.approx(-0.5 * -1.0, rel=1e-12)


def test_incomplete_beta_against_mpmath():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(150):
        x = float(rng.uniform(0.01, 0.99))
        alpha = int(rng.integers(1, 7))
        beta = complex(rng.uniform(-5.9, 5.9), rng.uniform(-2, 2))
        ref = complex(mpmath.betainc(alpha, beta, 0, x))
        got = kc.incomplete_beta(x, alpha, beta)
        worst = max(worst, abs(got - ref) / abs(ref))
    assert worst < 1e-12


def test_incomplete_beta_closed_forms():
    for x in (0.0, 0.3, 0.9, 1.0):
        assert kc.incomplete_beta(x, 1, 1) == pytest.approx(x, abs=1e-15)
    assert kc.incomplete_beta(1.0, 2, 3) == pytest.approx(1 / 12, rel=1e-13)
    assert kc.incomplete_beta(0.0, 2.5, -1.5) == 0
    assert kc.incomplete_beta(1.0, 3, 2.5) == pytest.approx(special.beta(3, 2.5), rel=1e-12)
    with pytest.raises(ValueError):
        kc.incomplete_beta(1.2, 1, 1)
    with pytest.raises(ValueError):
        kc.incomplete_beta(0.5, 0.0, 1)
    with pytest.raises(ValueError):
        kc.incomplete_beta(1.0, 1, -0.5)


# --- residues ---------------------------------------------------------------


def test_pole_residue_examples():
    k = kc.TraceProfile.exponential(-1.0)
    for h in (0.0, 0.3, 1.0):
        r = kc.trace_residue_at_pole(k, D_H, h, -1.0)
        assert r.converged
        assert r.value == pytest.approx(1.0, abs=1e-4)
    half = kc.trace_residue_at_pole(k, D_H, 0.3, -2.0)
    assert half.value == pytest.approx(0.5, abs=1e-4)
    zero = kc.trace_residue_at_pole(kc.TraceProfile.constant(0.0), D_H, 0.3, -1.0)
    assert zero.value == 0.0
    with pytest.raises(ValueError):
        kc.trace_residue_at_pole(k, D_H, 0.3, 0.0)


def test_lower_pole_residue_first_order():
    # j = 1 pole: residue -h tr_0'(k) / slope
    k = kc.TraceProfile.exponential(-1.0)
    r = kc.trace_residue_at_pole(k, D_H, 1.0, -1.0, pole_index=1)
    assert r.value == pytest.approx(-1.0, abs=1e-4)


def test_residue_from_cocycle_constancy():
    for k in (heis_model(), heis_model("poly_bump", degree=4, amplitude=0.7), heis_model("cos_window", radius=2.0)):
        r = kc.residue_from_cocycle(k, [2.0, 4.0, 10.0])
        assert r.deviation < 1e-6
        assert r.value == pytest.approx(fm.local_trace(k, 0.0), rel=1e-6)
    with pytest.raises(ValueError):
        kc.residue_from_cocycle(heis_model(), [1.0])
