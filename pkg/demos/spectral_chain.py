"""Weyl law, zeta residue and log-divergence of partial sums for model spectra.

For each spectrum the zeta residue C (normalised by m / d_H) should match the
coefficient of log N in the partial sums of the singular values.
"""
from carnot_residue import spectral_models as sm
from carnot_residue import trace_ideals as ti
from carnot_residue import zeta_residue as zr

N = 10**6
streams = [sm.torus_stream(2), sm.torus_stream(3), sm.heisenberg_stream(sm.HeisenbergSpec(q=1))]
for s in streams:
    fit = sm.weyl_fit(s, (1e2, 1e4))
    c, c_err = zr.c_of(zr.ZetaProfile(s))
    Ns = ti.dyadic_schedule(N >> 10, N)
    log_fit = ti.log_coefficient_fit(Ns, ti.partial_sums(ti.from_spectral(s, s.d_H / s.order_m), Ns))
    print(f"{s.label:24s} Weyl exponent {fit.exponent:.4f} (nominal {s.d_H / s.order_m:g})"
          f"  C = {c:.4f} +- {c_err:.1e}  log-fit = {log_fit.c:.4f}")
