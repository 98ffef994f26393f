"""Three routes to the residue of a fibred kernel on the Heisenberg group.

For a kernel density k on the tangent groupoid the cocycle ratio, the pole of
the extended local trace and the value tr_0 k at h = 0 all agree.
"""
from carnot_residue import fibred_model as fm
from carnot_residue import graded_lie as gl
from carnot_residue import kernel_calculus as kc

g = gl.heisenberg()
d_H = gl.homogeneous_dimension(g)
print(f"algebra {g.name}: weights {list(g.weights)}, d_H = {d_H}")

for name in ("gauss_bump", "poly_bump", "cos_window"):
    k = fm.builtin_model(g, name, h_profile=fm.exponential(-1.0))
    tr0 = fm.local_trace(k, 0.0)
    coc = kc.residue_from_cocycle(k, [2.0, 4.0, 10.0])
    pole = kc.trace_residue_at_pole(kc.TraceProfile.from_model(k), d_H, 0.3, -1.0)
    print(f"{name:11s} tr0 = {tr0:.10f}  cocycle = {coc.value:.10f} (spread {coc.deviation:.1e})"
          f"  pole = {pole.value.real:.10f}")

# the extended local trace continues the direct integral past m = -d_H
prof = kc.TraceProfile.exponential(-1.0)
m = -d_H - 0.5
print(f"\nm = {m}: direct {kc.local_trace_direct(prof, m, 1.0, d_H).value:.12f}")
for n in (1, 2, 3):
    print(f"         extended n={n} {kc.local_trace_extended(prof, m, 1.0, d_H, n):.12f}")
