"""Noncommutative residue against the Dixmier coefficient on flat tori.

The residue of (1 + Laplacian)^(-d/2) is the sphere area; divided by d it is the
log coefficient of the partial sums of its eigenvalues.
"""
from carnot_residue import wodzicki as wz

for d in (2, 3, 4):
    for N in (10**5, 10**6, 10**7):
        r = wz.connes_check(d, N)
        print(f"d={d} N={N:>8d}  A = {r.A:.6f}  B = {r.B:.6f}  rel = {r.rel_discrepancy:.2e}")
