"""The Dirac spectral curve of U = 1 + 0.3 cos(2 pi y) and its C0 coefficient.

Traces the + end of the curve along a complex ray of lambda, fits the
log-multiplier expansion and compares the lambda^-1 coefficient with the
quadrature value -mean(U^2), which is the normalized Willmore energy.
"""
import numpy as np

from blochtorus import potentials as P
from blochtorus.dirac import c0_integral, fit_c0, trace_curve
from blochtorus.torus import make_lattice

lat = make_lattice(2, (1, 1j), 4, 32)
U = P.cos2d(lat, 0.0, 0.3, 1.0)

trace = trace_curve(lat, U, "+", steps=16)
print(f"traced {len(trace.points)} points, failures: {trace.failures or 'none'}")
print(f"{'|lambda|':>9} {'k1':>24} {'k2':>24} {'residual':>9}")
for p in trace.points[::4]:
    print(f"{abs(p.lam):9.3f} {p.k[0]:24.12f} {p.k[1]:24.12f} {p.residual:9.1e}")

fit = fit_c0(trace.points, lattice=lat)
ref = c0_integral(U)
print(f"\nC0 fitted   {fit.c0.real:.9f} {fit.c0.imag:+.2e}i")
print(f"C0 integral {ref:.9f}")
print(f"relative difference {abs(fit.c0 / ref - 1):.2e}  (Laurent truncation of the finite lambda window)")
print(f"Willmore energy 4*area*mean(U^2) = {-4 * lat.area * ref:.9f}")
