"""Band structure of the Mathieu potential U = 2a cos(2 pi x).

Sweeps real quasimomenta across the Brillouin zone, shows how gaps open at
the zone centre and edge as the coupling grows, and checks the band edges
against scipy's Mathieu characteristic values.
"""
import numpy as np
import scipy.special as sp

from blochtorus import potentials as P
from blochtorus.schrodinger import dispersion_sweep
from blochtorus.torus import make_lattice

lat = make_lattice(1, 1.0, 16, 128)
kappas = np.linspace(-np.pi, np.pi, 33)[:, None]

print("gaps between bands 1-2 (at kappa = pi) and 2-3 (at kappa = 0)")
print(f"{'a':>5} {'gap12':>12} {'gap23':>12}")
for a in (0.0, 0.5, 1.0, 2.0, 4.0):
    E = dispersion_sweep(lat, P.mathieu(lat, a), kappas, 4).energies
    gap12 = E[:, 1].min() - E[:, 0].max()
    gap23 = E[:, 2].min() - E[:, 1].max()
    print(f"{a:5.1f} {gap12:12.6f} {gap23:12.6f}")

# band edges at kappa = 0 are pi^2 times the even-order characteristic values
a = 2.0
q = a / np.pi**2
edges = dispersion_sweep(lat, P.mathieu(lat, a), [[0.0]], 3).energies[0]
oracle = np.pi**2 * np.array([sp.mathieu_a(0, q), sp.mathieu_b(2, q), sp.mathieu_a(2, q)])
print("\nkappa = 0 edges, a = 2:")
for e, o in zip(edges, oracle):
    print(f"  computed {e:.12f}   scipy {o:.12f}   diff {abs(e - o):.1e}")
