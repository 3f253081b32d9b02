"""Frozen sign and normalization conventions (see ``docs/conventions.md``)."""

CONVENTIONS_VERSION = "1.0"

CONVENTIONS = {
    "version": CONVENTIONS_VERSION,
    "chart": "z = x + iy, d/dz = (d_x - i d_y)/2, d/dzbar = (d_x + i d_y)/2",
    "modes": "exp(2 pi i n.s), K_n = 2 pi E^{-T} n, x = E s",
    "quasimomentum": "kappa in lattice coordinates, multiplier mu_m = exp(i kappa_m)",
    "dirac": "[[U - E, d/dz], [-d/dzbar, conj(U) - E]]",
    "dirac_symbols": "sigma(d/dz) = i(xi1 - i xi2)/2, sigma(d/dzbar) = i(xi1 + i xi2)/2",
    "schrodinger_reference": "det(L - E) / det(free symbol + epsilon)",
    "dirac_reference": "free Dirac at (kappa, E + i*shift)",
    "local_parameter": "lambda = sigma(d/dz)(k) on the + end, sigma(d/dzbar)(k) on the - end",
    "log_multiplier": "log mu(v) = i <k, v> = lambda v + C0 conj(v)/lambda + ... (+ end)",
    "weierstrass": "X = i int(F dz + F^dagger dzbar), F = u u^T J, u = (conj psi2, psi1)",
    "decode": "x3 = Im X11, x1 = Re X21, x2 = -Im X21",
}
