"""Builtin potentials on a :class:`~blochtorus.torus.TorusLattice`.

All builtins are written in lattice coordinates ``s`` so ``cos(2π s_1)``
is periodic on any lattice shape.
"""
from __future__ import annotations

import numpy as np

from .torus import PeriodicScalarField, TorusLattice, constant_field, field_from_modes

__all__ = ["zero", "constant", "mathieu", "cos2d", "from_fourier", "random_smooth"]


def zero(lattice: TorusLattice) -> PeriodicScalarField:
    return constant_field(lattice, 0.0)


def constant(lattice: TorusLattice, c) -> PeriodicScalarField:
    return constant_field(lattice, c)


def mathieu(lattice: TorusLattice, a: float, c: float = 0.0) -> PeriodicScalarField:
    """``U = c + 2a cos(2π s_1)``."""
    e1 = (1,) + (0,) * (lattice.dim - 1)
    m1 = tuple(-k for k in e1)
    coeffs = {e1: a, m1: a}
    if c:
        coeffs[(0,) * lattice.dim] = c
    return field_from_modes(lattice, coeffs, real=True)


def cos2d(lattice: TorusLattice, a: float, b: float, c: float = 0.0) -> PeriodicScalarField:
    """``U = c + a cos(2π s_1) + b cos(2π s_2)``."""
    if lattice.dim != 2:
        raise ValueError("cos2d needs a 2D lattice")
    coeffs = {(1, 0): a / 2, (-1, 0): a / 2, (0, 1): b / 2, (0, -1): b / 2}
    if c:
        coeffs[(0, 0)] = c
    return field_from_modes(lattice, coeffs, real=True)


def from_fourier(lattice: TorusLattice, terms, real: bool | None = None) -> PeriodicScalarField:
    """Explicit coefficient list ``[(mode, value), ...]``.

    With ``real=None`` the field is flagged real when the coefficients are
    conjugate symmetric.
    """
    coeffs: dict = {}
    for mode, value in terms:
        key = (int(mode),) if np.ndim(mode) == 0 else tuple(int(m) for m in mode)
        coeffs[key] = coeffs.get(key, 0) + complex(value)
    if real is None:
        real = all(abs(v - np.conj(coeffs.get(tuple(-m for m in k), 0))) <= 1e-14 for k, v in coeffs.items())
    return field_from_modes(lattice, coeffs, real=real)


def random_smooth(lattice: TorusLattice, rng: np.random.Generator, band: int = 3, amplitude: float = 1.0):
    """Real trigonometric polynomial with random coefficients on ``|n_j| <= band``."""
    r = range(-band, band + 1)
    modes = np.array(np.meshgrid(*([list(r)] * lattice.dim), indexing="ij")).reshape(lattice.dim, -1).T
    coeffs = {}
    for n in modes:
        key = tuple(int(v) for v in n)
        neg = tuple(-v for v in key)
        if neg in coeffs:
            coeffs[key] = np.conj(coeffs[neg])
        elif key == neg:
            coeffs[key] = complex(rng.normal())
        else:
            coeffs[key] = complex(rng.normal(), rng.normal()) / np.sqrt(2)
    spec = {k: amplitude * v / (1 + sum(abs(x) for x in k)) ** 2 for k, v in coeffs.items()}
    return field_from_modes(lattice, spec, real=True)
