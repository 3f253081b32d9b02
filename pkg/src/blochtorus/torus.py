"""Flat tori, Fourier truncations and periodic fields.

A torus is ``R^d / Λ`` with ``Λ`` spanned by the period vectors.  Points are
addressed either in Cartesian coordinates ``x`` or in lattice coordinates
``s`` (``x = E s`` with the periods as the columns of ``E``).  The linear
lifts ``h_m = s_m`` have unit periods, so a quasimomentum ``κ`` is given in
lattice coordinates and a Bloch function picks up ``exp(i κ_m)`` under the
shift by the ``m``-th period.

Fourier modes are ``exp(2πi n·s)`` with Cartesian wavevector
``K_n = 2π E^{-T} n``.  The Galerkin mode set is the square block
``|n_j| <= nmax``; quadrature uses ``grid_size`` samples per direction.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "TorusLattice",
    "PeriodicScalarField",
    "HarmonicOneForm",
    "FluxVector",
    "MultiplierMap",
    "LatticeError",
    "make_lattice",
    "field_from_samples",
    "field_to_samples",
    "field_from_function",
    "field_from_modes",
    "constant_field",
    "standard_forms",
    "period_integrals",
    "lift_bloch",
    "floquet_defect",
    "as_flux",
    "convolution_matrix",
    "padded_product",
]


class LatticeError(ValueError):
    """Invalid lattice data or mismatched lattices."""


@dataclass(frozen=True)
class TorusLattice:
    """Period lattice, Galerkin mode block and quadrature grid of a flat torus.

    ``periods`` holds one real period for ``dim == 1`` and two complex
    numbers ``e1, e2`` (the plane identified with ``C``) for ``dim == 2``.
    Use :func:`make_lattice` to construct validated instances.
    """

    dim: int
    periods: tuple[complex, ...]
    nmax: int
    grid_size: int

    @cached_property
    def basis(self) -> np.ndarray:
        """Real ``dim x dim`` matrix whose columns are the period vectors."""
        if self.dim == 1:
            return np.array([[float(np.real(self.periods[0]))]])
        e1, e2 = self.periods
        return np.array([[e1.real, e2.real], [e1.imag, e2.imag]])

    @cached_property
    def dual(self) -> np.ndarray:
        """``2π E^{-T}``: maps integer modes to Cartesian wavevectors."""
        return 2.0 * np.pi * np.linalg.inv(self.basis).T

    @property
    def area(self) -> float:
        if self.dim == 1:
            return float(np.real(self.periods[0]))
        e1, e2 = self.periods
        return float((np.conj(e1) * e2).imag)

    @cached_property
    def modes(self) -> np.ndarray:
        """Integer mode vectors of the square block, shape ``(M, dim)``."""
        r = range(-self.nmax, self.nmax + 1)
        return np.array(list(itertools.product(r, repeat=self.dim)), dtype=int)

    @property
    def mode_count(self) -> int:
        return (2 * self.nmax + 1) ** self.dim

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return (self.grid_size,) * self.dim

    @property
    def sample_count(self) -> int:
        return self.grid_size**self.dim

    @cached_property
    def lattice_coords(self) -> tuple[np.ndarray, ...]:
        """Lattice coordinates of the grid points, one array per direction."""
        s = np.arange(self.grid_size) / self.grid_size
        return tuple(np.meshgrid(*([s] * self.dim), indexing="ij"))

    @cached_property
    def cartesian_coords(self) -> tuple[np.ndarray, ...]:
        s = np.stack(self.lattice_coords)
        x = np.tensordot(self.basis, s, axes=1)
        return tuple(x)

    def wavevectors(self, modes: np.ndarray | None = None) -> np.ndarray:
        """Cartesian wavevectors ``K_n`` for integer modes, shape ``(M, dim)``."""
        if modes is None:
            modes = self.modes
        return np.asarray(modes, dtype=float) @ self.dual.T

    def to_wavevector(self, kappa) -> np.ndarray:
        """Lattice-coordinate quasimomentum ``κ`` to Cartesian ``k = E^{-T} κ``."""
        return np.linalg.solve(self.basis.T, np.asarray(kappa, dtype=complex))

    def to_flux(self, k) -> np.ndarray:
        """Cartesian wavevector ``k`` to lattice-coordinate ``κ = E^T k``."""
        return self.basis.T @ np.asarray(k, dtype=complex)

    def period_vector(self, j: int) -> np.ndarray:
        return self.basis[:, j]

    def same_as(self, other: "TorusLattice") -> bool:
        return self == other


def make_lattice(dim: int, periods, nmax: int, grid_size: int) -> TorusLattice:
    """Validate inputs and build a :class:`TorusLattice`.

    >>> make_lattice(2, (1, 1j), 8, 64).area
    1.0
    """
    if dim not in (1, 2):
        raise LatticeError(f"dim must be 1 or 2, got {dim}")
    if np.ndim(periods) == 0:
        periods = (periods,)
    periods = tuple(complex(p) for p in periods)
    if len(periods) != dim:
        raise LatticeError(f"expected {dim} periods, got {len(periods)}")
    if dim == 1:
        if periods[0].imag != 0 or not periods[0].real > 0:
            raise LatticeError("1D period must be real and positive")
    else:
        e1, e2 = periods
        if not (np.conj(e1) * e2).imag > 0:
            raise LatticeError("degenerate or negatively oriented lattice: Im(conj(e1) e2) <= 0")
    nmax = int(nmax)
    grid_size = int(grid_size)
    if nmax < 1:
        raise LatticeError("nmax must be >= 1")
    if grid_size & (grid_size - 1) or grid_size <= 0:
        raise LatticeError("grid_size must be a power of two")
    if grid_size < 4 * nmax + 2:
        raise LatticeError(f"grid too coarse: grid_size={grid_size} < 4*nmax+2={4 * nmax + 2}")
    return TorusLattice(dim, periods, nmax, grid_size)


def _check_same(a: TorusLattice, b: TorusLattice) -> None:
    if a != b:
        raise LatticeError("fields live on different lattices")


@dataclass(frozen=True, eq=False)
class PeriodicScalarField:
    """A periodic function stored by its full discrete spectrum.

    ``spectrum`` is ``fftn(samples) / G^dim`` in FFT ordering, so the
    coefficient of ``exp(2πi n·s)`` sits at index ``n mod G``.  Keeping the
    whole spectrum makes the sample/coefficient pair an exact bijection; the
    Galerkin view is :attr:`coeffs`.
    """

    lattice: TorusLattice
    spectrum: np.ndarray
    real: bool = False

    def __post_init__(self):
        spec = np.asarray(self.spectrum, dtype=complex)
        if spec.shape != self.lattice.grid_shape:
            raise LatticeError(f"spectrum shape {spec.shape} != grid {self.lattice.grid_shape}")
        if self.real:
            mirrored = np.conj(spec[_negated_index(self.lattice.grid_size, self.lattice.dim)])
            spec = 0.5 * (spec + mirrored)
        spec.setflags(write=False)
        object.__setattr__(self, "spectrum", spec)

    def coefficient(self, modes) -> np.ndarray:
        """Fourier coefficients at integer ``modes`` (shape ``(..., dim)``)."""
        idx = np.mod(np.asarray(modes, dtype=int), self.lattice.grid_size)
        return self.spectrum[tuple(np.moveaxis(idx, -1, 0))]

    @property
    def coeffs(self) -> np.ndarray:
        """Coefficients on the Galerkin mode block, ordered as ``lattice.modes``."""
        return self.coefficient(self.lattice.modes)

    @property
    def mean(self) -> complex:
        return complex(self.spectrum[(0,) * self.lattice.dim])

    def samples(self) -> np.ndarray:
        out = np.fft.ifftn(self.spectrum) * self.lattice.sample_count
        return out.real.copy() if self.real else out

    def gradient(self) -> list["PeriodicScalarField"]:
        """Cartesian gradient components, computed spectrally."""
        lat = self.lattice
        n = _fft_modes(lat)
        K = np.tensordot(lat.dual, n, axes=1)
        return [PeriodicScalarField(lat, 1j * K[j] * self.spectrum, self.real) for j in range(lat.dim)]

    def __add__(self, other):
        if isinstance(other, PeriodicScalarField):
            _check_same(self.lattice, other.lattice)
            return PeriodicScalarField(self.lattice, self.spectrum + other.spectrum, self.real and other.real)
        c = complex(other)
        spec = self.spectrum.copy()
        spec[(0,) * self.lattice.dim] += c
        return PeriodicScalarField(self.lattice, spec, self.real and c.imag == 0)

    __radd__ = __add__

    def scaled(self, c) -> "PeriodicScalarField":
        c = complex(c)
        return PeriodicScalarField(self.lattice, c * self.spectrum, self.real and c.imag == 0)

    def conj(self) -> "PeriodicScalarField":
        lat = self.lattice
        return PeriodicScalarField(lat, np.conj(self.spectrum[_negated_index(lat.grid_size, lat.dim)]), self.real)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.samples())))

    def is_real(self, tol: float = 1e-14) -> bool:
        lat = self.lattice
        c = self.spectrum
        return bool(np.max(np.abs(c - np.conj(c[_negated_index(lat.grid_size, lat.dim)])), initial=0.0) <= tol)


def _negated_index(G: int, dim: int):
    neg = (-np.arange(G)) % G
    return np.ix_(*([neg] * dim))


def _fft_modes(lat: TorusLattice) -> np.ndarray:
    """Integer mode of every FFT slot, shape ``(dim, G, ..., G)``."""
    f = np.fft.fftfreq(lat.grid_size, 1.0 / lat.grid_size).astype(int)
    return np.stack(np.meshgrid(*([f] * lat.dim), indexing="ij"))


def field_from_samples(lattice: TorusLattice, samples, real: bool | None = None) -> PeriodicScalarField:
    """Build a field from samples on the full quadrature grid."""
    s = np.asarray(samples)
    if s.shape != lattice.grid_shape:
        if s.size != lattice.sample_count:
            raise LatticeError(f"expected {lattice.sample_count} samples, got {s.size}")
        s = s.reshape(lattice.grid_shape)
    if real is None:
        real = not np.iscomplexobj(s)
    return PeriodicScalarField(lattice, np.fft.fftn(s) / lattice.sample_count, real)


def field_to_samples(field: PeriodicScalarField) -> np.ndarray:
    return field.samples()


def field_from_function(lattice: TorusLattice, func: Callable[..., np.ndarray], real: bool | None = None):
    """Sample ``func`` (called with lattice coordinates) on the grid."""
    return field_from_samples(lattice, np.broadcast_to(func(*lattice.lattice_coords), lattice.grid_shape), real)


def field_from_modes(lattice: TorusLattice, coefficients: dict, real: bool = False) -> PeriodicScalarField:
    """Field with prescribed Fourier coefficients ``{mode: value}``.

    Modes are ints (1D) or tuples; every mode must satisfy ``|n_j| < G/2``.
    """
    spec = np.zeros(lattice.grid_shape, dtype=complex)
    half = lattice.grid_size // 2
    for mode, value in coefficients.items():
        mode = (mode,) if np.ndim(mode) == 0 else tuple(mode)
        if len(mode) != lattice.dim or any(abs(m) >= half for m in mode):
            raise LatticeError(f"mode {mode} not representable on this grid")
        spec[tuple(m % lattice.grid_size for m in mode)] += value
    return PeriodicScalarField(lattice, spec, real)


def constant_field(lattice: TorusLattice, c) -> PeriodicScalarField:
    c = complex(c)
    spec = np.zeros(lattice.grid_shape, dtype=complex)
    spec[(0,) * lattice.dim] = c
    return PeriodicScalarField(lattice, spec, c.imag == 0)


def padded_product(fields: Sequence[PeriodicScalarField]) -> np.ndarray:
    """Spectrum of a product of fields on a doubled grid (alias free).

    Returns an array of shape ``(2G,)*dim`` in FFT ordering.
    """
    lat = fields[0].lattice
    G, d = lat.grid_size, lat.dim
    P = 2 * G
    prod = None
    for f in fields:
        _check_same(lat, f.lattice)
        big = np.zeros((P,) * d, dtype=complex)
        idx = np.fft.fftfreq(G, 1.0 / G).astype(int) % P
        big[np.ix_(*([idx] * d))] = f.spectrum
        vals = np.fft.ifftn(big) * P**d
        prod = vals if prod is None else prod * vals
    return np.fft.fftn(prod) / P**d


@dataclass(frozen=True, eq=False)
class HarmonicOneForm:
    """Closed 1-form ``a·dx + dφ``: constant Cartesian part plus optional exact part."""

    constant: np.ndarray
    exact: PeriodicScalarField | None = None

    def __post_init__(self):
        c = np.array(self.constant, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "constant", c)

    def with_exact(self, phi: PeriodicScalarField | None) -> "HarmonicOneForm":
        return HarmonicOneForm(self.constant, phi)

    def components(self, lattice: TorusLattice) -> list[np.ndarray]:
        """Grid samples of the Cartesian components."""
        comps = [np.full(lattice.grid_shape, self.constant[j]) for j in range(lattice.dim)]
        if self.exact is not None:
            _check_same(lattice, self.exact.lattice)
            for j, g in enumerate(self.exact.gradient()):
                comps[j] = comps[j] + g.samples().real
        return comps


def standard_forms(lattice: TorusLattice) -> list[HarmonicOneForm]:
    """Forms ``ds_m`` dual to the period generators (rows of ``E^{-1}``)."""
    inv = np.linalg.inv(lattice.basis)
    return [HarmonicOneForm(inv[m]) for m in range(lattice.dim)]


def period_integrals(lattice: TorusLattice, forms: Sequence[HarmonicOneForm], base: Sequence[int] | None = None):
    """Matrix ``P[j, m]`` of line integrals of ``forms[m]`` along the ``j``-th period.

    The line starts at grid index ``base`` and is integrated with the
    periodic trapezoid rule on the grid samples.
    """
    base = tuple(base) if base is not None else (0,) * lattice.dim
    out = np.zeros((lattice.dim, len(forms)))
    for m, form in enumerate(forms):
        comps = form.components(lattice)
        for j in range(lattice.dim):
            e = lattice.period_vector(j)
            along = sum(comps[k] * e[k] for k in range(lattice.dim))
            line = list(base)
            line[j] = slice(None)
            out[j, m] = float(np.mean(along[tuple(line)]))
    return out


@dataclass(frozen=True)
class FluxVector:
    """Quasimomenta / Aharonov-Bohm fluxes in lattice coordinates."""

    components: tuple[complex, ...]

    def __post_init__(self):
        comps = tuple(complex(c) for c in self.components)
        if not all(np.isfinite(c) for c in comps):
            raise ValueError("flux components must be finite")
        object.__setattr__(self, "components", comps)

    @property
    def size(self) -> int:
        return len(self.components)

    @property
    def is_physical(self) -> bool:
        return all(c.imag == 0 for c in self.components)

    def array(self) -> np.ndarray:
        return np.array(self.components, dtype=complex)

    def shifted(self, m: int, turns: int = 1) -> "FluxVector":
        comps = list(self.components)
        comps[m] += 2.0 * np.pi * turns
        return FluxVector(tuple(comps))

    def multipliers(self) -> "MultiplierMap":
        return MultiplierMap(tuple(np.exp(1j * self.array())))


def as_flux(kappa) -> FluxVector:
    if isinstance(kappa, FluxVector):
        return kappa
    return FluxVector(tuple(np.atleast_1d(np.asarray(kappa, dtype=complex))))


@dataclass(frozen=True)
class MultiplierMap:
    """Values ``μ_m = exp(i κ_m)`` of the deck-group homomorphism on the generators."""

    values: tuple[complex, ...]

    @classmethod
    def from_flux(cls, kappa) -> "MultiplierMap":
        return as_flux(kappa).multipliers()

    def isclose(self, other: "MultiplierMap", tol: float = 1e-12) -> bool:
        a, b = np.array(self.values), np.array(other.values)
        return a.shape == b.shape and bool(np.all(np.abs(a - b) <= tol * np.maximum(1.0, np.abs(a))))

    def signs(self, tol: float = 1e-9) -> tuple[int, ...] | None:
        """The ``±1`` pattern when every multiplier is real and unimodular."""
        out = []
        for v in self.values:
            if abs(v - 1) <= tol:
                out.append(1)
            elif abs(v + 1) <= tol:
                out.append(-1)
            else:
                return None
        return tuple(out)


def lift_bloch(lattice: TorusLattice, kappa, phi: PeriodicScalarField, copies: Sequence[int]):
    """Sample ``ψ = exp(i Σ κ_m h_m) φ`` on a block of fundamental domains.

    Returns ``(psi, coords)`` where ``psi`` has shape ``(p G, q G)`` (or
    ``(p G,)`` in 1D) and ``coords`` are the lattice coordinates ``h_m`` of
    the samples.
    """
    kappa = as_flux(kappa).array()
    copies = tuple(int(c) for c in copies)
    if len(copies) != lattice.dim or len(kappa) != lattice.dim:
        raise LatticeError("need one copy count and one flux per direction")
    if min(copies) < 2:
        raise ValueError("need at least two copies per direction")
    _check_same(lattice, phi.lattice)
    G = lattice.grid_size
    base = phi.samples()
    tiled = np.tile(base, copies)
    axes = [np.arange(c * G) / G for c in copies]
    coords = np.meshgrid(*axes, indexing="ij")
    phase = sum(k * h for k, h in zip(kappa, coords))
    return np.exp(1j * phase) * tiled, coords


def floquet_defect(lattice: TorusLattice, kappa, psi: np.ndarray) -> float:
    """Max of ``|ψ(T_k x) − exp(i κ_k) ψ(x)|`` over all grid points with a shifted copy."""
    kappa = as_flux(kappa).array()
    G = lattice.grid_size
    worst = 0.0
    for k in range(lattice.dim):
        lead = [slice(None)] * lattice.dim
        tail = [slice(None)] * lattice.dim
        lead[k] = slice(G, None)
        tail[k] = slice(None, -G)
        d = psi[tuple(lead)] - np.exp(1j * kappa[k]) * psi[tuple(tail)]
        worst = max(worst, float(np.max(np.abs(d))))
    return worst


def convolution_matrix(spectrum: np.ndarray, modes: np.ndarray) -> np.ndarray:
    """Galerkin block ``T[a, b] = spectrum[modes[a] − modes[b]]`` (indices taken mod the grid)."""
    G = spectrum.shape[0]
    diff = np.mod(modes[:, None, :] - modes[None, :, :], G)
    return spectrum[tuple(np.moveaxis(diff, -1, 0))]
