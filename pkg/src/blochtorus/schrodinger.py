"""Bloch-substituted magnetic Schrödinger operators on flat tori.

For quasimomenta ``κ`` the periodic factor ``φ`` of a Bloch function
solves ``L(κ) φ = E φ`` with

    L(κ) = (−i∇ + A₀ + Σ_m κ_m ω_m)² + U,

where ``ω_m`` are closed 1-forms with unit periods and ``A₀`` is an optional
base vector potential.  The operator is discretised by Fourier-Galerkin on
the lattice's square mode block; with a smooth potential the truncation is a
finite section of the compact pencil whose singular set is the Bloch
variety.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .numerics import ConvergenceError, HermitianSpectrum, LogDet, count_below, eigh, logdet, newton_zero, wrap_phase
from .torus import (
    FluxVector,
    HarmonicOneForm,
    LatticeError,
    PeriodicScalarField,
    TorusLattice,
    as_flux,
    convolution_matrix,
    padded_product,
    standard_forms,
)

__all__ = [
    "BlochSchrodingerOperator",
    "DispersionTable",
    "SliceRecord",
    "assemble_schrodinger",
    "bloch_substituted_matrix",
    "dispersion_sweep",
    "gauge_check",
    "two_route_check",
    "relative_logdet",
    "bloch_variety_slice",
    "spectral_tolerance",
]

DEFAULT_TOLERANCE = 1e-9
STRESSED_TOLERANCE = 1e-7


def spectral_tolerance(flux) -> float:
    """Default spectral tolerance, widened for ``|κ| > 10``."""
    return STRESSED_TOLERANCE if np.max(np.abs(as_flux(flux).array())) > 10 else DEFAULT_TOLERANCE


@dataclass(frozen=True, eq=False)
class BlochSchrodingerOperator:
    lattice: TorusLattice
    potential: PeriodicScalarField | None
    base_potential: tuple[PeriodicScalarField, ...] | None
    forms: tuple[HarmonicOneForm, ...]
    flux: FluxVector
    matrix: np.ndarray
    window_shift: tuple[int, ...]
    free_symbol: np.ndarray = field(repr=False)

    @property
    def is_hermitian(self) -> bool:
        A = self.matrix
        return bool(np.linalg.norm(A - A.conj().T) <= 1e-12 * max(np.linalg.norm(A), 1e-300))

    def spectrum(self, k: int | None = None, vectors: bool = False) -> HermitianSpectrum:
        return eigh(self.matrix, k, vectors=vectors)


def _check_inputs(lattice, potential, base_potential, forms):
    if potential is not None and potential.lattice != lattice:
        raise LatticeError("potential lives on a different lattice")
    if base_potential is not None:
        if len(base_potential) != lattice.dim:
            raise LatticeError("base potential needs one component per direction")
        for comp in base_potential:
            if comp.lattice != lattice:
                raise LatticeError("base potential lives on a different lattice")
    for form in forms:
        if len(form.constant) != lattice.dim:
            raise LatticeError("form dimension does not match the lattice")
        if form.exact is not None and form.exact.lattice != lattice:
            raise LatticeError("exact part lives on a different lattice")


def assemble_schrodinger(
    lattice: TorusLattice,
    potential: PeriodicScalarField | None = None,
    flux=None,
    forms: Sequence[HarmonicOneForm] | None = None,
    base_potential: Sequence[PeriodicScalarField] | None = None,
    recenter: bool = True,
) -> BlochSchrodingerOperator:
    """Galerkin matrix of ``(−i∇ + A)² + U`` with ``A = A₀ + Σ κ_m ω_m``.

    With ``A = a + B`` split into its constant part ``a`` (from the harmonic
    coefficients) and a periodic remainder ``B`` (base potential plus exact
    parts), the entry between modes ``n`` (row) and ``n'`` is

        δ (K_n + a)·(K_n + a) + Û + (B·B + 2 a·B)^ + B̂·(K_n + K_n'),

    with hats evaluated at ``n − n'``.  Dot products are bilinear, so complex
    fluxes give the analytic continuation.  With ``recenter`` the constant
    part is reduced by the nearest dual-lattice vector (an index shift), which
    makes the matrix identical under ``κ -> κ + 2π e_m`` when there are no
    exact parts.
    """
    forms = tuple(forms) if forms is not None else tuple(standard_forms(lattice))
    kappa = as_flux(flux if flux is not None else np.zeros(len(forms)))
    if kappa.size != len(forms):
        raise ValueError(f"{kappa.size} flux components for {len(forms)} forms")
    base = tuple(base_potential) if base_potential is not None else None
    _check_inputs(lattice, potential, base, forms)
    d = lattice.dim
    k = kappa.array()

    a = sum((k[m] * forms[m].constant for m in range(len(forms))), np.zeros(d, dtype=complex))
    shift = np.zeros(d, dtype=int)
    if recenter:
        shift = np.rint(np.real(lattice.basis.T @ a) / (2 * np.pi)).astype(int)
        a = a - lattice.wavevectors(shift[None, :])[0]

    K = lattice.wavevectors()
    P = K + a
    symbol = np.sum(P * P, axis=1)
    H = np.diag(symbol).astype(complex)
    modes = lattice.modes

    if potential is not None:
        H += convolution_matrix(potential.spectrum, modes)

    B = [np.zeros(lattice.grid_shape, dtype=complex) for _ in range(d)]
    have_B = False
    if base is not None:
        for j in range(d):
            B[j] = B[j] + base[j].spectrum
        have_B = True
    for m, form in enumerate(forms):
        if form.exact is not None:
            for j, g in enumerate(form.exact.gradient()):
                B[j] = B[j] + k[m] * g.spectrum
            have_B = True
    if have_B:
        fields = [PeriodicScalarField(lattice, b) for b in B]
        sq = sum(padded_product([f, f]) for f in fields)
        H += convolution_matrix(sq, modes)
        lin = sum(2 * a[j] * B[j] for j in range(d))
        H += convolution_matrix(lin, modes)
        for j in range(d):
            T = convolution_matrix(B[j], modes)
            H += T * (K[:, j][:, None] + K[:, j][None, :])

    return BlochSchrodingerOperator(
        lattice, potential, base, forms, kappa, H, tuple(int(s) for s in shift), symbol
    )


def bloch_substituted_matrix(lattice: TorusLattice, potential: PeriodicScalarField | None, flux) -> np.ndarray:
    """``−(∇ + iκ)² + U`` on the unit torus, assembled column by column.

    Independent route used to cross-check :func:`assemble_schrodinger`: the
    potential block is obtained by transforming ``U·exp(2πi n'·x)`` on the
    quadrature grid, the kinetic part directly from ``(2πn + κ)²``.
    """
    if not np.allclose(lattice.basis, np.eye(lattice.dim), atol=0, rtol=0):
        raise LatticeError("the flux/quasimomentum identification needs the unit torus")
    k = as_flux(flux).array()
    shift = np.rint(k.real / (2 * np.pi)).astype(int)
    k = k - 2 * np.pi * shift
    modes = lattice.modes
    G, d = lattice.grid_size, lattice.dim
    kin = np.zeros(len(modes), dtype=complex)
    for j in range(d):
        kin = kin + (2 * np.pi * modes[:, j] + k[j]) ** 2
    H = np.diag(kin)
    if potential is not None:
        s = np.stack([c.ravel() for c in lattice.lattice_coords], axis=1)
        waves = np.exp(2j * np.pi * s @ modes.T)
        cols = potential.samples().ravel()[:, None] * waves
        spec = np.fft.fftn(cols.reshape(lattice.grid_shape + (len(modes),)), axes=tuple(range(d))) / G**d
        idx = np.mod(modes, G)
        H = H + spec[tuple(idx.T)]
    return H


def two_route_check(lattice: TorusLattice, potential: PeriodicScalarField | None, flux) -> float:
    """Norm of the difference between the Aharonov-Bohm and Bloch assemblies.

    The magnetic Laplacian with ``A_{j,l} = δ_{jl} κ_l`` (forms ``dx^m``)
    must coincide with the Bloch-substituted ``−Δ + U`` at quasimomenta ``κ``.
    """
    forms = [HarmonicOneForm(np.eye(lattice.dim)[m]) for m in range(lattice.dim)]
    route1 = assemble_schrodinger(lattice, potential, flux, forms).matrix
    route2 = bloch_substituted_matrix(lattice, potential, flux)
    return float(np.linalg.norm(route1 - route2))


@dataclass(frozen=True, eq=False)
class DispersionTable:
    """Lowest bands on a grid of real quasimomenta (bands sorted by value)."""

    kappas: np.ndarray
    energies: np.ndarray

    def rows(self):
        """``(kappa_1, kappa_2, band, energy)``; ``kappa_2`` is NaN in 1D."""
        for p, kap in enumerate(self.kappas):
            k1 = float(np.real(kap[0]))
            k2 = float(np.real(kap[1])) if len(kap) > 1 else float("nan")
            for b, e in enumerate(self.energies[p]):
                yield k1, k2, b, float(e)


def dispersion_sweep(
    lattice: TorusLattice,
    potential: PeriodicScalarField | None,
    kappas,
    bands: int,
    forms: Sequence[HarmonicOneForm] | None = None,
    base_potential=None,
    threads: int = 1,
) -> DispersionTable:
    kappas = np.atleast_2d(np.asarray(kappas, dtype=float))
    if lattice.dim == 1 and kappas.shape[0] == 1 and kappas.shape[1] != 1:
        kappas = kappas.T

    def one(kap):
        op = assemble_schrodinger(lattice, potential, kap, forms, base_potential)
        return op.spectrum(bands).eigenvalues

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            energies = list(pool.map(one, kappas))
    else:
        energies = [one(k) for k in kappas]
    return DispersionTable(kappas, np.array(energies))


def gauge_check(
    lattice: TorusLattice,
    potential: PeriodicScalarField | None,
    flux,
    phi: PeriodicScalarField | None,
    forms: Sequence[HarmonicOneForm] | None = None,
    levels: int = 10,
    which: Sequence[int] | None = None,
) -> float:
    """Max deviation of the lowest ``levels`` eigenvalues under ``ω_m -> ω_m + dφ``.

    ``which`` selects the forms that receive the exact part (all by default).
    """
    forms = list(forms) if forms is not None else standard_forms(lattice)
    if phi is None:
        return 0.0
    if not phi.real:
        raise ValueError("gauge function must be real")
    which = range(len(forms)) if which is None else which
    shifted = list(forms)
    for m in which:
        base = forms[m].exact
        shifted[m] = forms[m].with_exact(phi if base is None else base + phi)
    e0 = assemble_schrodinger(lattice, potential, flux, forms).spectrum(levels).eigenvalues
    e1 = assemble_schrodinger(lattice, potential, flux, shifted).spectrum(levels).eigenvalues
    return float(np.max(np.abs(e0 - e1)))


def _diag_logdet(d: np.ndarray) -> LogDet:
    if np.any(d == 0):
        return LogDet(-np.inf, 0.0)
    return LogDet(float(np.sum(np.log(np.abs(d)))), wrap_phase(float(np.sum(np.angle(d)))))


def relative_logdet(op: BlochSchrodingerOperator, energy, epsilon: float = 1.0) -> LogDet:
    """``det(L(κ) − E) / det(L_free(κ) + ε)``.

    The reference is the free operator at the same quasimomentum shifted by
    ``ε``, so the ratio is the finite section of ``det(1 + compact)``.
    """
    n = op.matrix.shape[0]
    num = logdet(op.matrix - complex(energy) * np.eye(n))
    return num - _diag_logdet(op.free_symbol + epsilon)


@dataclass(frozen=True, eq=False)
class SliceRecord:
    flux: FluxVector
    energies: np.ndarray
    log_magnitude: np.ndarray
    phase: np.ndarray
    zeros: list = field(default_factory=list)

    @property
    def det_log10(self) -> np.ndarray:
        return self.log_magnitude / np.log(10.0)


def bloch_variety_slice(
    lattice: TorusLattice,
    potential: PeriodicScalarField | None,
    kappa_path,
    energies,
    forms: Sequence[HarmonicOneForm] | None = None,
    base_potential=None,
    epsilon: float = 1.0,
    tol: float = 1e-12,
    threads: int = 1,
) -> list[SliceRecord]:
    """Relative determinant along a path of quasimomenta and its zeros in ``E``.

    For Hermitian data (real flux, real potential) zeros are bracketed by sign
    changes of the real determinant; otherwise interior minima of ``|det|``
    seed the search.  Every candidate is refined with :func:`newton_zero`.
    """
    energies = np.asarray(energies, dtype=float)
    path = [as_flux(k) for k in kappa_path]

    def one(kap: FluxVector) -> SliceRecord:
        op = assemble_schrodinger(lattice, potential, kap, forms, base_potential)
        lds = [relative_logdet(op, E, epsilon) for E in energies]
        mag = np.array([ld.log_magnitude for ld in lds])
        ph = np.array([ld.phase for ld in lds])

        def f(E):
            return relative_logdet(op, E, epsilon).value()

        zeros: list[complex] = []
        if kap.is_physical and op.is_hermitian:
            zeros = _hermitian_zeros(op.matrix, f, energies, tol)
        else:
            for i in range(1, len(energies) - 1):
                if mag[i] < mag[i - 1] and mag[i] <= mag[i + 1]:
                    try:
                        res = newton_zero(f, complex(energies[i]), tol=tol)
                    except ConvergenceError:
                        continue
                    if all(abs(res.root - z) > 1e-8 * max(1, abs(z)) for z in zeros):
                        zeros.append(res.root)
        return SliceRecord(kap, energies, mag, ph, sorted(zeros, key=lambda z: (z.real, z.imag)))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, path))
    return [one(k) for k in path]


def _hermitian_zeros(A, f, energies, tol) -> list[complex]:
    """Zeros in ``E`` bracketed with the inertia count, one root per bracket.

    Intervals holding several eigenvalues are bisected until they separate;
    roots that stay together below ``1e-13`` relative width are reported with
    multiplicity.
    """
    counts = [count_below(A, E) for E in energies]
    out: list[complex] = []
    stack = [(energies[i], energies[i + 1], counts[i], counts[i + 1]) for i in range(len(energies) - 1)]
    stack.reverse()
    while stack:
        lo, hi, clo, chi = stack.pop()
        n = chi - clo
        if n <= 0:
            continue
        if n == 1:
            out.append(complex(_refine_bracket(f, lo, hi, tol)))
            continue
        if hi - lo <= 1e-13 * max(1.0, abs(hi)):
            out.extend([complex(0.5 * (lo + hi))] * n)
            continue
        mid = 0.5 * (lo + hi)
        cm = count_below(A, mid)
        stack.append((mid, hi, cm, chi))
        stack.append((lo, mid, clo, cm))
    return out


def _refine_bracket(f, lo: float, hi: float, tol: float) -> float:
    def g(E):
        return f(E).real

    glo, ghi = g(lo), g(hi)
    start = lo - glo * (hi - lo) / (ghi - glo) if ghi != glo else 0.5 * (lo + hi)
    try:
        res = newton_zero(f, complex(start), tol=tol)
        if lo <= res.root.real <= hi and abs(res.root.imag) <= 1e-8 * max(1.0, abs(res.root)):
            return float(res.root.real)
    except ConvergenceError:
        pass
    return float(brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))
