"""Spinor (Weierstrass) representation of surfaces in R³.

A solution ``ψ`` of ``𝒟ψ = 0`` with real ``U`` gives the closed
``su(2)``-valued form

    ω = i (F dz + F† dz̄),   F = u uᵀ J,  u = (ψ̄₂, ψ₁),  J = [[0, −1], [1, 0]],

whose integral ``X`` is decoded as ``x³ = Im X₁₁``, ``x¹ + i x² = conj(X₂₁)``.
The induced metric is ``e^{2α}|dz|²`` with ``e^α = |ψ₁|² + |ψ₂|²`` and the mean
curvature is ``H = 2U e^{−α}``.  The constant spinor ``ψ = (1, 0)`` gives a
plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dirac import symbols
from .io import atomic_write_text, write_json
from .torus import LatticeError, MultiplierMap, PeriodicScalarField, TorusLattice, _fft_modes, as_flux

__all__ = [
    "SpinorField",
    "ImmersionMesh",
    "WillmoreResult",
    "ClosednessError",
    "dirac_residual",
    "closedness_residual",
    "integrate_immersion",
    "willmore",
    "su2_matrix",
    "su2_to_so3",
    "encode",
    "decode",
    "metric_defect",
    "write_obj",
    "write_sidecar",
    "DEGENERATE_THRESHOLD",
    "CLOSEDNESS_THRESHOLD",
]

DEGENERATE_THRESHOLD = 1e-10
CLOSEDNESS_THRESHOLD = 1e-6


class ClosednessError(ValueError):
    """The integrand is not closed; the spinor does not solve the Dirac equation."""


@dataclass(frozen=True, eq=False)
class SpinorField:
    """Grid samples of a Bloch spinor ``ψ = (ψ₁, ψ₂)`` with real quasimomentum ``flux``.

    ``psi`` has shape ``(2, G, G)`` and holds ``ψ`` itself (Bloch factor
    included) at the lattice-coordinate grid points.
    """

    lattice: TorusLattice
    psi: np.ndarray
    flux: np.ndarray

    def __post_init__(self):
        if self.lattice.dim != 2:
            raise LatticeError("spinor fields live on 2D lattices")
        psi = np.array(self.psi, dtype=complex)
        if psi.shape != (2,) + self.lattice.grid_shape:
            raise LatticeError(f"psi shape {psi.shape} does not match the grid")
        flux = np.array(as_flux(self.flux).array(), dtype=complex)
        if np.any(flux.imag != 0):
            raise ValueError("spinor fields need real quasimomenta")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "flux", flux.real.copy())

    @property
    def multipliers(self) -> MultiplierMap:
        return as_flux(self.flux).multipliers()

    @property
    def wavevector(self) -> np.ndarray:
        return self.lattice.to_wavevector(self.flux).real

    def bloch_phase(self) -> np.ndarray:
        s1, s2 = self.lattice.lattice_coords
        return np.exp(1j * (self.flux[0] * s1 + self.flux[1] * s2))

    def periodic_part(self) -> np.ndarray:
        """``φ = e^{−i k·x} ψ`` (doubly periodic)."""
        return self.psi * np.conj(self.bloch_phase())

    def has_real_multipliers(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(np.exp(2j * self.flux) - 1) <= tol))

    @classmethod
    def from_kernel(cls, lattice: TorusLattice, vector: np.ndarray, flux, window_shift=(0, 0)) -> "SpinorField":
        """Spinor from a Galerkin kernel vector ``(ψ₁ modes, ψ₂ modes)``.

        ``flux`` and ``window_shift`` are those of the assembled operator, so
        the mode ``n`` carries wavevector ``E^{-T}(κ − 2π shift) + K_n``.
        """
        M = lattice.mode_count
        vector = np.asarray(vector, dtype=complex)
        if vector.shape != (2 * M,):
            raise ValueError(f"kernel vector must have length {2 * M}")
        kap = as_flux(flux).array() - 2 * np.pi * np.asarray(window_shift)
        G = lattice.grid_size
        idx = tuple(np.moveaxis(np.mod(lattice.modes, G), -1, 0))
        psi = np.empty((2, G, G), dtype=complex)
        for c in range(2):
            spec = np.zeros((G, G), dtype=complex)
            spec[idx] = vector[c * M : (c + 1) * M]
            psi[c] = np.fft.ifftn(spec) * G * G
        field = cls(lattice, psi, kap)
        return cls(lattice, psi * field.bloch_phase(), kap)

    @classmethod
    def from_function(cls, lattice: TorusLattice, func, flux) -> "SpinorField":
        """Sample ``func(s1, s2) -> (ψ₁, ψ₂)`` (lattice coordinates) on the grid."""
        s1, s2 = lattice.lattice_coords
        p1, p2 = func(s1, s2)
        shape = lattice.grid_shape
        return cls(lattice, np.stack([np.broadcast_to(p1, shape), np.broadcast_to(p2, shape)]), flux)

    @classmethod
    def random(cls, lattice: TorusLattice, rng: np.random.Generator, flux=(0.0, 0.0), band: int = 3) -> "SpinorField":
        """Band-limited random spinor (not a Dirac solution; a negative control)."""
        G = lattice.grid_size
        if 2 * band + 1 >= G // 2:
            raise ValueError("band too wide for the grid")
        psi = np.empty((2, G, G), dtype=complex)
        r = np.arange(-band, band + 1) % G
        for c in range(2):
            spec = np.zeros((G, G), dtype=complex)
            spec[np.ix_(r, r)] = rng.normal(size=(len(r), len(r))) + 1j * rng.normal(size=(len(r), len(r)))
            psi[c] = np.fft.ifftn(spec) * G
        field = cls(lattice, psi, flux)
        return cls(lattice, psi * field.bloch_phase(), flux)

    def scaled(self, c) -> "SpinorField":
        return SpinorField(self.lattice, complex(c) * self.psi, self.flux)

    def rotated(self, g: np.ndarray) -> "SpinorField":
        """SU(2) action ``u ↦ g u`` on ``u = (ψ̄₂, ψ₁)``; rotates the surface by ``su2_to_so3(g)``."""
        g = np.asarray(g, dtype=complex)
        if g.shape != (2, 2) or not np.allclose(g @ g.conj().T, np.eye(2), atol=1e-13) or abs(np.linalg.det(g) - 1) > 1e-13:
            raise ValueError("g must be in SU(2)")
        u0, u1 = np.conj(self.psi[1]), self.psi[0]
        v0 = g[0, 0] * u0 + g[0, 1] * u1
        v1 = g[1, 0] * u0 + g[1, 1] * u1
        return SpinorField(self.lattice, np.stack([v1, np.conj(v0)]), self.flux)

    def bilinear_periodicity_defect(self) -> float:
        """``max_j |μ_j² − 1|``: the densities ψ₁², ψ̄₂², ψ₁ψ̄₂ are periodic iff this vanishes."""
        return float(np.max(np.abs(np.exp(2j * self.flux) - 1)))


def su2_matrix(alpha: complex, beta: complex) -> np.ndarray:
    """``[[α, β], [−β̄, ᾱ]]`` normalised to ``|α|² + |β|² = 1``."""
    n = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
    a, b = complex(alpha) / n, complex(beta) / n
    return np.array([[a, b], [-b.conjugate(), a.conjugate()]])


def encode(x) -> np.ndarray:
    """Traceless anti-Hermitian matrix with :func:`decode` equal to ``x``."""
    x1, x2, x3 = (float(v) for v in x)
    w = x1 - 1j * x2
    return np.array([[1j * x3, -np.conj(w)], [w, -1j * x3]])


def decode(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X)
    return np.array([X[..., 1, 0].real, -X[..., 1, 0].imag, X[..., 0, 0].imag])


def su2_to_so3(g: np.ndarray) -> np.ndarray:
    """Rotation ``R`` with ``decode(g encode(x) g⁻¹) = R x``."""
    g = np.asarray(g, dtype=complex)
    gi = np.linalg.inv(g)
    return np.stack([decode(g @ encode(e) @ gi) for e in np.eye(3)], axis=1)


def _spectral(values: np.ndarray) -> np.ndarray:
    return np.fft.fft2(values)


def _apply_symbol(lattice: TorusLattice, values: np.ndarray, which: str, shift=None) -> np.ndarray:
    """Apply ``∂`` or ``∂̄`` to periodic grid data, with an optional constant wavevector shift."""
    n = _fft_modes(lattice)
    xi = np.moveaxis(np.tensordot(lattice.dual, n, axes=1), 0, -1)
    if shift is not None:
        xi = xi + np.asarray(shift)
    sd, sdb = symbols(xi)
    sym = sd if which == "d" else sdb
    G = lattice.grid_size
    nyq = np.any(np.abs(n) == G // 2, axis=0)
    sym = np.where(nyq, 0, sym) if shift is None else sym
    return np.fft.ifft2(sym * _spectral(values))


def _require_real_potential(U: PeriodicScalarField) -> np.ndarray:
    if not U.is_real(1e-12):
        raise ValueError("the R³ representation needs a real potential")
    return U.samples().real


def dirac_residual(U: PeriodicScalarField, psi: SpinorField) -> float:
    """Max grid value of ``|Uψ₁ + ∂ψ₂|`` and ``|−∂̄ψ₁ + Ūψ₂|`` by spectral differentiation."""
    if U.lattice != psi.lattice:
        raise LatticeError("potential and spinor live on different lattices")
    lat = psi.lattice
    phi = psi.periodic_part()
    k = psi.wavevector
    u = U.samples()
    ub = np.conj(u)
    r1 = u * phi[0] + _apply_symbol(lat, phi[1], "d", k)
    r2 = -_apply_symbol(lat, phi[0], "db", k) + ub * phi[1]
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))


def _densities(psi: SpinorField):
    """``F`` entries (periodic when the multipliers are ±1)."""
    p1, p2 = psi.psi
    F = np.empty((2, 2) + p1.shape, dtype=complex)
    F[0, 0] = np.conj(p2) * p1
    F[0, 1] = -np.conj(p2) ** 2
    F[1, 0] = p1**2
    F[1, 1] = -p1 * np.conj(p2)
    return F


def closedness_residual(psi: SpinorField) -> float:
    """``max |∂̄F − ∂F†|`` over the grid and the four matrix entries."""
    if not psi.has_real_multipliers():
        raise ValueError("closedness needs multipliers ±1")
    lat = psi.lattice
    F = _densities(psi)
    worst = 0.0
    for i in range(2):
        for j in range(2):
            f = F[i, j]
            g = np.conj(F[j, i])
            d = _apply_symbol(lat, f, "db") - _apply_symbol(lat, g, "d")
            worst = max(worst, float(np.max(np.abs(d))))
    return worst


@dataclass(frozen=True, eq=False)
class ImmersionMesh:
    """Integrated surface over one fundamental domain.

    ``points`` has shape ``(G+1, G+1, 3)`` (closure row/column included);
    per-vertex fields live on the ``(G, G)`` fundamental grid.
    ``mean_curvature`` is NaN at degenerate points.
    """

    lattice: TorusLattice
    points: np.ndarray
    periods: np.ndarray
    period_spread: float
    conformal_factor: np.ndarray
    mean_curvature: np.ndarray
    degenerate: np.ndarray
    multipliers: MultiplierMap
    base_index: tuple[int, int]
    order: str
    metadata: dict = field(default_factory=dict)

    @property
    def closed(self) -> bool:
        return bool(np.all(np.linalg.norm(self.periods, axis=1) < 1e-6))


def _one_form(psi: SpinorField) -> tuple[np.ndarray, np.ndarray]:
    """``dx/ds_j`` in R³ for ``j = 1, 2``, shape ``(2, 3, G, G)`` as real arrays."""
    p1, p2 = psi.psi
    out = []
    for e in psi.lattice.periods:
        w = 1j * (p1**2 * e - p2**2 * np.conj(e))
        x3 = 2.0 * (p1 * np.conj(p2) * e).real
        out.append(np.stack([w.real, -w.imag, x3]))
    return np.stack(out)


def _primitive(f: np.ndarray, axis: int, start: int) -> np.ndarray:
    """``∫_{t_start}^{t_k} f dt`` at ``t_k = k/G`` for ``k = 0..G`` along ``axis`` (spectral, periodic f)."""
    f = np.moveaxis(f, axis, -1)
    G = f.shape[-1]
    c = np.fft.fft(f, axis=-1) / G
    n = np.fft.fftfreq(G, 1.0 / G)
    t = np.arange(G + 1) / G
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(n == 0, 0, 1.0 / (2j * np.pi * n))
    w[np.abs(n) == G // 2] = 0
    waves = np.exp(2j * np.pi * np.outer(n, t))
    P = np.tensordot(c * w, waves, axes=([-1], [0])).real + c[..., :1].real * t
    P = P - P[..., start : start + 1]
    return np.moveaxis(P, -1, axis)


def integrate_immersion(
    U: PeriodicScalarField,
    psi: SpinorField,
    base_index=(0, 0),
    X0=(0.0, 0.0, 0.0),
    order: str = "rows",
    threshold: float = CLOSEDNESS_THRESHOLD,
) -> ImmersionMesh:
    """Integrate the Weierstrass form on the grid.

    ``order="rows"`` integrates along the base row (``s₁`` direction) first and
    then up every column; ``"columns"`` is the transposed route, kept for
    verification.
    """
    if U.lattice != psi.lattice:
        raise LatticeError("potential and spinor live on different lattices")
    u = _require_real_potential(U)
    if not psi.has_real_multipliers():
        raise ValueError("the immersion needs multipliers ±1")
    res = closedness_residual(psi)
    if res > threshold:
        raise ClosednessError(f"closedness residual {res:.3e} exceeds {threshold:.1e}")
    lat = psi.lattice
    G = lat.grid_size
    i0, j0 = (int(b) % G for b in base_index)
    om = _one_form(psi)
    if order == "rows":
        row = _primitive(om[0][:, :, j0], axis=1, start=i0)
        cols = _primitive(om[1], axis=2, start=j0)
        cols = np.concatenate([cols, cols[:, :1]], axis=1)
        X = row[:, :, None] + cols
    elif order == "columns":
        col = _primitive(om[1][:, i0, :], axis=1, start=j0)
        rows = _primitive(om[0], axis=1, start=i0)
        rows = np.concatenate([rows, rows[:, :, :1]], axis=2)
        X = col[:, None, :] + rows
    else:
        raise ValueError("order must be 'rows' or 'columns'")
    X = X + np.asarray(X0, dtype=float)[:, None, None]
    points = np.moveaxis(X, 0, -1)
    P1 = points[G, :, :] - points[0, :, :]
    P2 = points[:, G, :] - points[:, 0, :]
    periods = np.stack([P1.mean(axis=0), P2.mean(axis=0)])
    spread = float(max(np.max(np.abs(P1 - periods[0])), np.max(np.abs(P2 - periods[1]))))
    ea = np.abs(psi.psi[0]) ** 2 + np.abs(psi.psi[1]) ** 2
    degenerate = ea < DEGENERATE_THRESHOLD
    with np.errstate(divide="ignore", invalid="ignore"):
        H = np.where(degenerate, np.nan, 2.0 * u / ea)
    return ImmersionMesh(
        lat,
        points,
        periods,
        spread,
        ea**2,
        H,
        degenerate,
        psi.multipliers,
        (i0, j0),
        order,
        {"closedness_residual": res, "degenerate_points": int(degenerate.sum())},
    )


@dataclass(frozen=True)
class WillmoreResult:
    direct: float
    geometric: float | None

    @property
    def relative_difference(self) -> float | None:
        if self.geometric is None:
            return None
        return abs(self.direct - self.geometric) / max(abs(self.direct), 1e-300)


def willmore(U: PeriodicScalarField, lattice: TorusLattice | None = None, mesh: ImmersionMesh | None = None) -> WillmoreResult:
    """``W = 4∫U² dxdy`` and, given a mesh, ``∫H² e^{2α} dxdy`` (grid quadrature)."""
    lattice = lattice or U.lattice
    if U.lattice != lattice:
        raise LatticeError("potential lives on a different lattice")
    u = _require_real_potential(U)
    direct = 4.0 * lattice.area * float(np.mean(u**2))
    geometric = None
    if mesh is not None:
        if mesh.lattice != lattice:
            raise LatticeError("mesh lives on a different lattice")
        if np.any(mesh.degenerate):
            raise ValueError("mesh has degenerate points; H is undefined there")
        geometric = lattice.area * float(np.mean(mesh.mean_curvature**2 * mesh.conformal_factor))
    return WillmoreResult(direct, geometric)


def metric_defect(mesh: ImmersionMesh) -> float:
    """Max mismatch between squared edge lengths and ``e^{2α}|e_j|² h²`` (relative to ``h²``).

    The midpoint conformal factor is the average of the edge endpoints, so
    the defect is ``O(h²)`` for a smooth immersion.
    """
    lat = mesh.lattice
    G = lat.grid_size
    h = 1.0 / G
    pts = mesh.points[:G, :G]
    cf = mesh.conformal_factor
    worst = 0.0
    for j, e in enumerate(lat.periods):
        step = mesh.points[1 : G + 1, :G] if j == 0 else mesh.points[:G, 1 : G + 1]
        d2 = np.sum((step - pts) ** 2, axis=-1) / h**2
        mid = 0.5 * (cf + np.roll(cf, -1, axis=j)) * abs(e) ** 2
        worst = max(worst, float(np.max(np.abs(d2 - mid))))
    return worst


def write_obj(mesh: ImmersionMesh, path) -> Path:
    """Vertices (row-major, closure included) and quad faces."""
    n = mesh.points.shape[0]
    lines = ["# immersion mesh", f"# vertices {n * n}"]
    for p in mesh.points.reshape(-1, 3):
        lines.append("v " + " ".join(format(float(c), ".17g") for c in p))
    for i in range(n - 1):
        for j in range(n - 1):
            a = i * n + j + 1
            lines.append(f"f {a} {a + n} {a + n + 1} {a + 1}")
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_sidecar(mesh: ImmersionMesh, path, willmore_result: WillmoreResult | None = None) -> Path:
    data = {
        "periods": mesh.periods,
        "period_spread": mesh.period_spread,
        "closed": mesh.closed,
        "multipliers": list(mesh.multipliers.values),
        "base_index": list(mesh.base_index),
        "order": mesh.order,
        "willmore_direct": None if willmore_result is None else willmore_result.direct,
        "willmore_geometric": None if willmore_result is None else willmore_result.geometric,
        **mesh.metadata,
    }
    return write_json(path, data)
