"""Two-dimensional Dirac operators with doubly periodic potential under Bloch conditions.

The operator is

    𝒟 = [[U, ∂], [−∂̄, Ū]],   ∂ = (∂_x − i∂_y)/2,  ∂̄ = (∂_x + i∂_y)/2,

acting on spinors ``ψ = exp(i k·x) φ`` with ``φ`` periodic.  On the Fourier
mode ``exp(i ξ·x)`` the symbols are ``σ(∂) = i(ξ₁ − iξ₂)/2`` and
``σ(∂̄) = i(ξ₁ + iξ₂)/2``; for constant ``U = c`` a single mode is in the
kernel iff ``σ(∂)σ(∂̄) = −c²``, i.e. ``ξ₁² + ξ₂² = 4c²``.

Near the asymptotic end ``k₂ ≈ i k₁`` the local parameter is
``λ = σ(∂)(k)`` and the log-multiplier of a lattice vector ``v`` (as a complex
number) behaves as ``λ v + C₀ v̄ / λ + O(λ⁻²)`` with ``C₀ = −⟨U²⟩``; on the
other end ``λ = σ(∂̄)(k)`` and the roles of ``v`` and ``v̄`` swap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .numerics import ConvergenceError, LaurentFit, LogDet, fit_laurent, logdet, newton_zero, wrap_phase
from .torus import (
    FluxVector,
    LatticeError,
    MultiplierMap,
    PeriodicScalarField,
    TorusLattice,
    as_flux,
    constant_field,
    convolution_matrix,
)

__all__ = [
    "BlochDiracOperator",
    "DiracPencil",
    "SpectralCurvePoint",
    "CurveTrace",
    "C0Fit",
    "QuadraticFormZ2",
    "SingularReferenceError",
    "FitError",
    "assemble_dirac",
    "dirac_determinant",
    "free_dirac_logdet",
    "kernel_vector",
    "trace_curve",
    "multipliers",
    "fit_c0",
    "c0_integral",
    "default_lambda_min",
    "symbols",
    "constant_curve_residual",
    "spinor_form",
    "CALIBRATION",
]

# Fixed once against the constant-potential closed form; see module docstring.
CALIBRATION = {"log_multiplier_sign": 1, "lambda_scale": 1.0, "local_parameter": "symbol of d/dz (+ end), d/dzbar (- end)"}


class SingularReferenceError(ZeroDivisionError):
    """The free reference operator is singular at the requested point."""


class FitError(RuntimeError):
    pass


def symbols(xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fourier symbols ``(σ(∂), σ(∂̄))`` for wavevectors ``xi`` of shape ``(..., 2)``."""
    xi = np.asarray(xi, dtype=complex)
    return 0.5j * (xi[..., 0] - 1j * xi[..., 1]), 0.5j * (xi[..., 0] + 1j * xi[..., 1])


class DiracPencil:
    """Potential blocks of the Dirac matrix, reusable across ``(κ, E)``."""

    def __init__(self, lattice: TorusLattice, potential: PeriodicScalarField | None):
        if lattice.dim != 2:
            raise LatticeError("Dirac operators need a 2D lattice")
        if potential is None:
            potential = constant_field(lattice, 0.0)
        if potential.lattice != lattice:
            raise LatticeError("potential lives on a different lattice")
        self.lattice = lattice
        self.potential = potential
        modes = lattice.modes
        self.T = convolution_matrix(potential.spectrum, modes)
        self.Tbar = convolution_matrix(potential.conj().spectrum, modes)
        self.K = lattice.wavevectors()

    def wavevectors(self, flux, recenter: bool = True) -> tuple[np.ndarray, tuple[int, int]]:
        k = as_flux(flux).array()
        if k.size != 2:
            raise ValueError("Dirac flux needs two components")
        shift = np.zeros(2, dtype=int)
        if recenter:
            shift = np.rint(k.real / (2 * np.pi)).astype(int)
            k = k - 2 * np.pi * shift
        xi = self.lattice.to_wavevector(k)[None, :] + self.K
        return xi, (int(shift[0]), int(shift[1]))

    def matrix(self, flux, energy=0.0, recenter: bool = True) -> tuple[np.ndarray, np.ndarray, tuple[int, int]]:
        xi, shift = self.wavevectors(flux, recenter)
        sd, sdb = symbols(xi)
        M = len(self.K)
        E = complex(energy)
        H = np.empty((2 * M, 2 * M), dtype=complex)
        H[:M, :M] = self.T
        H[M:, M:] = self.Tbar
        H[:M, M:] = np.diag(sd)
        H[M:, :M] = -np.diag(sdb)
        if E != 0:
            H[np.diag_indices(2 * M)] -= E
        return H, xi, shift

    def free_logdet(self, xi: np.ndarray, energy) -> LogDet:
        sd, sdb = symbols(xi)
        E = complex(energy)
        per_mode = E * E + sd * sdb
        if np.any(per_mode == 0):
            return LogDet(-math.inf, 0.0)
        return LogDet(float(np.sum(np.log(np.abs(per_mode)))), wrap_phase(float(np.sum(np.angle(per_mode)))))

    def relative_logdet(self, flux, energy=0.0, reference_shift: float = 0.0, recenter: bool = True) -> LogDet:
        H, xi, _ = self.matrix(flux, energy, recenter)
        ref = self.free_logdet(xi, complex(energy) + 1j * reference_shift)
        if ref.singular:
            raise SingularReferenceError("free Dirac reference is singular here; shift the energy")
        return logdet(H) - ref


@dataclass(frozen=True, eq=False)
class BlochDiracOperator:
    lattice: TorusLattice
    potential: PeriodicScalarField
    flux: FluxVector
    energy: complex
    matrix: np.ndarray
    wavevectors: np.ndarray
    window_shift: tuple[int, int]


def assemble_dirac(lattice: TorusLattice, potential, flux, energy=0.0, recenter: bool = True) -> BlochDiracOperator:
    """Galerkin matrix ``[[U − E, σ(∂)], [−σ(∂̄), Ū − E]]`` on the mode block.

    Spinor coefficients are ordered ``(ψ₁ modes, ψ₂ modes)``; the symbols are
    taken at ``ξ_n = E^{-T} κ + K_n``.  With ``recenter`` the real part of
    ``κ`` is reduced mod ``2π`` first, so ``κ`` and ``κ + 2π e_m`` give the
    same matrix; without it the window is centred on ``κ`` itself, which is
    what curve tracing at large quasimomenta needs.
    """
    pencil = DiracPencil(lattice, potential)
    H, xi, shift = pencil.matrix(flux, energy, recenter)
    return BlochDiracOperator(lattice, pencil.potential, as_flux(flux), complex(energy), H, xi, shift)


def free_dirac_logdet(lattice: TorusLattice, flux, energy=0.0, recenter: bool = True) -> LogDet:
    pencil = DiracPencil(lattice, None)
    xi, _ = pencil.wavevectors(flux, recenter)
    return pencil.free_logdet(xi, energy)


def dirac_determinant(
    lattice: TorusLattice, potential, flux, energy=0.0, reference_shift: float = 0.0, recenter: bool = True
) -> LogDet:
    """Determinant relative to the free operator at the same ``(κ, E + i·reference_shift)``."""
    return DiracPencil(lattice, potential).relative_logdet(flux, energy, reference_shift, recenter)


def kernel_vector(matrix: np.ndarray, iterations: int = 3, seed: int = 0) -> tuple[np.ndarray, float]:
    """Approximate null vector by inverse iteration; returns ``(v, ‖Mv‖/‖M‖_F)``."""
    M = np.asarray(matrix)
    n = M.shape[0]
    norm = np.linalg.norm(M)
    lu = scipy.linalg.lu_factor(M + 1e-14 * norm * np.eye(n), check_finite=False)
    rng = np.random.default_rng(seed)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    for _ in range(iterations):
        v = scipy.linalg.lu_solve(lu, v, check_finite=False)
        v = v / np.linalg.norm(v)
    return v, float(np.linalg.norm(M @ v) / norm)


@dataclass(frozen=True, eq=False)
class SpectralCurvePoint:
    k: np.ndarray
    flux: FluxVector
    residual: float
    det_log10: float
    kernel: np.ndarray | None
    kernel_residual: float
    branch: str
    lam: complex | None = None

    @property
    def multipliers(self) -> MultiplierMap:
        return self.flux.multipliers()


def multipliers(point: SpectralCurvePoint) -> MultiplierMap:
    return point.flux.multipliers()


@dataclass(eq=False)
class CurveTrace:
    points: list[SpectralCurvePoint]
    failures: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return not self.failures


def default_lambda_min(potential: PeriodicScalarField | None) -> float:
    """Default start of the traced range, ``8(1 + ‖U‖_∞)``."""
    if potential is None:
        return 8.0
    return 8.0 * (1.0 + potential.max_abs())


def _branch_sign(branch: str) -> int:
    if branch in ("+", "plus", 1):
        return 1
    if branch in ("-", "minus", -1):
        return -1
    raise ValueError(f"unknown branch {branch!r}")


def _local_parameter(k: np.ndarray, sign: int) -> complex:
    sd, sdb = symbols(np.asarray(k))
    return complex(sd if sign > 0 else sdb)


def trace_curve(
    lattice: TorusLattice,
    potential: PeriodicScalarField | None,
    branch: str = "+",
    lambda_range: tuple[float, float] | None = None,
    steps: int = 24,
    ray_angle: float = 0.3,
    epsilon: float = 1.0,
    tol: float = 1e-10,
    residual_tol: float = 1e-8,
    kernel_tol: float = 1e-7,
    guard: float = 0.5,
    max_halvings: int = 6,
    with_kernel: bool = True,
) -> CurveTrace:
    """Trace the zero-energy spectral curve near one asymptotic end.

    Samples ``|λ|`` on ``lambda_range`` along the ray ``arg λ = ray_angle``.
    For each sample ``k₁`` is fixed by the free seed and ``k₂`` is found by
    Newton on the determinant relative to the free operator at ``E = iε``;
    the previous correction ``k₂ ∓ i k₁`` (rescaled by ``k₁``) seeds the next
    solve.  A failed solve halves the step up to ``max_halvings`` times, then
    the trace is truncated and the failure recorded.
    """
    sign = _branch_sign(branch)
    if lambda_range is None:
        lmin = default_lambda_min(potential)
        lambda_range = (lmin, 4 * lmin)
    lo, hi = float(lambda_range[0]), float(lambda_range[1])
    if lo <= 0 or hi <= lo:
        raise ValueError("lambda_range must satisfy 0 < lo < hi")
    pencil = DiracPencil(lattice, potential)
    rot = complex(math.cos(ray_angle), math.sin(ray_angle))
    tag = "+" if sign > 0 else "-"
    trace = CurveTrace(
        [],
        [],
        {
            "branch": tag,
            "lambda_range": [lo, hi],
            "steps": steps,
            "ray_angle": ray_angle,
            "epsilon": epsilon,
            "newton_tol": tol,
            "residual_tol": residual_tol,
            "kernel_tol": kernel_tol,
            "calibration": dict(CALIBRATION),
        },
    )

    def solve(r: float, prev: SpectralCurvePoint | None) -> SpectralCurvePoint:
        lam_seed = r * rot
        k1 = -1j * lam_seed
        k2 = sign * 1j * k1
        if prev is not None:
            dev = prev.k[1] - sign * 1j * prev.k[0]
            k2 = k2 + dev * (prev.k[0] / k1)

        def f(z):
            kap = lattice.to_flux(np.array([k1, z]))
            return pencil.relative_logdet(kap, 0.0, epsilon, recenter=False).value()

        res = newton_zero(f, k2, tol=tol)
        z = res.root
        resid = abs(f(z))
        for _ in range(3):
            if resid <= residual_tol:
                break
            z = newton_zero(f, z, tol=tol * 1e-2).root
            resid = abs(f(z))
        if resid > residual_tol:
            raise ConvergenceError(f"relative determinant {resid:.2e} above tolerance")
        k = np.array([k1, z])
        kap = lattice.to_flux(k)
        ld = pencil.relative_logdet(kap, 0.0, epsilon, recenter=False)
        vec, kres = None, float("nan")
        if with_kernel:
            H, _, _ = pencil.matrix(kap, 0.0, recenter=False)
            vec, kres = kernel_vector(H)
            if kres > kernel_tol:
                raise ConvergenceError(f"kernel certificate {kres:.2e} above tolerance")
        return SpectralCurvePoint(k, as_flux(kap), resid, ld.log10_magnitude, vec, kres, tag, _local_parameter(k, sign))

    def deviation(p: SpectralCurvePoint) -> float:
        return abs(p.k[1] - sign * 1j * p.k[0])

    targets = np.linspace(lo, hi, steps)
    prev: SpectralCurvePoint | None = None
    r_prev = None
    for r_target in targets:
        r_try = r_target
        point = None
        for h in range(max_halvings + 1):
            if h > 0:
                if r_prev is None:
                    break
                r_try = r_prev + (r_target - r_prev) / 2**h
            try:
                cand = solve(r_try, prev)
            except (ConvergenceError, SingularReferenceError) as exc:
                last = str(exc)
                continue
            if prev is not None:
                d0, d1 = deviation(prev), deviation(cand)
                floor = 1e-12 * abs(cand.k[0])
                if d1 > (1 + guard) * d0 + floor:
                    last = f"branch jump suspected at |lambda|={r_try:.6g} (deviation {d0:.3e} -> {d1:.3e})"
                    continue
            point = cand
            break
        if point is None:
            trace.failures.append(f"trace truncated at |lambda|={r_target:.6g}: {last}")
            break
        if r_try != r_target:
            trace.points.append(point)
            prev, r_prev = point, r_try
            try:
                point = solve(r_target, prev)
            except (ConvergenceError, SingularReferenceError) as exc:
                trace.failures.append(f"trace truncated at |lambda|={r_target:.6g}: {exc}")
                break
        trace.points.append(point)
        prev, r_prev = point, r_target
    return trace


@dataclass(frozen=True, eq=False)
class C0Fit:
    c0: complex
    leading: complex
    max_residual: float
    fit: LaurentFit
    vector: complex
    branch: str


def fit_c0(points, v: complex | None = None, extra_powers=(), lattice: TorusLattice | None = None) -> C0Fit:
    """Fit ``log μ(v)`` against ``λ`` near one end and return the ``λ⁻¹`` coefficient.

    ``log μ(v) = i⟨k, v⟩`` is taken from the traced wavevector (no branch cut).
    On the ``+`` end the model is ``λ v + C₀ v̄ / λ``; on the ``−`` end
    ``λ v̄ + C₀ v / λ``.  ``extra_powers`` (e.g. ``(-2,)``) absorb the tail.
    """
    points = list(points)
    if not points:
        raise FitError("empty trace")
    branch = points[0].branch
    if any(p.branch != branch for p in points):
        raise FitError("points from different branches")
    if v is None:
        v = complex(lattice.periods[0]) if lattice is not None else 1.0 + 0j
    v = complex(v)
    lam = np.array([p.lam for p in points])
    y = np.array([1j * (p.k[0] * v.real + p.k[1] * v.imag) for p in points])
    powers = (1, -1) + tuple(int(p) for p in extra_powers)
    fit = fit_laurent(lam, y, powers)
    paired = v.conjugate() if branch == "+" else v
    c0 = fit.coefficient(-1) / paired
    resid = np.abs(fit(lam) - y)
    noise = 1e-10 * float(np.max(np.abs(y)))
    half = len(resid) // 2
    if half >= 2 and resid.max() > noise and resid[half:].max() > resid[:half].max():
        raise FitError("residuals grow with |lambda|; the range is too close to the resonances")
    return C0Fit(c0, fit.coefficient(1), fit.max_residual, fit, v, branch)


def c0_integral(potential: PeriodicScalarField) -> float:
    """``−(1/Area) ∫ U²`` by grid quadrature (exact for band-limited U)."""
    s = potential.samples()
    return float(-np.mean(np.abs(s) ** 2))


def constant_curve_residual(point: SpectralCurvePoint, c: float) -> float:
    """``|σ(∂)σ(∂̄) + c²|`` at the traced wavevector (the constant-U curve)."""
    sd, sdb = symbols(point.k)
    return float(abs(sd * sdb + c * c))


_H1 = ((0, 0), (1, 0), (0, 1), (1, 1))


def _intersection(w1, w2) -> int:
    return (w1[0] * w2[1] + w1[1] * w2[0]) % 2


@dataclass(frozen=True)
class QuadraticFormZ2:
    """A ``Z₂``-valued form on ``H₁(T²; Z₂)``, stored by its four values."""

    values: tuple[int, int, int, int]

    def __call__(self, w) -> int:
        w = (int(w[0]) % 2, int(w[1]) % 2)
        return self.values[_H1.index(w)]

    def is_quadratic(self) -> bool:
        return all(
            self((a[0] + b[0], a[1] + b[1])) == (self(a) + self(b) + _intersection(a, b)) % 2 for a in _H1 for b in _H1
        )

    @property
    def arf(self) -> int:
        """Arf invariant (majority value); 1 only for the odd spin structure ``q₀``."""
        return int(sum(self.values) >= 3)


Q0 = QuadraticFormZ2((0, 1, 1, 1))


def spinor_form(nu) -> QuadraticFormZ2:
    """``q = q₀ + ν`` for the multiplier homomorphism ``ν`` given on ``(e₁, e₂)``."""
    n1, n2 = (int(x) % 2 for x in nu)
    return QuadraticFormZ2(tuple((Q0(w) + n1 * w[0] + n2 * w[1]) % 2 for w in _H1))


def spinor_form_from_multipliers(mult: MultiplierMap) -> QuadraticFormZ2:
    signs = mult.signs()
    if signs is None:
        raise ValueError("multipliers are not ±1")
    return spinor_form(tuple(0 if s == 1 else 1 for s in signs))
