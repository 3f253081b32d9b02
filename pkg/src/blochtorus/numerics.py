"""Dense linear algebra and root finding used by the Bloch solvers.

Eigen- and LU-decompositions are delegated to LAPACK (via numpy/scipy);
this module adds the contracts the solvers rely on: Hermiticity checks,
residual certificates, log-scaled determinants with phase, a Newton
iteration with a finite-difference derivative, and Laurent fitting.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "HermitianSpectrum",
    "LogDet",
    "NewtonResult",
    "LaurentFit",
    "NotHermitianError",
    "ConvergenceError",
    "RankDeficiencyError",
    "eigh",
    "logdet",
    "newton_zero",
    "fit_laurent",
    "wrap_phase",
    "count_below",
]


class NotHermitianError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Newton iteration failed to converge."""


class RankDeficiencyError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class HermitianSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None
    max_residual: float = 0.0


def eigh(A, k: int | None = None, vectors: bool = False, hermitian_tol: float = 1e-12) -> HermitianSpectrum:
    """Ascending eigenvalues (and optionally eigenvectors) of a Hermitian matrix.

    Raises :class:`NotHermitianError` when ``‖A − A*‖ > hermitian_tol ‖A‖``.
    When vectors are requested each pair is checked against
    ``‖Av − λv‖ <= 1e-9 ‖A‖``.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("square matrix required")
    norm = np.linalg.norm(A)
    if norm > 0 and np.linalg.norm(A - A.conj().T) > hermitian_tol * norm:
        raise NotHermitianError("matrix is not Hermitian")
    H = 0.5 * (A + A.conj().T)
    n = H.shape[0]
    sel = None if k is None or k >= n else (0, k - 1)
    if vectors:
        w, v = scipy.linalg.eigh(H, subset_by_index=sel, driver="evr" if sel else "evd")
        res = np.linalg.norm(H @ v - v * w, axis=0)
        worst = float(res.max(initial=0.0))
        if worst > 1e-9 * max(norm, 1.0):
            raise np.linalg.LinAlgError(f"eigenpair residual {worst:.3e} too large")
        return HermitianSpectrum(w, v, worst)
    w = scipy.linalg.eigh(H, eigvals_only=True, subset_by_index=sel, driver="evr" if sel else "evd")
    return HermitianSpectrum(np.asarray(w))


def wrap_phase(p: float) -> float:
    """Map a phase into ``(−π, π]``."""
    q = math.remainder(p, 2 * math.pi)
    return math.pi if q == -math.pi else q


@dataclass(frozen=True)
class LogDet:
    """``det = exp(log_magnitude + i·phase)``; ``log_magnitude = -inf`` marks singular."""

    log_magnitude: float
    phase: float

    @property
    def singular(self) -> bool:
        return self.log_magnitude == -math.inf

    def value(self) -> complex:
        if self.singular:
            return 0j
        return complex(math.exp(self.log_magnitude) * complex(math.cos(self.phase), math.sin(self.phase)))

    @property
    def log10_magnitude(self) -> float:
        return self.log_magnitude / math.log(10.0)

    def __sub__(self, other: "LogDet") -> "LogDet":
        if other.singular:
            raise ZeroDivisionError("reference determinant is singular")
        if self.singular:
            return LogDet(-math.inf, 0.0)
        return LogDet(self.log_magnitude - other.log_magnitude, wrap_phase(self.phase - other.phase))

    def __add__(self, other: "LogDet") -> "LogDet":
        if self.singular or other.singular:
            return LogDet(-math.inf, 0.0)
        return LogDet(self.log_magnitude + other.log_magnitude, wrap_phase(self.phase + other.phase))


def logdet(A) -> LogDet:
    """Log-magnitude and phase of ``det A`` from a partially pivoted LU.

    The magnitude is accumulated as a sum of logs so it never overflows.  A
    pivot below one ulp of the largest entry counts as numerically singular
    and yields ``log_magnitude = -inf``.
    """
    A = np.asarray(A)
    if A.shape == (0, 0):
        return LogDet(0.0, 0.0)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    scale = float(np.max(np.abs(A)))
    if scale == 0.0:
        return LogDet(-math.inf, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    d = np.diagonal(lu)
    mag = np.abs(d)
    if np.any(mag <= np.finfo(float).eps * scale):
        return LogDet(-math.inf, 0.0)
    swaps = int(np.count_nonzero(piv != np.arange(len(piv))))
    phase = float(np.sum(np.angle(d))) + (math.pi if swaps % 2 else 0.0)
    return LogDet(float(np.sum(np.log(mag))), wrap_phase(phase))


def count_below(A, shift: float) -> int:
    """Number of eigenvalues of Hermitian ``A`` below ``shift`` (Sylvester inertia of ``A − shift``)."""
    A = np.asarray(A)
    _, D, _ = scipy.linalg.ldl(A - shift * np.eye(A.shape[0]), hermitian=True)
    count, i, n = 0, 0, D.shape[0]
    while i < n:
        if i + 1 < n and D[i + 1, i] != 0:
            count += int(np.sum(np.linalg.eigvalsh(D[i : i + 2, i : i + 2]) < 0))
            i += 2
        else:
            count += int(D[i, i].real < 0)
            i += 1
    return count


@dataclass(frozen=True)
class NewtonResult:
    root: complex
    residual: float
    iterations: int
    derivative: complex


def newton_zero(
    f: Callable[[complex], complex],
    z0: complex,
    tol: float = 1e-10,
    max_iter: int = 50,
    rel_step: float = 1e-6,
) -> NewtonResult:
    """Newton iteration for a zero of an analytic scalar function.

    The derivative is a central difference with step ``rel_step·max(1, |z|)``.
    Converged when the step is below ``tol·max(1, |z|)`` and
    ``|f(z)| <= tol·|f'(z)|·max(1, |z|)``; both tests are invariant under
    ``f -> c·f``.
    """
    z = complex(z0)
    fz = complex(f(z))
    dfz = 0j
    for it in range(1, max_iter + 1):
        if fz == 0:
            return NewtonResult(z, 0.0, it - 1, dfz)
        scale = max(1.0, abs(z))
        h = rel_step * scale
        dfz = (complex(f(z + h)) - complex(f(z - h))) / (2 * h)
        if dfz == 0 or not np.isfinite(dfz) or abs(dfz) * h <= 1e-300:
            raise ConvergenceError(f"derivative underflow at z={z}")
        step = fz / dfz
        z = z - step
        fz = complex(f(z))
        if not np.isfinite(fz):
            raise ConvergenceError(f"non-finite function value at z={z}")
        if abs(step) <= tol * scale and abs(fz) <= tol * abs(dfz) * max(1.0, abs(z)):
            return NewtonResult(z, abs(fz), it, dfz)
    raise ConvergenceError(f"no convergence after {max_iter} iterations (last z={z}, |f|={abs(fz):.3e})")


@dataclass(frozen=True, eq=False)
class LaurentFit:
    powers: tuple[int, ...]
    coefficients: np.ndarray
    max_residual: float

    def coefficient(self, power: int) -> complex:
        return complex(self.coefficients[self.powers.index(power)])

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex)
        return sum(c * lam**p for p, c in zip(self.powers, self.coefficients))


def fit_laurent(lam, y, powers: Sequence[int] = (1, -1)) -> LaurentFit:
    """Least-squares fit of ``y ≈ Σ c_p λ^p`` over the given integer powers.

    Needs at least twice as many samples as coefficients and distinct ``λ``.
    Columns are normalised before the solve; a numerically rank-deficient
    design raises :class:`RankDeficiencyError`.
    """
    lam = np.asarray(lam, dtype=complex).ravel()
    y = np.asarray(y, dtype=complex).ravel()
    powers = tuple(int(p) for p in powers)
    if len(set(powers)) != len(powers):
        raise ValueError("duplicate powers")
    if lam.shape != y.shape:
        raise ValueError("lambda and y differ in length")
    if len(lam) < 2 * len(powers):
        raise ValueError(f"need >= {2 * len(powers)} samples, got {len(lam)}")
    if len(np.unique(np.round(lam, 14))) != len(lam) or np.any(lam == 0):
        raise ValueError("sample points must be distinct and nonzero")
    V = np.stack([lam**p for p in powers], axis=1)
    norms = np.linalg.norm(V, axis=0)
    Vn = V / norms
    s = np.linalg.svd(Vn, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise RankDeficiencyError("Laurent design matrix is rank deficient")
    c, *_ = np.linalg.lstsq(Vn, y, rcond=None)
    c = c / norms
    resid = float(np.max(np.abs(V @ c - y)))
    if np.all(lam.imag == 0) and np.all(y.imag == 0):
        c = c.real.astype(complex)
    return LaurentFit(powers, c, resid)
