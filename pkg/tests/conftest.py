"""Shared fixtures and independent oracles for the test suite."""
from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from blochtorus.torus import field_from_function, make_lattice
from blochtorus.weierstrass import SpinorField

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def unit1d():
    return make_lattice(1, 1.0, 16, 128)


@pytest.fixture
def unit2d():
    return make_lattice(2, (1, 1j), 6, 32)


def jacobi_eigenvalues(A: np.ndarray, tol: float = 1e-14, max_sweeps: int = 30) -> np.ndarray:
    """Cyclic Jacobi on the real symmetric embedding ``[[Re, −Im], [Im, Re]]``.

    Every eigenvalue of the Hermitian ``A`` appears twice in the embedding;
    the doubled list is collapsed by taking every other sorted value.
    """
    A = np.asarray(A, dtype=complex)
    S = np.block([[A.real, -A.imag], [A.imag, A.real]]).astype(float)
    n = S.shape[0]
    scale = np.linalg.norm(S)
    for _ in range(max_sweeps):
        off = math.sqrt(max(np.sum(S**2) - np.sum(np.diag(S) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = S[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (S[q, q] - S[p, p]) / (2 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                rp, rq = S[p, :].copy(), S[q, :].copy()
                S[p, :] = c * rp - s * rq
                S[q, :] = s * rp + c * rq
                cp, cq = S[:, p].copy(), S[:, q].copy()
                S[:, p] = c * cp - s * cq
                S[:, q] = s * cp + c * cq
    return np.sort(np.diag(S))[::2]


def leibniz_det(A: np.ndarray) -> complex:
    """Permutation-sum determinant for small matrices."""
    A = np.asarray(A)
    n = A.shape[0]
    total = 0j
    for perm in itertools.permutations(range(n)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        prod = 1 + 0j
        for i, j in enumerate(perm):
            prod *= A[i, j]
        total += (-1) ** inv * prod
    return total


def exact_kernel(lattice, a: float):
    """``U = π/2 + a cos 2πx`` with kernel ``ψ = (cos θ, −sin θ)``, ``θ = πx + (a/π) sin 2πx``, κ = (π, 0)."""
    U = field_from_function(lattice, lambda s1, s2: np.pi / 2 + a * np.cos(2 * np.pi * s1) + 0 * s2, real=True)

    def theta(s1):
        return np.pi * s1 + (a / np.pi) * np.sin(2 * np.pi * s1)

    psi = SpinorField.from_function(
        lattice, lambda s1, s2: (np.cos(theta(s1)) + 0 * s2, -np.sin(theta(s1)) + 0 * s2), (np.pi, 0.0)
    )
    return U, psi
