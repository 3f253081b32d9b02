import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blochtorus.numerics import (
    ConvergenceError,
    LogDet,
    NotHermitianError,
    RankDeficiencyError,
    count_below,
    eigh,
    fit_laurent,
    logdet,
    newton_zero,
    wrap_phase,
)
from conftest import jacobi_eigenvalues, leibniz_det


def _hermitian(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (A + A.conj().T) / 2


def test_eigh_matches_jacobi_oracle(rng):
    A = _hermitian(rng, 50)
    w = eigh(A).eigenvalues
    assert np.max(np.abs(w - jacobi_eigenvalues(A))) < 1e-10


def test_eigh_vectors_and_subset(rng):
    A = _hermitian(rng, 20)
    spec = eigh(A, k=5, vectors=True)
    assert spec.eigenvectors.shape == (20, 5)
    assert np.allclose(A @ spec.eigenvectors, spec.eigenvectors * spec.eigenvalues, atol=1e-10)
    assert np.allclose(spec.eigenvalues, eigh(A).eigenvalues[:5])


def test_eigh_rejects_non_hermitian(rng):
    with pytest.raises(NotHermitianError):
        eigh(rng.normal(size=(4, 4)))


def test_logdet_matches_leibniz(rng):
    for n in (1, 3, 6):
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        ld = logdet(A)
        assert abs(ld.value() - leibniz_det(A)) < 1e-12 * max(1, abs(leibniz_det(A)))


def test_logdet_sign_of_permutation():
    P = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)  # even cycle
    assert logdet(P).value() == pytest.approx(1.0)
    assert logdet(P[[1, 0, 2]]).value() == pytest.approx(-1.0)


def test_logdet_singular_and_large():
    assert logdet(np.zeros((3, 3))).singular
    assert logdet(np.array([[1.0, 2.0], [2.0, 4.0]])).singular
    big = logdet(np.diag(np.full(400, 1e3)))
    assert big.log_magnitude == pytest.approx(400 * math.log(1e3))
    with pytest.raises(ZeroDivisionError):
        LogDet(0.0, 0.0) - LogDet(-math.inf, 0.0)


def test_wrap_phase():
    assert wrap_phase(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_phase(-math.pi) == pytest.approx(math.pi)
    assert wrap_phase(0.5) == 0.5


def test_count_below(rng):
    A = _hermitian(rng, 12)
    w = np.linalg.eigvalsh(A)
    for shift in (w[0] - 1, (w[3] + w[4]) / 2, w[-1] + 1):
        assert count_below(A, shift) == int(np.sum(w < shift))


def test_newton_zero_polynomial():
    res = newton_zero(lambda z: z**3 - 2, 1.0 + 0.1j)
    assert abs(res.root - 2 ** (1 / 3)) < 1e-10
    with pytest.raises(ConvergenceError):
        newton_zero(lambda z: z * z + 1, 0.0 + 0j, max_iter=3)  # f'(0) = 0


def test_fit_laurent_exact_synthetic():
    lam = np.linspace(10, 40, 20) * np.exp(0.3j)
    y = (1.5 - 0.2j) * lam + (-0.75 + 0.1j) / lam + 0.3 / lam**2
    fit = fit_laurent(lam, y, (1, -1, -2))
    assert abs(fit.coefficient(1) - (1.5 - 0.2j)) < 1e-10
    assert abs(fit.coefficient(-1) - (-0.75 + 0.1j)) < 1e-10
    assert abs(fit.coefficient(-2) - 0.3) < 1e-10


def test_fit_laurent_errors():
    lam = np.array([1.0, 2.0, 3.0, 4.0])
    with pytest.raises(ValueError):
        fit_laurent(lam[:3], lam[:3])
    with pytest.raises(ValueError):
        fit_laurent(np.array([1.0, 1.0, 2.0, 3.0]), lam)
    with pytest.raises(RankDeficiencyError):
        # λ⁴ is constant on these points, so the λ and λ⁻³ columns are proportional
        fit_laurent(2 * np.array([1, 1j, -1, -1j]), np.ones(4), (1, -3))


@settings(max_examples=25, deadline=None)
@given(
    a=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
    b=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
    r0=st.floats(2, 20),
    theta=st.floats(-1.5, 1.5),
)
def test_fit_laurent_recovers_random_coefficients(a, b, r0, theta):
    lam = np.linspace(r0, 4 * r0, 12) * np.exp(1j * theta)
    fit = fit_laurent(lam, a * lam + b / lam)
    assert abs(fit.coefficient(1) - a) <= 1e-10 * max(1, abs(a), abs(b))
    assert abs(fit.coefficient(-1) - b) <= 1e-10 * max(1, abs(a), abs(b)) * r0**2


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 12), seed=st.integers(0, 10_000))
def test_logdet_multiplicative(n, seed):
    r = np.random.default_rng(seed)
    A = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    B = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    lhs = logdet(A @ B)
    rhs = logdet(A) + logdet(B)
    assert lhs.log_magnitude == pytest.approx(rhs.log_magnitude, abs=1e-9)
    assert abs(wrap_phase(lhs.phase - rhs.phase)) < 1e-9
