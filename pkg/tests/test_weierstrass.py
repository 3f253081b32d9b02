import json

import numpy as np
import pytest

from blochtorus import potentials as P
from blochtorus.dirac import assemble_dirac, kernel_vector
from blochtorus.torus import field_from_function, make_lattice
from blochtorus.weierstrass import (
    ClosednessError,
    SpinorField,
    closedness_residual,
    decode,
    dirac_residual,
    encode,
    integrate_immersion,
    metric_defect,
    su2_matrix,
    su2_to_so3,
    willmore,
    write_obj,
    write_sidecar,
)
from conftest import exact_kernel


@pytest.fixture
def lat():
    return make_lattice(2, (1, 1j), 8, 64)


def test_exact_kernel_solves_dirac(lat):
    U, psi = exact_kernel(lat, 0.4)
    assert dirac_residual(U, psi) < 1e-12
    assert closedness_residual(psi) < 1e-12
    assert psi.multipliers.signs() == (-1, 1)
    assert psi.bilinear_periodicity_defect() < 1e-12


def test_galerkin_kernel_matches(lat):
    U, _ = exact_kernel(lat, 0.4)
    op = assemble_dirac(lat, U, (np.pi, 0.0))
    v, r = kernel_vector(op.matrix)
    assert r < 1e-12
    psi = SpinorField.from_kernel(lat, v, (np.pi, 0.0), op.window_shift)
    psi = psi.scaled(1 / np.abs(psi.psi).max())
    assert dirac_residual(U, psi) < 1e-7
    assert closedness_residual(psi) < 1e-7


def test_zero_potential_constant_spinor():
    lat = make_lattice(2, (1, 1j), 2, 16)
    psi = SpinorField.from_function(lat, lambda s1, s2: (1 + 0 * s1, 0 * s1), (0, 0))
    U = P.zero(lat)
    assert dirac_residual(U, psi) == 0.0
    mesh = integrate_immersion(U, psi)
    # plane: X affine, conformal factor 1, H = 0
    s1, s2 = np.meshgrid(np.arange(17) / 16, np.arange(17) / 16, indexing="ij")
    assert np.allclose(mesh.points[..., 0], -s2, atol=1e-14)
    assert np.allclose(mesh.points[..., 1], -s1, atol=1e-14)
    assert np.allclose(mesh.points[..., 2], 0, atol=1e-14)
    assert np.allclose(mesh.conformal_factor, 1) and np.allclose(mesh.mean_curvature, 0)


def test_random_spinor_negative_control(lat, rng):
    U, _ = exact_kernel(lat, 0.4)
    psi = SpinorField.random(lat, rng, (np.pi, 0.0))
    assert dirac_residual(U, psi) > 1e-2
    assert closedness_residual(psi) > 1e-2
    with pytest.raises(ClosednessError):
        integrate_immersion(U, psi)


def test_closedness_is_bilinear(lat, rng):
    psi = SpinorField.random(lat, rng, (0.0, 0.0))
    r = closedness_residual(psi)
    assert closedness_residual(psi.scaled(2.5 - 1j)) == pytest.approx(abs(2.5 - 1j) ** 2 * r, rel=1e-10)


def test_path_independence_and_periods(lat):
    U, psi = exact_kernel(lat, 0.4)
    a = integrate_immersion(U, psi, order="rows")
    b = integrate_immersion(U, psi, order="columns")
    assert np.max(np.abs(a.points - b.points)) < 1e-8
    assert a.period_spread < 1e-8
    # ψ only depends on x: the y-period is the cylinder axis
    assert np.linalg.norm(a.periods[1]) > 0.5


def test_round_cylinder_closes_in_x():
    lat = make_lattice(2, (1, 1j), 4, 32)
    U, psi = exact_kernel(lat, 0.0)
    mesh = integrate_immersion(U, psi)
    assert np.linalg.norm(mesh.periods[0]) < 1e-12
    assert not mesh.closed
    # constant mean curvature H = 2U e^{-α} = π on the cylinder of radius 1/(2π)... scaled by e^{α} = 1
    assert np.allclose(mesh.mean_curvature, np.pi)


def test_base_point_and_translation(lat):
    U, psi = exact_kernel(lat, 0.3)
    m0 = integrate_immersion(U, psi)
    m1 = integrate_immersion(U, psi, X0=(1.0, -2.0, 0.5))
    assert np.max(np.abs(m1.points - m0.points - [1.0, -2.0, 0.5])) < 1e-14
    m2 = integrate_immersion(U, psi, base_index=(5, 9))
    shift = m0.points[5, 9] - m2.points[5, 9]
    assert np.max(np.abs(m2.points + shift - m0.points)) < 1e-12
    assert np.allclose(m2.periods, m0.periods, atol=1e-12)


def test_su2_rotation_equivariance(lat):
    U, psi = exact_kernel(lat, 0.4)
    g = su2_matrix(0.3 + 0.4j, -0.5 + 0.2j)
    R = su2_to_so3(g)
    assert np.allclose(R @ R.T, np.eye(3), atol=1e-14) and np.linalg.det(R) == pytest.approx(1.0)
    rotated = psi.rotated(g)
    assert dirac_residual(U, rotated) < 1e-12
    assert rotated.multipliers.isclose(psi.multipliers)
    m0 = integrate_immersion(U, psi)
    m1 = integrate_immersion(U, rotated)
    assert np.max(np.abs(m1.points - m0.points @ R.T)) < 1e-9


def test_encode_decode_roundtrip():
    x = np.array([0.3, -1.2, 2.0])
    X = encode(x)
    assert np.allclose(X + X.conj().T, 0) and abs(np.trace(X)) == 0
    assert np.allclose(decode(X), x)


def test_metric_consistency_order():
    defects = []
    for G in (16, 32, 64):
        lat = make_lattice(2, (1, 1j), 2, G)
        U, psi = exact_kernel(lat, 0.4)
        defects.append(metric_defect(integrate_immersion(U, psi)))
    orders = np.log2(np.array(defects[:-1]) / np.array(defects[1:]))
    assert np.all(orders >= 1.9)


def test_willmore_values(lat):
    lc = make_lattice(2, (1, 1j), 2, 16)
    assert willmore(P.constant(lc, 1.5)).direct == pytest.approx(4 * 2.25, rel=1e-14)
    cosU = field_from_function(lc, lambda s1, s2: np.cos(2 * np.pi * s1) + 0 * s2, real=True)
    assert willmore(cosU).direct == pytest.approx(2.0, abs=1e-13)
    U, psi = exact_kernel(lat, 0.4)
    w = willmore(U, lat, integrate_immersion(U, psi))
    assert w.relative_difference < 1e-10
    with pytest.raises(ValueError):
        willmore(P.from_fourier(lc, [((1, 0), 1j)], real=False))


def test_complex_potential_rejected(lat):
    _, psi = exact_kernel(lat, 0.4)
    U = P.from_fourier(lat, [((0, 0), 1 + 1j)], real=False)
    with pytest.raises(ValueError):
        integrate_immersion(U, psi)


def test_obj_and_sidecar(tmp_path):
    lat = make_lattice(2, (1, 1j), 2, 16)
    U, psi = exact_kernel(lat, 0.2)
    mesh = integrate_immersion(U, psi)
    obj = write_obj(mesh, tmp_path / "m.obj").read_text().splitlines()
    assert sum(line.startswith("v ") for line in obj) == 17 * 17
    assert sum(line.startswith("f ") for line in obj) == 16 * 16
    side = json.loads(write_sidecar(mesh, tmp_path / "m.json", willmore(U, lat, mesh)).read_text())
    assert set(side) >= {"periods", "multipliers", "willmore_direct", "willmore_geometric"}
