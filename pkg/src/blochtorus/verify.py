"""Invariant suite behind ``blochtorus verify``.

Each check reports a measured deviation against a threshold.  Convergence
checks compare the configured truncation ``nmax`` with ``2 nmax``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import dirac, schrodinger
from .config import RunConfig
from .numerics import ConvergenceError, eigh
from .torus import field_from_function
from .weierstrass import willmore

__all__ = ["Check", "run_suite"]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool | None
    deviation: float
    threshold: float
    kind: str = "invariant"
    detail: str = ""

    def line(self) -> str:
        status = "SKIP" if self.passed is None else ("PASS" if self.passed else "FAIL")
        return f"{status} {self.name}: deviation={self.deviation:.3e} threshold={self.threshold:.1e} {self.detail}".rstrip()

    def as_dict(self) -> dict:
        return asdict(self)


def _check(name, dev, thr, kind="invariant", detail="") -> Check:
    dev = float(dev)
    return Check(name, bool(dev <= thr) if math.isfinite(dev) else False, dev, thr, kind, detail)


def _lowest(lattice, U, kappa, levels):
    op = schrodinger.assemble_schrodinger(lattice, U, kappa)
    return op.spectrum(min(levels, lattice.mode_count)).eigenvalues


def run_suite(cfg: RunConfig, seed: int = 0, levels: int = 8) -> list[Check]:
    """Run every applicable invariant on the configured lattice and potential."""
    rng = np.random.default_rng(seed)
    tol = cfg.tolerances
    lattice = cfg.lattice.build()
    U = cfg.potential.build(lattice)
    d = lattice.dim
    checks: list[Check] = []

    kappas = rng.uniform(-np.pi, np.pi, size=(16, d))
    dev = 0.0
    for kap in kappas:
        e0 = _lowest(lattice, U, kap, levels)
        for m in range(d):
            shifted = kap.copy()
            shifted[m] += 2 * np.pi
            dev = max(dev, float(np.max(np.abs(_lowest(lattice, U, shifted, levels) - e0))))
    checks.append(_check("flux-periodicity", dev, tol.spectral, detail="16 samples, kappa vs kappa+2pi e_m"))

    # exp(iκφ) widens every eigenfunction's spectrum, so gauge invariance is
    # only visible once the truncation resolves that spread; test at 2 nmax.
    fine = cfg.lattice.build(nmax=2 * lattice.nmax)
    Uf = cfg.potential.build(fine)
    phi = field_from_function(fine, lambda *s: 0.3 * np.sin(2 * np.pi * s[0]), real=True)
    dev = max(schrodinger.gauge_check(fine, Uf, kap, phi, levels=levels) for kap in kappas[:4])
    checks.append(_check("gauge-invariance", dev, tol.spectral, "convergence", f"phi = 0.3 sin(2 pi s1) at nmax {fine.nmax}"))

    if np.allclose(lattice.basis, np.eye(d), atol=0, rtol=0):
        dev = 0.0
        for _ in range(10):
            kap = rng.uniform(-np.pi, np.pi, d) + 1j * rng.uniform(-1, 1, d)
            dev = max(dev, schrodinger.two_route_check(lattice, U, kap))
        checks.append(_check("two-route-assembly", dev, 1e-13, detail="AB flux vs Bloch substitution"))
    else:
        checks.append(Check("two-route-assembly", None, 0.0, 0.0, detail="needs the unit torus"))

    if U.is_real(1e-12):
        w = willmore(U, lattice).direct
        parseval = 4.0 * lattice.area * float(np.sum(np.abs(U.spectrum) ** 2))
        checks.append(_check("willmore-two-route", abs(w - parseval) / max(abs(w), 1e-300) if w else abs(parseval), 1e-10,
                             detail="grid quadrature vs Parseval"))

    kap = kappas[0]
    op = schrodinger.assemble_schrodinger(lattice, U, kap)
    ev = eigh(op.matrix, k=min(5, lattice.mode_count)).eigenvalues
    energies = np.linspace(ev[0] - 1.0, ev[-1] + 1.0, 33)
    rec = schrodinger.bloch_variety_slice(lattice, U, [kap], energies)[0]
    zeros = np.array([z.real for z in rec.zeros])
    if len(zeros) >= len(ev):
        dev = float(np.max(np.abs(zeros[: len(ev)] - ev) / np.maximum(1.0, np.abs(ev))))
    else:
        dev = math.inf
    checks.append(_check("determinant-vs-eigh", dev, tol.spectral, detail="lowest 5 levels"))

    dev = 0.0
    for kap in kappas[:3]:
        e0 = _lowest(lattice, U, kap, levels)
        e1 = _lowest(fine, Uf, kap, levels)
        n = min(len(e0), len(e1))
        dev = max(dev, float(np.max(np.abs(e0[:n] - e1[:n]) / np.maximum(1.0, np.abs(e1[:n])))))
    checks.append(_check("convergence-bands", dev, tol.convergence, "convergence", f"nmax {lattice.nmax} vs {fine.nmax}"))

    if d == 2:
        kap = kappas[1] + 0.3j
        a = dirac.dirac_determinant(lattice, U, kap, reference_shift=tol.epsilon)
        b = dirac.dirac_determinant(lattice, U, kap + np.array([2 * np.pi, 0]), reference_shift=tol.epsilon)
        dev = abs(a.value() - b.value()) / max(abs(a.value()), 1e-300)
        checks.append(_check("dirac-quotient", dev, 1e-10, detail="kappa vs kappa+2pi e_1"))
        steps = 6
        try:
            t0 = dirac.trace_curve(lattice, U, "+", steps=steps, epsilon=tol.epsilon, tol=tol.newton)
            t1 = dirac.trace_curve(fine, Uf, "+", steps=steps, epsilon=tol.epsilon, tol=tol.newton)
        except ConvergenceError as exc:
            checks.append(Check("convergence-curve", False, math.inf, tol.convergence, "convergence", str(exc)))
        else:
            n = min(len(t0.points), len(t1.points))
            if n < steps or t0.failures or t1.failures:
                checks.append(Check("convergence-curve", False, math.inf, tol.convergence, "convergence",
                                    "; ".join(t0.failures + t1.failures)))
            else:
                dev = max(abs(p.k[1] - q.k[1]) for p, q in zip(t0.points, t1.points))
                checks.append(_check("convergence-curve", dev, tol.convergence, "convergence", "k2 drift on the + end"))
                c0a = dirac.fit_c0(t0.points, lattice=lattice).c0
                c0b = dirac.fit_c0(t1.points, lattice=fine).c0
                checks.append(_check("convergence-c0", abs(c0a - c0b), tol.convergence, "convergence", "fitted C0"))
                kres = max(p.kernel_residual for p in t0.points)
                checks.append(_check("kernel-certificate", kres, tol.kernel, detail="max |Mv|/|M|"))
    return checks
