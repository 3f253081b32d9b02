"""Command line front end: ``blochtorus run <config>`` and ``blochtorus verify <config>``.

Exit codes: 0 success, 2 schema violation (nothing written), 3 numerical
failure (artifacts flagged), 4 I/O error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pydantic

from . import __version__, dirac, schrodinger
from .config import ConfigError, RunConfig, load_config
from .conventions import CONVENTIONS, CONVENTIONS_VERSION
from .io import write_csv, write_json
from .numerics import ConvergenceError, RankDeficiencyError
from .torus import LatticeError, field_from_function
from .verify import run_suite
from .weierstrass import (
    ClosednessError,
    SpinorField,
    integrate_immersion,
    su2_matrix,
    willmore,
    write_obj,
    write_sidecar,
)

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

DISPERSION_HEADER = ("kappa_1", "kappa_2", "band", "energy")
CURVE_HEADER = (
    "lambda_re", "lambda_im", "k1_re", "k1_im", "k2_re", "k2_im", "det_log10",
    "mu1_re", "mu1_im", "mu2_re", "mu2_im", "branch",
)
SUMMARY_KEYS = (
    "task", "conventions_version", "epsilon", "nmax", "grid_size", "c0_fitted", "c0_integral",
    "willmore_direct", "willmore_geometric", "periods", "tolerances", "failures",
)
NUMERICAL_ERRORS = (
    ConvergenceError,
    ClosednessError,
    RankDeficiencyError,
    dirac.FitError,
    dirac.SingularReferenceError,
    np.linalg.LinAlgError,
    FloatingPointError,
)


class NumericalFailure(RuntimeError):
    pass


@dataclass
class Outcome:
    summary: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)


def resolve_threads(flag: int | None, config_threads: int) -> int:
    """Flag wins over ``BLOCH_THREADS``, which wins over the config value."""
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get("BLOCH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return config_threads


def _complex_or_none(z):
    if z is None:
        return None
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _curve_rows(points):
    for p in points:
        mu = p.multipliers.values
        with np.errstate(over="ignore", invalid="ignore"):
            yield (
                p.lam.real, p.lam.imag, p.k[0].real, p.k[0].imag, p.k[1].real, p.k[1].imag, p.det_log10,
                mu[0].real, mu[0].imag, mu[1].real, mu[1].imag, p.branch,
            )


def _task_dispersion(cfg, lattice, U, threads, out, res: Outcome):
    kappas = cfg.kappa_points("dispersion")
    table = schrodinger.dispersion_sweep(lattice, U, kappas, min(cfg.dispersion.bands, lattice.mode_count), threads=threads)
    write_csv(out / "dispersion.csv", DISPERSION_HEADER, table.rows())
    res.metadata["rows"] = int(table.energies.size)


def _task_gauge(cfg, lattice, U, threads, out, res: Outcome):
    phi = field_from_function(lattice, lambda *s: cfg.gauge.phi_amplitude * np.sin(2 * np.pi * s[0]), real=True)
    kappas = cfg.kappa_points("gauge")

    def one(k):
        return schrodinger.gauge_check(lattice, U, k, phi, levels=min(cfg.gauge.levels, lattice.mode_count))

    with ThreadPoolExecutor(max_workers=threads) as pool:
        devs = list(pool.map(one, kappas))
    rows = [(k[0], k[1] if len(k) > 1 else math.nan, dv) for k, dv in zip(kappas, devs)]
    write_csv(out / "gauge.csv", ("kappa_1", "kappa_2", "deviation"), rows)
    worst = max(devs)
    res.metadata["max_deviation"] = worst
    if worst > cfg.tolerances.spectral:
        res.failures.append(f"gauge deviation {worst:.3e} exceeds {cfg.tolerances.spectral:.1e}")


def _task_slice(cfg, lattice, U, threads, out, res: Outcome):
    kappas = cfg.kappa_points("slice")
    s = cfg.slice
    energies = np.linspace(s.energy_min, s.energy_max, s.energy_count)
    recs = schrodinger.bloch_variety_slice(lattice, U, kappas, energies, epsilon=cfg.tolerances.epsilon, threads=threads)
    rows, zrows = [], []
    worst = 0.0
    for k, rec in zip(kappas, recs):
        k2 = k[1] if len(k) > 1 else math.nan
        for E, m, ph in zip(rec.energies, rec.det_log10, rec.phase):
            rows.append((k[0], k2, E, m, ph))
        for i, z in enumerate(rec.zeros):
            zrows.append((k[0], k2, i, z.real, z.imag))
        ev = schrodinger.assemble_schrodinger(lattice, U, k).spectrum().eigenvalues
        inside = ev[(ev > s.energy_min) & (ev < s.energy_max)]
        if len(inside) != len(rec.zeros):
            res.failures.append(f"kappa={list(k)}: {len(rec.zeros)} zeros vs {len(inside)} eigenvalues in range")
        elif len(inside):
            worst = max(worst, float(np.max(np.abs(np.array([z.real for z in rec.zeros]) - inside))))
    write_csv(out / "slice.csv", ("kappa_1", "kappa_2", "energy", "det_log10", "phase"), rows)
    write_csv(out / "zeros.csv", ("kappa_1", "kappa_2", "index", "energy_re", "energy_im"), zrows)
    res.metadata["zeros_vs_eigh_max_deviation"] = worst
    if worst > cfg.tolerances.spectral:
        res.failures.append(f"zeros deviate from eigenvalues by {worst:.3e}")


def _trace(cfg, lattice, U, threads):
    c = cfg.curve
    lmin = c.lambda_min if c.lambda_min is not None else dirac.default_lambda_min(U)
    lmax = c.lambda_max if c.lambda_max is not None else 4 * lmin
    branches = ("+", "-") if c.branch == "both" else (c.branch,)
    tol = cfg.tolerances

    def one(b):
        return dirac.trace_curve(
            lattice, U, b, (lmin, lmax), c.steps, c.ray_angle, tol.epsilon, tol.newton, tol.curve_residual, tol.kernel
        )

    with ThreadPoolExecutor(max_workers=min(threads, len(branches))) as pool:
        traces = list(pool.map(one, branches))
    return dict(zip(branches, traces)), (lmin, lmax)


def _task_curve(cfg, lattice, U, threads, out, res: Outcome):
    traces, (lmin, lmax) = _trace(cfg, lattice, U, threads)
    rows = [r for t in traces.values() for r in _curve_rows(t.points)]
    write_csv(out / "curve.csv", CURVE_HEADER, rows)
    v = complex(*cfg.curve.v) if cfg.curve.v is not None else complex(lattice.periods[0])
    fits = {}
    for b, t in traces.items():
        res.failures.extend(f"branch {b}: {f}" for f in t.failures)
        try:
            fit = dirac.fit_c0(t.points, v, cfg.curve.extra_powers)
        except (dirac.FitError, RankDeficiencyError, ValueError) as exc:
            res.failures.append(f"branch {b}: C0 fit failed: {exc}")
            continue
        fits[b] = {
            "c0": _complex_or_none(fit.c0),
            "leading": _complex_or_none(fit.leading),
            "max_residual": fit.max_residual,
            "powers": list(fit.fit.powers),
            "coefficients": [_complex_or_none(x) for x in fit.fit.coefficients],
            "points": len(t.points),
        }
    c0 = fits.get("+", fits.get("-"))
    res.summary["c0_fitted"] = None if c0 is None else c0["c0"]
    res.summary["c0_integral"] = dirac.c0_integral(U)
    res.metadata.update(
        {
            "lambda_min": lmin,
            "lambda_max": lmax,
            "vector": _complex_or_none(v),
            "fits": fits,
            "trace": {b: t.metadata for b, t in traces.items()},
        }
    )
    if cfg.task == "fit-c0":
        write_json(out / "fit.json", {"fits": fits, "c0_integral": res.summary["c0_integral"]})


def _kernel_spinor(cfg, lattice, U):
    kap = np.array(cfg.spinor.kappa, dtype=float)
    op = dirac.assemble_dirac(lattice, U, kap)
    vec, kres = dirac.kernel_vector(op.matrix)
    if kres > cfg.tolerances.kernel:
        raise NumericalFailure(f"no kernel at kappa={list(kap)}: certificate {kres:.3e} > {cfg.tolerances.kernel:.1e}")
    psi = SpinorField.from_kernel(lattice, vec, kap, op.window_shift)
    psi = psi.scaled(1.0 / np.max(np.abs(psi.psi)))
    if cfg.spinor.rotation is not None:
        ar, ai, br, bi = cfg.spinor.rotation
        psi = psi.rotated(su2_matrix(complex(ar, ai), complex(br, bi)))
    return psi, kres


def _task_weierstrass(cfg, lattice, U, threads, out, res: Outcome):
    psi, kres = _kernel_spinor(cfg, lattice, U)
    sp = cfg.spinor
    mesh = integrate_immersion(U, psi, tuple(sp.base_index), tuple(sp.X0), "rows", sp.closedness_threshold)
    check = integrate_immersion(U, psi, tuple(sp.base_index), tuple(sp.X0), "columns", sp.closedness_threshold)
    agreement = float(np.max(np.abs(mesh.points - check.points)))
    w = willmore(U, lattice, mesh)
    write_obj(mesh, out / "mesh.obj")
    write_sidecar(mesh, out / "mesh.json", w)
    res.summary.update(willmore_direct=w.direct, willmore_geometric=w.geometric, periods=mesh.periods.tolist())
    res.metadata.update(
        kernel_residual=kres,
        closedness_residual=mesh.metadata["closedness_residual"],
        order_agreement=agreement,
        period_spread=mesh.period_spread,
        multipliers=[_complex_or_none(m) for m in mesh.multipliers.values],
    )
    if agreement > 1e-8:
        res.failures.append(f"row/column integration disagree by {agreement:.3e}")


def _task_willmore(cfg, lattice, U, threads, out, res: Outcome):
    w = willmore(U, lattice)
    res.summary.update(willmore_direct=w.direct, c0_integral=dirac.c0_integral(U) if lattice.dim == 2 else None)
    if lattice.dim == 2:
        try:
            psi, _ = _kernel_spinor(cfg, lattice, U)
            mesh = integrate_immersion(U, psi, threshold=cfg.spinor.closedness_threshold)
            res.summary.update(willmore_geometric=willmore(U, lattice, mesh).geometric, periods=mesh.periods.tolist())
        except (NumericalFailure, ClosednessError, ValueError) as exc:
            res.metadata["geometric_route"] = f"unavailable: {exc}"


TASK_RUNNERS = {
    "dispersion": _task_dispersion,
    "gauge-check": _task_gauge,
    "bloch-slice": _task_slice,
    "dirac-curve": _task_curve,
    "fit-c0": _task_curve,
    "weierstrass": _task_weierstrass,
    "willmore": _task_willmore,
}


def _base_metadata(cfg: RunConfig, lattice, U, threads: int, seed: int) -> dict:
    meta = {
        "package_version": __version__,
        "conventions": CONVENTIONS,
        "config": cfg.model_dump(mode="json"),
        "threads": threads,
        "seed": seed,
        "epsilon": cfg.tolerances.epsilon,
        "tolerances": cfg.tolerances.model_dump(),
        "nmax": lattice.nmax,
        "grid_size": lattice.grid_size,
        "periods": [[complex(p).real, complex(p).imag] for p in lattice.periods],
    }
    if lattice.dim == 2:
        meta["lambda_min_default"] = dirac.default_lambda_min(U)
        meta["calibration"] = dict(dirac.CALIBRATION)
    return meta


def _summary(cfg: RunConfig, lattice, extra: dict, failures: list[str]) -> dict:
    s = dict.fromkeys(SUMMARY_KEYS)
    s.update(
        task=cfg.task,
        conventions_version=CONVENTIONS_VERSION,
        epsilon=cfg.tolerances.epsilon,
        nmax=lattice.nmax,
        grid_size=lattice.grid_size,
        tolerances=cfg.tolerances.model_dump(),
        failures=list(failures),
    )
    s.update({k: v for k, v in extra.items() if k in SUMMARY_KEYS})
    return s


def _load(path) -> RunConfig:
    return load_config(path)


def cmd_run(args) -> int:
    try:
        cfg = _load(args.config)
        lattice = cfg.lattice.build()
        U = cfg.potential.build(lattice)
    except (pydantic.ValidationError, ConfigError, LatticeError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    threads = resolve_threads(args.threads, cfg.threads)
    seed = args.seed if args.seed is not None else cfg.seed
    out = Path(args.output if args.output is not None else cfg.output)
    res = Outcome(metadata=_base_metadata(cfg, lattice, U, threads, seed))
    code = EXIT_OK
    try:
        out.mkdir(parents=True, exist_ok=True)
        try:
            TASK_RUNNERS[cfg.task](cfg, lattice, U, threads, out, res)
        except (NumericalFailure,) + NUMERICAL_ERRORS as exc:
            res.failures.append(f"{type(exc).__name__}: {exc}")
        if res.failures:
            code = EXIT_NUMERICAL
            res.metadata["partial"] = True
        write_json(out / "metadata.json", res.metadata)
        write_json(out / "summary.json", _summary(cfg, lattice, res.summary, res.failures))
    except OSError as exc:
        print(f"error: cannot write artifacts: {exc}", file=sys.stderr)
        return EXIT_IO
    for f in res.failures:
        print(f"numerical failure: {f}", file=sys.stderr)
    return code


def cmd_verify(args) -> int:
    try:
        cfg = _load(args.config)
    except (pydantic.ValidationError, ConfigError, LatticeError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    seed = args.seed if args.seed is not None else cfg.seed
    out = Path(args.output if args.output is not None else cfg.output)
    try:
        checks = run_suite(cfg, seed=seed)
    except (NumericalFailure,) + NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for c in checks:
        print(c.line())
    failed = [c.name for c in checks if c.passed is False]
    report = {
        "conventions_version": CONVENTIONS_VERSION,
        "nmax": cfg.lattice.nmax,
        "seed": seed,
        "checks": [c.as_dict() for c in checks],
        "failures": failed,
        "passed": not failed,
    }
    try:
        write_json(out / "report.json", report)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_NUMERICAL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads (overrides BLOCH_THREADS and config)")
    common.add_argument("--output", default=None, help="output directory (overrides config)")
    common.add_argument("--seed", type=int, default=None, help="seed for randomized suites")
    parser = argparse.ArgumentParser(prog="blochtorus", description="Bloch spectra, Dirac spectral curves and spinor surfaces on flat tori.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run the task described by a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("verify", parents=[common], help="run the invariant suite for a config")
    p.add_argument("config")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SCHEMA if exc.code not in (0, None) else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
