"""Run configuration schema (strict: unknown keys are rejected)."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import potentials
from .torus import PeriodicScalarField, TorusLattice, make_lattice

__all__ = [
    "RunConfig",
    "LatticeBlock",
    "PotentialBlock",
    "KappaBlock",
    "ConfigError",
    "load_config",
    "default_grid_size",
    "TASKS",
]

TASKS = ("dispersion", "gauge-check", "bloch-slice", "dirac-curve", "fit-c0", "weierstrass", "willmore")


class ConfigError(ValueError):
    """Config file unreadable as a mapping or semantically invalid."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def default_grid_size(nmax: int) -> int:
    """Smallest power of two with ``G >= 4 nmax + 2``."""
    return 1 << math.ceil(math.log2(4 * nmax + 2))


class LatticeBlock(_Strict):
    dim: Literal[1, 2] = 2
    periods: Optional[list] = Field(None, description="1D: [L]; 2D: [[re, im], [re, im]]")
    nmax: int = Field(8, ge=1)
    grid_size: Optional[int] = Field(None, ge=2)

    @field_validator("periods")
    @classmethod
    def _shape(cls, v):
        if v is None:
            return v
        for p in v:
            if isinstance(p, list):
                if len(p) != 2 or not all(isinstance(x, (int, float)) for x in p):
                    raise ValueError("complex period must be [re, im]")
            elif not isinstance(p, (int, float)):
                raise ValueError("period must be a number or [re, im]")
        return v

    def build(self, nmax: int | None = None) -> TorusLattice:
        n = self.nmax if nmax is None else nmax
        G = self.grid_size if nmax is None and self.grid_size is not None else None
        if G is None:
            G = default_grid_size(n) if self.grid_size is None else max(self.grid_size, default_grid_size(n))
        if self.periods is None:
            periods = (1.0,) if self.dim == 1 else (1.0, 1j)
        else:
            periods = tuple(complex(p[0], p[1]) if isinstance(p, list) else complex(p) for p in self.periods)
        return make_lattice(self.dim, periods, n, G)


class FourierTerm(_Strict):
    mode: list[int]
    re: float
    im: float = 0.0


class PotentialBlock(_Strict):
    kind: Literal["zero", "constant", "mathieu", "cos2d", "fourier"] = "zero"
    c: float = 0.0
    a: float = 0.0
    b: float = 0.0
    terms: list[FourierTerm] = Field(default_factory=list)

    def build(self, lattice: TorusLattice) -> PeriodicScalarField:
        if self.kind == "zero":
            return potentials.zero(lattice)
        if self.kind == "constant":
            return potentials.constant(lattice, self.c)
        if self.kind == "mathieu":
            return potentials.mathieu(lattice, self.a, self.c)
        if self.kind == "cos2d":
            return potentials.cos2d(lattice, self.a, self.b, self.c)
        return potentials.from_fourier(lattice, [(t.mode, complex(t.re, t.im)) for t in self.terms])


class KappaBlock(_Strict):
    """Either explicit points or a straight line ``start -> stop`` with ``count`` samples."""

    points: Optional[list[list[float]]] = None
    start: Optional[list[float]] = None
    stop: Optional[list[float]] = None
    count: int = Field(16, ge=1)
    endpoint: bool = False

    @model_validator(mode="after")
    def _one_form(self):
        if self.points is None and (self.start is None or self.stop is None):
            raise ValueError("give either 'points' or both 'start' and 'stop'")
        if self.points is not None and (self.start is not None or self.stop is not None):
            raise ValueError("'points' excludes 'start'/'stop'")
        return self

    def resolve(self, dim: int) -> np.ndarray:
        if self.points is not None:
            pts = np.array(self.points, dtype=float)
        else:
            a, b = np.array(self.start, dtype=float), np.array(self.stop, dtype=float)
            t = np.linspace(0.0, 1.0, self.count, endpoint=self.endpoint)
            pts = a[None, :] + t[:, None] * (b - a)[None, :]
        if pts.ndim != 2 or pts.shape[1] != dim:
            raise ValueError(f"kappa points must have {dim} components")
        return pts


class DispersionBlock(_Strict):
    kappa: Optional[KappaBlock] = None
    bands: int = Field(8, ge=1)


class GaugeBlock(_Strict):
    kappa: Optional[KappaBlock] = None
    phi_amplitude: float = 0.3
    levels: int = Field(10, ge=1)


class SliceBlock(_Strict):
    kappa: Optional[KappaBlock] = None
    energy_min: float = -10.0
    energy_max: float = 200.0
    energy_count: int = Field(64, ge=2)


class CurveBlock(_Strict):
    branch: Literal["+", "-", "both"] = "both"
    lambda_min: Optional[float] = Field(None, gt=0)
    lambda_max: Optional[float] = Field(None, gt=0)
    steps: int = Field(24, ge=4)
    ray_angle: float = 0.3
    extra_powers: list[int] = Field(default_factory=list)
    v: Optional[list[float]] = Field(None, description="lattice vector [re, im]; default first period")


class SpinorBlock(_Strict):
    kappa: list[float] = Field(default_factory=lambda: [math.pi, 0.0])
    base_index: list[int] = Field(default_factory=lambda: [0, 0])
    X0: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    closedness_threshold: float = 1e-6
    rotation: Optional[list[float]] = Field(None, description="SU(2) element as [re α, im α, re β, im β]")


class Tolerances(_Strict):
    spectral: float = 1e-9
    convergence: float = 1e-7
    newton: float = 1e-10
    curve_residual: float = 1e-8
    kernel: float = 1e-7
    epsilon: float = Field(1.0, gt=0)


class RunConfig(_Strict):
    task: Literal["dispersion", "gauge-check", "bloch-slice", "dirac-curve", "fit-c0", "weierstrass", "willmore"]
    lattice: LatticeBlock = LatticeBlock()
    potential: PotentialBlock = PotentialBlock()
    output: str = "out"
    threads: int = Field(1, ge=1)
    seed: int = 0
    tolerances: Tolerances = Tolerances()
    dispersion: DispersionBlock = DispersionBlock()
    gauge: GaugeBlock = GaugeBlock()
    slice: SliceBlock = SliceBlock()
    curve: CurveBlock = CurveBlock()
    spinor: SpinorBlock = SpinorBlock()

    @model_validator(mode="after")
    def _dims(self):
        if self.task in ("dirac-curve", "fit-c0", "weierstrass") and self.lattice.dim != 2:
            raise ValueError(f"task {self.task} needs a 2D lattice")
        if self.potential.kind == "cos2d" and self.lattice.dim != 2:
            raise ValueError("cos2d needs a 2D lattice")
        lattice = self.lattice.build()
        self.potential.build(lattice)
        for name in ("dispersion", "gauge", "slice"):
            self.kappa_points(name)
        return self

    def kappa_points(self, block: str) -> np.ndarray:
        """Resolved quasimomentum samples of a task block (dimension-aware defaults)."""
        dim = self.lattice.dim
        kb = getattr(self, block).kappa
        if kb is None:
            zero = [0.0] * dim
            if block == "dispersion":
                kb = KappaBlock(start=zero, stop=[2 * math.pi] + [0.0] * (dim - 1), count=64)
            elif block == "gauge":
                kb = KappaBlock(points=[[0.3] * dim])
            else:
                kb = KappaBlock(points=[zero])
        return kb.resolve(dim)


def load_config(path) -> RunConfig:
    """Parse JSON or YAML (by suffix; YAML is a superset so it is the fallback).

    Raises :class:`pydantic.ValidationError` on schema violations and
    :class:`ConfigError` on unparsable files; ``OSError`` propagates.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text) if path.suffix.lower() == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return RunConfig.model_validate(data)
