"""Bloch spectra on flat tori: periodic Schrödinger and Dirac operators,
Dirac spectral curves and the spinor representation of surfaces in R³."""

__version__ = "0.1.0"

from .conventions import CONVENTIONS_VERSION
from .torus import (
    FluxVector,
    HarmonicOneForm,
    MultiplierMap,
    PeriodicScalarField,
    TorusLattice,
    make_lattice,
)

__all__ = [
    "__version__",
    "CONVENTIONS_VERSION",
    "FluxVector",
    "HarmonicOneForm",
    "MultiplierMap",
    "PeriodicScalarField",
    "TorusLattice",
    "make_lattice",
]
