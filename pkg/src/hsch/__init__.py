"""Pseudo-spectral solver and analysis toolkit for the Hele-Shaw-Cahn-Hilliard system on the torus."""

from .errors import (
    BlowUpError,
    ConfigError,
    DataError,
    FormatError,
    HschError,
    NonConvergenceError,
    ParameterError,
    ShapeError,
)
from .physics import HschParams, ViscosityModel, chemical_potential, double_well, free_energy
from .spectral import SpectralField, TorusGrid, dealiased_product, differential, project_pn

__version__ = "0.1.0"
