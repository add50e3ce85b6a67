"""Initial-condition presets."""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .spectral import SpectralField, TorusGrid, random_field

BLOB_RADIUS = 0.25


def modes(grid: TorusGrid, amplitude: float) -> SpectralField:
    """``A * sum_i cos(2 pi x_i)``."""
    x = grid.coordinates()
    return SpectralField(grid, phys=amplitude * np.sum(np.cos(2 * np.pi * x), axis=0))


def random_smooth(grid: TorusGrid, amplitude: float, seed: int) -> SpectralField:
    """Seeded field with spectrum slope -2 up to ``|k| <= N/3``, scaled to max ``|A|``."""
    f = random_field(grid, np.random.default_rng(seed), slope=-2.0)
    return f * (amplitude / f.max_abs())


def phase_blob(grid: TorusGrid, amplitude: float, width: float) -> SpectralField:
    """``A * tanh((R - r) / width)`` around the box centre, ``r`` the periodic distance."""
    x = grid.coordinates()
    dx = np.abs(x - 0.5)
    dx = np.minimum(dx, 1.0 - dx)
    r = np.sqrt(np.sum(dx * dx, axis=0))
    return SpectralField(grid, phys=amplitude * np.tanh((BLOB_RADIUS - r) / width))


def make_initial(grid: TorusGrid, preset: str, amplitude: float = 0.1, seed: int = 0,
                 width: float = 0.05) -> SpectralField:
    if preset == "modes":
        return modes(grid, amplitude)
    if preset == "random":
        return random_smooth(grid, amplitude, seed)
    if preset == "phase-blob":
        return phase_blob(grid, amplitude, width)
    raise ParameterError(f"unknown preset {preset!r}")
