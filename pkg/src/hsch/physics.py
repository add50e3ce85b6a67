"""Physical constants, double-well potential, chemical potential and free energy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError
from .spectral import (
    CUBIC,
    DealiasRule,
    SpectralField,
    differential,
    from_padded_physical,
    padded_physical,
)

VISCOSITY_KINDS = ("constant", "tanh_blend")


def f0(c):
    """Double-well potential ``(c^2 - 1)^2``."""
    return (c * c - 1.0) ** 2


def f0_prime(c):
    return 4.0 * c * (c * c - 1.0)


@dataclass(frozen=True)
class ViscosityModel:
    """Smooth viscosity profile bounded by ``lambda_min <= eta <= lambda_max``.

    ``tanh_blend`` evaluates
    ``(lambda_min + lambda_max)/2 + (lambda_max - lambda_min)/2 * tanh(steepness * c)``,
    which interpolates the two pure phases ``c = -1`` and ``c = +1``. The
    ``constant`` kind returns ``lambda_min`` everywhere.
    """

    kind: str = "tanh_blend"
    lambda_min: float = 1.0
    lambda_max: float = 1.0
    steepness: float = 1.0

    def __post_init__(self):
        if self.kind not in VISCOSITY_KINDS:
            raise ParameterError(f"viscosity kind must be one of {VISCOSITY_KINDS}")
        for name in ("lambda_min", "lambda_max", "steepness"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ParameterError(f"{name} must be finite")
        if self.lambda_min <= 0:
            raise ParameterError("lambda_min must be positive")
        if self.lambda_max < self.lambda_min:
            raise ParameterError("lambda_max must be >= lambda_min")
        if self.steepness <= 0:
            raise ParameterError("steepness must be positive")

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant" or self.lambda_min == self.lambda_max

    @property
    def contrast(self) -> float:
        return self.lambda_max / self.lambda_min

    @property
    def harmonic_mean(self) -> float:
        """Reference viscosity ``2 / (1/lambda_min + 1/lambda_max)``."""
        return 2.0 / (1.0 / self.lambda_min + 1.0 / self.lambda_max)

    def __call__(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=np.float64)
        if self.is_constant:
            return np.full_like(c, self.lambda_min)
        mid = 0.5 * (self.lambda_min + self.lambda_max)
        half = 0.5 * (self.lambda_max - self.lambda_min)
        eta = mid + half * np.tanh(self.steepness * c)
        # tanh rounds to +-1 exactly for large arguments; clip guards the last ulp
        return np.clip(eta, self.lambda_min, self.lambda_max)


@dataclass(frozen=True)
class HschParams:
    """Peclet number, Cahn number, Mach number and viscosity model."""

    peclet: float = 1.0
    cahn: float = 1.0
    mach: float = 1.0
    viscosity: ViscosityModel = field(default_factory=ViscosityModel)

    def __post_init__(self):
        for name in ("peclet", "cahn", "mach"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be positive and finite, got {v}")


def _require_scalar(c: SpectralField) -> None:
    if c.is_vector:
        raise ShapeError("expected a scalar field")


def double_well(c: SpectralField, order: str = "value",
                rule: DealiasRule = CUBIC) -> SpectralField:
    """``f0(c)`` or ``f0'(c)`` evaluated on the padded grid and truncated back."""
    _require_scalar(c)
    fn = {"value": f0, "derivative": f0_prime}.get(order)
    if fn is None:
        raise ValueError(f"order must be 'value' or 'derivative', got {order!r}")
    d, n = c.grid.dim, c.grid.n_modes
    m = rule.padded_size(n)
    vals = fn(padded_physical(c.spec, d, m))
    return SpectralField(c.grid, spec=from_padded_physical(vals, d, n))


def chemical_potential(c: SpectralField, p: HschParams) -> SpectralField:
    """``mu = f0'(c) - C * laplacian(c)``."""
    fp = double_well(c, "derivative")
    return SpectralField(c.grid, spec=fp.spec - p.cahn * c.grid.laplacian_symbol * c.spec)


def viscosity_eval(c: SpectralField, m: ViscosityModel) -> SpectralField:
    """Pointwise ``eta(c)`` on the grid samples."""
    _require_scalar(c)
    eta = m(c.phys)
    lo, hi = float(eta.min()), float(eta.max())
    if lo < m.lambda_min or hi > m.lambda_max:
        raise AssertionError(f"viscosity bounds violated: [{lo}, {hi}]")
    return SpectralField(c.grid, phys=eta)


def free_energy(c: SpectralField, p: HschParams) -> float:
    """``E = int f0(c) + (C/2) int |grad c|^2`` by grid averaging."""
    _require_scalar(c)
    grad = differential(c, "grad").phys
    return float(np.mean(f0(c.phys)) + 0.5 * p.cahn * np.mean(np.sum(grad * grad, axis=0)))
