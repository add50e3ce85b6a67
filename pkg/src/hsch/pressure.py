"""Variable-coefficient pressure equation ``div(grad p / eta) = div F`` and Darcy velocity.

The operator is applied matrix-free: spectral gradient, pointwise
multiplication by ``1/eta`` on the grid, spectral divergence. The
preconditioner is the constant-coefficient operator built from the harmonic
mean viscosity, inverted diagonally in Fourier space, which bounds the
preconditioned condition number by ``lambda_max / lambda_min``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonConvergenceError, ParameterError, ShapeError
from .physics import HschParams, chemical_potential
from .spectral import (
    CUBIC,
    SpectralField,
    TorusGrid,
    _fft,
    _ifft,
    from_padded_physical,
    padded_physical,
)

METHODS = ("preconditioned_cg", "richardson_fixed_point")


@dataclass(frozen=True)
class PressureSolveConfig:
    rel_tol: float = 1e-10
    max_iters: int = 500
    method: str = "preconditioned_cg"

    def __post_init__(self):
        if not (0 < self.rel_tol < 1):
            raise ParameterError("rel_tol must lie in (0, 1)")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be >= 1")
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}")


@dataclass
class PressureSolution:
    """Zero-mean pressure plus solver bookkeeping.

    ``final_residual`` is the L2 norm of ``div(grad p / eta) - div F``
    recomputed from the returned ``p``; ``rhs_norm`` is ``||div F||``.
    ``weight`` (``1/eta`` samples) and ``flux`` are kept so the velocity
    can be formed without recomputation.
    """

    p: SpectralField
    iterations: int
    final_residual: float
    rhs_norm: float = 0.0
    residual_history: list[float] = field(default_factory=list)
    weight: np.ndarray | None = None
    flux: SpectralField | None = None


def assemble_rhs_flux(c: SpectralField, params: HschParams,
                      mu: SpectralField | None = None) -> SpectralField:
    """Vector flux ``F = mu(c) grad(c) / (M eta(c))``, products on the 2x padded grid.

    ``mu`` may be passed when the chemical potential is already known.
    """
    if c.is_vector:
        raise ShapeError("expected a scalar field")
    g = c.grid
    d, n = g.dim, g.n_modes
    m = CUBIC.padded_size(n)
    if mu is None:
        mu = chemical_potential(c, params)
    c_pad = padded_physical(c.spec, d, m)
    mu_pad = padded_physical(mu.spec, d, m)
    grad_pad = padded_physical(g.grad_symbol * c.spec, d, m)
    scale = mu_pad / (params.mach * params.viscosity(c_pad))
    return SpectralField(g, spec=from_padded_physical(scale * grad_pad, d, n))


class _WeightedLaplacian:
    """``p -> div(w grad p)`` on physical samples, with its Fourier preconditioner."""

    def __init__(self, grid: TorusGrid, weight: np.ndarray, precond_coef: float):
        self.grid = grid
        self.weight = weight
        sym = grid.grad_laplacian_symbol  # <= 0, zero on the operator's null space
        self.null = sym == 0.0
        inv = np.zeros_like(sym)
        inv[~self.null] = 1.0 / (precond_coef * sym[~self.null])
        self.inv_symbol = inv

    def weighted_gradient(self, p: np.ndarray) -> np.ndarray:
        d = self.grid.dim
        return self.weight * _ifft(self.grid.grad_symbol * _fft(p, d), d).real

    def divergence(self, v: np.ndarray) -> np.ndarray:
        d = self.grid.dim
        return _ifft(np.sum(self.grid.grad_symbol * _fft(v, d), axis=0), d).real

    def apply(self, p: np.ndarray) -> np.ndarray:
        return self.divergence(self.weighted_gradient(p))

    def precondition(self, r: np.ndarray) -> np.ndarray:
        d = self.grid.dim
        return _ifft(self.inv_symbol * _fft(r, d), d).real

    def gauge(self, p: np.ndarray) -> np.ndarray:
        d = self.grid.dim
        ph = _fft(p, d)
        ph[self.null] = 0.0
        return _ifft(ph, d).real


def _l2(a: np.ndarray) -> float:
    return math.sqrt(float(np.mean(a * a)))


def solve_weighted_poisson(grid: TorusGrid, weight: np.ndarray, rhs: np.ndarray,
                           cfg: PressureSolveConfig, precond_coef: float | None = None,
                           callback: Callable[[np.ndarray], None] | None = None):
    """Solve ``div(weight grad p) = rhs`` for zero-mean ``p``.

    Args:
        weight: positive samples of the coefficient (``1/eta``).
        rhs: samples of the right-hand side; must be orthogonal to the
            operator's null space (true for any discrete divergence).
        precond_coef: coefficient of the constant-coefficient preconditioner;
            defaults to the midrange of ``weight``.
        callback: called with every iterate, initial guess included.

    Returns:
        ``(p_samples, iterations, residual_history, rhs_norm)``.
    """
    if precond_coef is None:
        precond_coef = 0.5 * (float(weight.min()) + float(weight.max()))
    op = _WeightedLaplacian(grid, weight, precond_coef)
    b_norm = _l2(rhs)
    if b_norm == 0.0:
        p = np.zeros(grid.shape)
        if callback:
            callback(p)
        return p, 0, [0.0], 0.0
    target = cfg.rel_tol * b_norm

    x = op.precondition(rhs)
    r = rhs - op.apply(x)
    history = [_l2(r)]
    if callback:
        callback(x)
    it = 0
    if cfg.method == "preconditioned_cg":
        # CG on the positive semidefinite operator -A, i.e. on -A x = -b
        z = op.precondition(r)
        s = z.copy()
        rz = float(np.vdot(r, z))
        while history[-1] > target:
            if it >= cfg.max_iters or not math.isfinite(history[-1]):
                raise NonConvergenceError(
                    f"pressure CG did not reach rel_tol={cfg.rel_tol} in {it} iterations",
                    history)
            As = op.apply(s)
            alpha = rz / float(np.vdot(s, As))
            x = x + alpha * s
            r = r - alpha * As
            z = op.precondition(r)
            rz_new = float(np.vdot(r, z))
            s = z + (rz_new / rz) * s
            rz = rz_new
            it += 1
            history.append(_l2(r))
            if callback:
                callback(x)
    else:
        while history[-1] > target:
            if it >= cfg.max_iters or not math.isfinite(history[-1]):
                raise NonConvergenceError(
                    f"pressure fixed-point iteration did not reach rel_tol={cfg.rel_tol} "
                    f"in {it} iterations", history)
            x = x + op.precondition(r)
            r = rhs - op.apply(x)
            it += 1
            history.append(_l2(r))
            if callback:
                callback(x)
    return op.gauge(x), it, history, b_norm


def solve_pressure(c: SpectralField, params: HschParams,
                   cfg: PressureSolveConfig = PressureSolveConfig(),
                   callback: Callable[[np.ndarray], None] | None = None,
                   mu: SpectralField | None = None) -> PressureSolution:
    """Pressure for the order parameter ``c`` with the model's physical flux."""
    g = c.grid
    flux = assemble_rhs_flux(c, params, mu)
    weight = 1.0 / params.viscosity(c.phys)
    rhs = _ifft(np.sum(g.grad_symbol * flux.spec, axis=0), g.dim).real
    coef = 1.0 / params.viscosity.harmonic_mean
    p, it, hist, b_norm = solve_weighted_poisson(g, weight, rhs, cfg, coef, callback)
    op = _WeightedLaplacian(g, weight, coef)
    final = _l2(op.apply(p) - rhs) if b_norm > 0 else 0.0
    return PressureSolution(SpectralField(g, phys=p), it, final, b_norm, hist, weight, flux)


def velocity(c: SpectralField, sol: PressureSolution, params: HschParams) -> SpectralField:
    """Darcy velocity ``u = -(grad p - mu grad c / M) / (12 eta)``."""
    g = c.grid
    weight = sol.weight if sol.weight is not None else 1.0 / params.viscosity(c.phys)
    flux = sol.flux if sol.flux is not None else assemble_rhs_flux(c, params)
    wgp = weight * _ifft(g.grad_symbol * sol.p.spec, g.dim).real
    return SpectralField(g, phys=-(wgp - flux.phys) / 12.0)
