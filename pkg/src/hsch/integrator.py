"""Time stepping for the truncated HSCH system and the simplified model.

Both models use the same first-order IMEX structure. Every Fourier mode is
advanced by a diagonal update in which the biharmonic term (and, for HSCH,
the Laplacian stabiliser) is implicit while transport and the double-well
force are explicit. Each step ends by rebuilding ``c`` from its physical
samples, so a state read back from a snapshot is bitwise the state the
running integrator holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import BlowUpError, DataError, ParameterError, ShapeError
from .physics import HschParams, double_well
from .pressure import PressureSolution, PressureSolveConfig, solve_pressure, velocity
from .spectral import (
    QUADRATIC,
    SpectralField,
    TorusGrid,
    _ifft,
    ball_mask,
    dealiased_product,
)

MODELS = ("hsch", "simplified")
DEFAULT_BLOWUP_CEILING = 1e8


@dataclass(frozen=True)
class StepConfig:
    dt: float
    truncation_n: int
    stabilization_s: float = 2.0
    model: str = "hsch"

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ParameterError("dt must be positive and finite")
        if self.truncation_n < 0:
            raise ParameterError("truncation_n must be >= 0")
        if not (math.isfinite(self.stabilization_s) and self.stabilization_s >= 0):
            raise ParameterError("stabilization_s must be >= 0")
        if self.model not in MODELS:
            raise ParameterError(f"model must be one of {MODELS}")

    def check_grid(self, grid: TorusGrid) -> None:
        if self.truncation_n > grid.n_modes // 2:
            raise ParameterError(
                f"truncation_n={self.truncation_n} exceeds n_modes/2={grid.n_modes // 2}")


@dataclass(frozen=True)
class HschFields:
    """Quantities derived from one HSCH state."""

    mu: SpectralField
    f0p: SpectralField
    pressure: PressureSolution
    u: SpectralField
    dissipation: float
    energy: float


@dataclass(frozen=True)
class SimplifiedFields:
    u: SpectralField
    dissipation: float
    energy: float


@dataclass(frozen=True)
class SimState:
    t: float
    c: SpectralField
    step_count: int = 0
    cached: HschFields | SimplifiedFields | None = None
    grad_inf: float | None = None

    def with_fields(self, fields) -> "SimState":
        return replace(self, cached=fields)


def step_mask(grid: TorusGrid, n: int) -> np.ndarray:
    """Galerkin ball ``|k| <= n`` without the Nyquist planes."""
    return ball_mask(grid, n) & ~grid.nyquist_mask


def _grad_sq_norm(spec: np.ndarray, grid: TorusGrid) -> float:
    """``||grad f||^2`` via Parseval using the exact symbol ``|2 pi k|^2``."""
    return float(np.sum(-grid.laplacian_symbol * np.abs(spec) ** 2))


def derive_hsch(c: SpectralField, params: HschParams,
                solver_cfg: PressureSolveConfig = PressureSolveConfig()) -> HschFields:
    g = c.grid
    f0p = double_well(c, "derivative")
    mu = SpectralField(g, spec=f0p.spec - params.cahn * g.laplacian_symbol * c.spec)
    sol = solve_pressure(c, params, solver_cfg, mu=mu)
    u = velocity(c, sol, params)
    eta = 1.0 / sol.weight
    visc = 12.0 * params.mach * float(np.mean(eta * np.sum(u.phys**2, axis=0)))
    diss = _grad_sq_norm(mu.spec, g) / params.peclet + visc
    f0_mean = float(np.mean((c.phys**2 - 1.0) ** 2))
    energy = f0_mean + 0.5 * params.cahn * _grad_sq_norm(c.spec, g)
    return HschFields(mu, f0p, sol, u, diss, energy)


def transport_divergence(u: SpectralField, c: SpectralField) -> np.ndarray:
    """Coefficients of ``div(u c)``; equals ``u . grad c`` for solenoidal ``u``.

    The conservative form keeps the mean exactly unchanged.
    """
    uc = dealiased_product([u, c], QUADRATIC)
    return np.sum(c.grid.grad_symbol * uc.spec, axis=0)


def hsch_rhs(c: SpectralField, fields: HschFields, params: HschParams,
             truncation_n: int) -> np.ndarray:
    """Galerkin right-hand side ``-P_n(u . grad c) + (1/Pe) lap P_n mu``."""
    g = c.grid
    mask = step_mask(g, truncation_n)
    adv = transport_divergence(fields.u, c)
    return mask * (-adv + g.laplacian_symbol * fields.mu.spec / params.peclet)


def _finish(st: SimState, new_spec: np.ndarray, dt: float, ceiling: float) -> SimState:
    g = st.c.grid
    phys = _ifft(new_spec, g.dim).real
    if not np.all(np.isfinite(phys)):
        raise BlowUpError(f"non-finite values at t={st.t + dt:.6g}", last_state=st)
    c_new = SpectralField(g, phys=phys)
    gmax = grad_inf_norm(c_new)
    if not gmax <= ceiling:
        raise BlowUpError(f"||grad c||_inf={gmax:.3g} exceeds {ceiling:.3g} at t={st.t + dt:.6g}",
                          last_state=st)
    return SimState(st.t + dt, c_new, st.step_count + 1, grad_inf=gmax)


def grad_inf_norm(c: SpectralField) -> float:
    g = c.grid
    grad = _ifft(g.grad_symbol * c.spec, g.dim).real
    return math.sqrt(float(np.max(np.sum(grad * grad, axis=0))))


def step_hsch(st: SimState, p: HschParams, cfg: StepConfig,
              solver_cfg: PressureSolveConfig = PressureSolveConfig(),
              blowup_ceiling: float = DEFAULT_BLOWUP_CEILING) -> SimState:
    """One IMEX step of the truncated HSCH system.

    ``(1 + dt (C lap^2 - S lap)/Pe) c' = c (1 - dt S lap / Pe) + dt N(c)``
    with ``N`` the explicit right-hand side from ``hsch_rhs`` minus its
    implicit part ``-(C/Pe) lap^2 c``.
    """
    if cfg.model != "hsch":
        raise ParameterError("step_hsch needs model='hsch'")
    g = st.c.grid
    cfg.check_grid(g)
    fields = st.cached if isinstance(st.cached, HschFields) else derive_hsch(st.c, p, solver_cfg)
    lap = g.laplacian_symbol
    dt, s, pe = cfg.dt, cfg.stabilization_s, p.peclet
    mask = step_mask(g, cfg.truncation_n)
    adv = transport_divergence(fields.u, st.c)
    explicit = -adv + lap * fields.f0p.spec / pe
    num = st.c.spec * (1.0 - dt * s * lap / pe) + dt * explicit
    den = 1.0 + dt * (p.cahn * lap * lap - s * lap) / pe
    return _finish(st, mask * num / den, dt, blowup_ceiling)


def leray(v: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Solenoidal part of a vector field given by its coefficients.

    Modes annihilated by every difference symbol (the mean and the pure
    Nyquist modes) carry no divergence-free content and are zeroed.
    """
    kv = grid.grad_symbol.imag
    k2 = np.sum(kv * kv, axis=0)
    safe = np.where(k2 > 0, k2, 1.0)
    kdotv = np.sum(kv * v, axis=0)
    out = v - kv * (kdotv / safe)
    return out * (k2 > 0)


def derive_simplified(c: SpectralField) -> SimplifiedFields:
    """Velocity of the simplified model and its energy bookkeeping.

    The velocity is ``u = -Leray(lap c grad c)``. With this orientation the
    transport term drains ``||grad c||^2`` at rate ``2 ||u||^2`` alongside
    the biharmonic drain ``2 ||grad lap c||^2``.
    """
    g = c.grid
    lapc = SpectralField(g, spec=g.laplacian_symbol * c.spec)
    gradc = SpectralField(g, spec=g.grad_symbol * c.spec)
    force = dealiased_product([lapc, gradc], QUADRATIC)
    u = SpectralField(g, spec=-leray(force.spec, g))
    grad_lap_sq = _grad_sq_norm(lapc.spec, g)
    u_sq = float(np.sum(np.abs(u.spec) ** 2))
    return SimplifiedFields(u, 2.0 * (grad_lap_sq + u_sq), _grad_sq_norm(c.spec, g))


def step_simplified(st: SimState, cfg: StepConfig,
                    blowup_ceiling: float = DEFAULT_BLOWUP_CEILING) -> SimState:
    """One IMEX step of ``c_t + u . grad c + lap^2 c = 0`` (implicit ``lap^2``)."""
    if cfg.model != "simplified":
        raise ParameterError("step_simplified needs model='simplified'")
    g = st.c.grid
    cfg.check_grid(g)
    fields = st.cached if isinstance(st.cached, SimplifiedFields) else derive_simplified(st.c)
    lap = g.laplacian_symbol
    mask = step_mask(g, cfg.truncation_n)
    num = st.c.spec - cfg.dt * transport_divergence(fields.u, st.c)
    return _finish(st, mask * num / (1.0 + cfg.dt * lap * lap), cfg.dt, blowup_ceiling)


def derive(st: SimState, params: HschParams, cfg: StepConfig,
           solver_cfg: PressureSolveConfig = PressureSolveConfig()) -> SimState:
    """Return ``st`` with its derived fields attached."""
    if cfg.model == "hsch":
        if not isinstance(st.cached, HschFields):
            st = st.with_fields(derive_hsch(st.c, params, solver_cfg))
    elif not isinstance(st.cached, SimplifiedFields):
        st = st.with_fields(derive_simplified(st.c))
    return st


def step(st: SimState, params: HschParams, cfg: StepConfig,
         solver_cfg: PressureSolveConfig = PressureSolveConfig(),
         blowup_ceiling: float = DEFAULT_BLOWUP_CEILING) -> SimState:
    """One step of ``cfg.model``; overflow anywhere in the step is a blow-up."""
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            if cfg.model == "hsch":
                return step_hsch(st, params, cfg, solver_cfg, blowup_ceiling)
            return step_simplified(st, cfg, blowup_ceiling)
    except DataError as exc:
        raise BlowUpError(f"non-finite values at t={st.t + cfg.dt:.6g}: {exc}",
                          last_state=st) from exc


def scaling_transform(c: SpectralField, lam: int, out_grid: TorusGrid | None = None) -> SpectralField:
    """``c_lam(x) = c(lam x)`` by relabelling coefficients ``k -> lam k``.

    ``out_grid`` defaults to ``lam * n_modes`` points per axis; a smaller
    grid raises :class:`ShapeError`.
    """
    if not (isinstance(lam, (int, np.integer)) and lam >= 1):
        raise ParameterError("lam must be a positive integer")
    g = c.grid
    if out_grid is None:
        out_grid = TorusGrid(g.dim, g.n_modes * lam)
    if out_grid.dim != g.dim or out_grid.n_modes < lam * g.n_modes:
        raise ShapeError(f"output grid needs n_modes >= {lam * g.n_modes}")
    if lam == 1 and out_grid == g:
        return c
    out = np.zeros(c.spec.shape[:-g.dim] + out_grid.shape, dtype=np.complex128)
    k = g.wavenumbers
    idx = tuple(np.mod(lam * k[i], out_grid.n_modes) for i in range(g.dim))
    # -N/2 would land on one side of the finer grid and break Hermitian symmetry,
    # so Nyquist content must be at rounding level; it is dropped
    spec = c.spec
    nyq = spec[..., g.nyquist_mask]
    if nyq.size and np.max(np.abs(nyq)) > 1e-13 * max(float(np.max(np.abs(spec))), 1e-300):
        raise ShapeError("scaling_transform needs fields without Nyquist content")
    spec = np.where(g.nyquist_mask, 0.0, spec)
    out[(Ellipsis,) + idx] = spec
    return SpectralField(out_grid, spec=out)
