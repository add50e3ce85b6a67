"""Run-time monitors: mass, energy balance, blow-up integrals and norm ratios."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields as dc_fields

import numpy as np

from .errors import ParameterError
from .integrator import (
    HschFields,
    SimplifiedFields,
    SimState,
    derive_hsch,
    derive_simplified,
    grad_inf_norm,
)
from .littlewood_paley import DyadicPartition, holder_norm, sobolev_norm
from .physics import HschParams
from .pressure import PressureSolution
from .spectral import SpectralField

CSV_COLUMNS = ("t", "mass", "energy", "energy_residual", "grad_c_inf", "bkm_integral",
               "holder_norm", "refined_integral", "pressure_ratio", "pressure_iters",
               "blowup_flag")


@dataclass(frozen=True)
class DiagnosticsSchedule:
    """Sampling cadence and exponents for the monitors.

    ``sobolev_s=None`` resolves to ``d/2 + 1.5`` for the grid in use.
    """

    every_n_steps: int = 100
    alpha: float = 0.5
    sobolev_s: float | None = None

    def __post_init__(self):
        if self.every_n_steps < 1:
            raise ParameterError("every_n_steps must be >= 1")
        if not 0 < self.alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")

    def s_for(self, dim: int) -> float:
        return dim / 2 + 1.5 if self.sobolev_s is None else self.sobolev_s


@dataclass
class DiagRecord:
    """One time sample. Only the fields in ``CSV_COLUMNS`` are written to disk."""

    t: float = 0.0
    mass: float = 0.0
    energy: float = 0.0
    energy_residual: float = 0.0
    grad_c_inf: float = 0.0
    bkm_integral: float = 0.0
    holder_norm: float = 0.0
    refined_integral: float = 0.0
    pressure_ratio: float = 0.0
    pressure_iters: int = 0
    blowup_flag: bool = False
    sobolev_norm: float = 0.0
    h1_norm: float = 0.0
    h3_norm: float = 0.0

    def csv_row(self) -> str:
        out = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            if isinstance(v, bool):
                out.append("1" if v else "0")
            elif isinstance(v, (int, np.integer)):
                out.append(str(int(v)))
            else:
                out.append(f"{float(v):.17g}")
        return ",".join(out)

    @classmethod
    def from_dict(cls, d: dict) -> "DiagRecord":
        names = {f.name for f in dc_fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def to_dict(self) -> dict:
        return asdict(self)


def csv_header() -> str:
    return ",".join(CSV_COLUMNS)


def mass(c: SpectralField) -> float:
    """Mean of ``c`` over the unit torus."""
    return c.mean()


def _fields_for(st: SimState, p: HschParams | None):
    if st.cached is not None:
        return st.cached
    if p is None:
        return derive_simplified(st.c)
    return derive_hsch(st.c, p)


def energy_balance_residual(prev: SimState, next: SimState, p: HschParams | None,
                            dt: float | None = None) -> float:
    """``E(next) - E(prev) + dt (D(prev) + D(next)) / 2``.

    ``D`` is the dissipation rate of the model: for HSCH
    ``(1/Pe)||grad mu||^2 + 12 M int eta |u|^2`` with ``E`` the free energy;
    for the simplified model (``p=None``) ``2(||grad lap c||^2 + ||u||^2)`` with
    ``E = ||grad c||^2``. Cached fields are used when present.
    """
    a, b = _fields_for(prev, p), _fields_for(next, p)
    if dt is None:
        dt = next.t - prev.t
    return b.energy - a.energy + 0.5 * dt * (a.dissipation + b.dissipation)


def pressure_estimate_ratio(c: SpectralField, sol: PressureSolution, s: float,
                            part: DyadicPartition) -> float:
    """``||grad p||_{H^s}`` over ``(1+||grad c||_inf)(1+||c||_{H^2})^(floor(2s)+1) ||c||_{H^{s+2}}``."""
    g = c.grid
    grad_p = SpectralField(g, spec=g.grad_symbol * sol.p.spec)
    num = sobolev_norm(grad_p, s, part)
    den = ((1.0 + grad_inf_norm(c)) * (1.0 + sobolev_norm(c, 2.0, part)) ** (math.floor(2 * s) + 1)
           * sobolev_norm(c, s + 2.0, part))
    if den == 0.0 or num == 0.0:
        return 0.0
    return num / den


@dataclass
class Accumulators:
    """Running time integrals (checkpointed with the state)."""

    energy_residual: float = 0.0
    bkm_integral: float = 0.0
    refined_integral: float = 0.0
    bkm_last_t: float | None = None
    last_bkm_integrand: float = 0.0
    refined_last_t: float | None = None
    last_refined_integrand: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Accumulators":
        return cls(**d)


def _grad_inf(st: SimState) -> float:
    return st.grad_inf if st.grad_inf is not None else grad_inf_norm(st.c)


def accumulate_bkm(st: SimState, accum: Accumulators) -> float:
    """Extend the trapezoidal integral of ``||grad c||_inf^4`` up to ``st.t``.

    The run loop calls this after every step, since the integrand is a
    by-product of the blow-up check. Repeated calls at one time are no-ops.
    """
    gi = _grad_inf(st)
    if accum.bkm_last_t == st.t:
        return gi
    f = gi**4
    if accum.bkm_last_t is not None:
        accum.bkm_integral += 0.5 * (st.t - accum.bkm_last_t) * (accum.last_bkm_integrand + f)
    accum.bkm_last_t = st.t
    accum.last_bkm_integrand = f
    return gi


def blowup_functionals(st: SimState, sched: DiagnosticsSchedule, part: DyadicPartition,
                       accum: Accumulators) -> DiagRecord:
    """Sample ``||grad c||_inf`` and ``||c||_{C^alpha}`` and extend both time integrals.

    ``accum`` is updated in place with trapezoidal increments of
    ``||grad c||_inf^4`` (from its last update, normally the previous step)
    and of ``||c||_{C^alpha}^(8/alpha)`` (from the previous sample).
    """
    gi = accumulate_bkm(st, accum)
    hn = holder_norm(st.c, sched.alpha, part)
    ref_f = hn ** (8.0 / sched.alpha)
    if accum.refined_last_t is not None:
        h = st.t - accum.refined_last_t
        accum.refined_integral += 0.5 * h * (accum.last_refined_integrand + ref_f)
    accum.refined_last_t = st.t
    accum.last_refined_integrand = ref_f
    return DiagRecord(t=st.t, grad_c_inf=gi, holder_norm=hn,
                      bkm_integral=accum.bkm_integral,
                      refined_integral=accum.refined_integral)


def sample(st: SimState, sched: DiagnosticsSchedule, part: DyadicPartition,
           accum: Accumulators, flagged: bool = False) -> DiagRecord:
    """Full record for ``st``, whose derived fields must be attached."""
    rec = blowup_functionals(st, sched, part, accum)
    f = st.cached
    rec.mass = mass(st.c)
    rec.energy = f.energy
    rec.energy_residual = accum.energy_residual
    s = sched.s_for(st.c.grid.dim)
    if isinstance(f, HschFields):
        rec.pressure_ratio = pressure_estimate_ratio(st.c, f.pressure, 1.0, part)
        rec.pressure_iters = f.pressure.iterations
    rec.sobolev_norm = sobolev_norm(st.c, s, part)
    rec.h1_norm = sobolev_norm(st.c, 1.0, part)
    rec.h3_norm = sobolev_norm(st.c, 3.0, part)
    rec.blowup_flag = flagged
    return rec


def flagged_record(st: SimState, accum: Accumulators) -> DiagRecord:
    """Record emitted when a run aborts; carries the last good state's values."""
    return DiagRecord(t=st.t, mass=mass(st.c), energy_residual=accum.energy_residual,
                      grad_c_inf=_grad_inf(st), bkm_integral=accum.bkm_integral,
                      refined_integral=accum.refined_integral, blowup_flag=True,
                      energy=st.cached.energy if st.cached is not None else math.nan)


def gagliardo_nirenberg_ratio(records: list[DiagRecord]) -> float:
    """``int ||grad c||_inf^4`` over ``sup ||c||_{H^1}^2 * int ||c||_{H^3}^2`` from samples."""
    if len(records) < 2:
        return 0.0
    t = np.array([r.t for r in records])
    h3 = np.array([r.h3_norm for r in records]) ** 2
    den = max(r.h1_norm for r in records) ** 2 * float(np.trapezoid(h3, t))
    return records[-1].bkm_integral / den if den > 0 else 0.0
