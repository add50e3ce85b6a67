"""Flat ``key=value`` run configuration.

Keys are dotted (``grid.n_modes=128``); ``[section]`` headers prefix the
keys that follow them. ``#`` and ``;`` start comments. Every value is
validated when parsed and errors name the offending key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Any

from .diagnostics import DiagnosticsSchedule
from .errors import ConfigError, HschError
from .integrator import MODELS, StepConfig
from .physics import VISCOSITY_KINDS, HschParams, ViscosityModel
from .pressure import METHODS, PressureSolveConfig
from .spectral import TorusGrid

PRESETS = ("modes", "random", "phase-blob")


@dataclass(frozen=True)
class RunConfig:
    grid_dim: int = 2
    grid_n_modes: int = 64
    params_pe: float = 1.0
    params_cahn: float = 1.0
    params_mach: float = 1.0
    viscosity_kind: str = "tanh_blend"
    viscosity_lambda_min: float = 1.0
    viscosity_lambda_max: float = 1.0
    viscosity_steepness: float = 1.0
    pressure_rel_tol: float = 1e-10
    pressure_max_iters: int = 500
    pressure_method: str = "preconditioned_cg"
    step_dt: float = 1e-4
    step_truncation_n: int = -1
    step_stabilization_s: float = 2.0
    step_model: str = "hsch"
    run_t_end: float = 1.0
    run_snapshot_every: int = 0
    run_checkpoint_every: int = 1000
    run_blowup_ceiling: float = 1e8
    diag_every_n_steps: int = 100
    diag_alpha: float = 0.5
    diag_sobolev_s: float = -1.0
    init_preset: str = "modes"
    init_amplitude: float = 0.1
    init_seed: int = 0
    init_width: float = 0.05
    init_snapshot: str = ""
    output_dir: str = "out"

    # -- typed views used by the rest of the package

    def grid(self) -> TorusGrid:
        return TorusGrid(self.grid_dim, self.grid_n_modes)

    def params(self) -> HschParams:
        visc = ViscosityModel(self.viscosity_kind, self.viscosity_lambda_min,
                              self.viscosity_lambda_max, self.viscosity_steepness)
        return HschParams(self.params_pe, self.params_cahn, self.params_mach, visc)

    def solver(self) -> PressureSolveConfig:
        return PressureSolveConfig(self.pressure_rel_tol, self.pressure_max_iters,
                                   self.pressure_method)

    def step(self) -> StepConfig:
        """Step settings; ``step.truncation_n < 0`` means ``grid.n_modes/2``."""
        n = self.step_truncation_n
        if n < 0:
            n = self.grid_n_modes // 2
        return StepConfig(self.step_dt, n, self.step_stabilization_s, self.step_model)

    def schedule(self) -> DiagnosticsSchedule:
        """Diagnostics settings; ``diag.sobolev_s < 0`` means ``d/2 + 1.5``."""
        s = None if self.diag_sobolev_s < 0 else self.diag_sobolev_s
        return DiagnosticsSchedule(self.diag_every_n_steps, self.diag_alpha, s)


def _key(attr: str) -> str:
    return attr if attr == "output_dir" else attr.replace("_", ".", 1)


KEYS = {_key(f.name): f for f in fields(RunConfig)}


def _convert(key: str, raw: str, typ: type) -> Any:
    raw = raw.strip()
    try:
        if typ is int:
            v = float(raw) if any(ch in raw for ch in ".eE") else int(raw)
            if isinstance(v, float):
                if not v.is_integer():
                    raise ValueError
                v = int(v)
            return v
        if typ is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
    except ValueError:
        raise ConfigError(f"{key}: expected {typ.__name__}, got {raw!r}", key) from None
    return raw


def _field_type(f) -> type:
    t = f.type if isinstance(f.type, type) else {"int": int, "float": float, "str": str}[f.type]
    return t


def _check(cfg: RunConfig) -> RunConfig:
    """Module-level invariants, each reported against the key that breaks it."""

    def bad(key: str, msg: str):
        raise ConfigError(f"{key}: {msg}", key)

    if cfg.grid_dim not in (2, 3):
        bad("grid.dim", "must be 2 or 3")
    if cfg.grid_n_modes < 8 or cfg.grid_n_modes % 2:
        bad("grid.n_modes", "must be even and >= 8")
    for key in ("params.pe", "params.cahn", "params.mach"):
        if getattr(cfg, KEYS[key].name) <= 0:
            bad(key, "must be positive")
    if cfg.viscosity_kind not in VISCOSITY_KINDS:
        bad("viscosity.kind", f"must be one of {VISCOSITY_KINDS}")
    if cfg.viscosity_lambda_min <= 0:
        bad("viscosity.lambda_min", "must be positive")
    if cfg.viscosity_lambda_max < cfg.viscosity_lambda_min:
        bad("viscosity.lambda_max", "must be >= viscosity.lambda_min")
    if cfg.viscosity_steepness <= 0:
        bad("viscosity.steepness", "must be positive")
    if not 0 < cfg.pressure_rel_tol < 1:
        bad("pressure.rel_tol", "must lie in (0, 1)")
    if cfg.pressure_max_iters < 1:
        bad("pressure.max_iters", "must be >= 1")
    if cfg.pressure_method not in METHODS:
        bad("pressure.method", f"must be one of {METHODS}")
    if cfg.step_dt <= 0:
        bad("step.dt", "must be positive")
    if cfg.step_truncation_n > cfg.grid_n_modes // 2:
        bad("step.truncation_n", "must be <= grid.n_modes/2")
    if cfg.step_stabilization_s < 0:
        bad("step.stabilization_s", "must be >= 0")
    if cfg.step_model not in MODELS:
        bad("step.model", f"must be one of {MODELS}")
    if cfg.run_t_end < 0:
        bad("run.t_end", "must be >= 0")
    if cfg.run_snapshot_every < 0:
        bad("run.snapshot_every", "must be >= 0 (0 disables)")
    if cfg.run_checkpoint_every < 0:
        bad("run.checkpoint_every", "must be >= 0 (0 disables)")
    if cfg.run_blowup_ceiling <= 0:
        bad("run.blowup_ceiling", "must be positive")
    if cfg.diag_every_n_steps < 1:
        bad("diag.every_n_steps", "must be >= 1")
    if not 0 < cfg.diag_alpha < 1:
        bad("diag.alpha", "must lie in (0, 1)")
    if cfg.init_preset not in PRESETS:
        bad("init.preset", f"must be one of {PRESETS}")
    if cfg.init_width <= 0:
        bad("init.width", "must be positive")
    if not cfg.output_dir:
        bad("output_dir", "must not be empty")
    try:
        cfg.grid(), cfg.params(), cfg.solver(), cfg.step(), cfg.schedule()
    except HschError as exc:  # pragma: no cover - the checks above are meant to be exhaustive
        raise ConfigError(str(exc)) from exc
    return cfg


def parse_pairs(pairs: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    values = {}
    for key, raw in pairs.items():
        f = KEYS.get(key)
        if f is None:
            raise ConfigError(f"unknown key {key!r}", key)
        values[f.name] = _convert(key, raw, _field_type(f))
    return _check(replace(base or RunConfig(), **values))


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse configuration text; missing keys take their defaults."""
    pairs: dict[str, str] = {}
    section = ""
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].split(";", 1)[0].strip()
        if not s:
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            continue
        if "=" not in s:
            raise ConfigError(f"line {lineno}: expected key=value, got {s!r}")
        key, raw = (part.strip() for part in s.split("=", 1))
        if section:
            key = f"{section}.{key}"
        if key in pairs:
            raise ConfigError(f"duplicate key {key!r}", key)
        pairs[key] = raw
    return parse_pairs(pairs, base)


def serialize_config(cfg: RunConfig) -> str:
    """Text that parses back to ``cfg`` exactly."""
    lines = []
    for key, f in KEYS.items():
        v = getattr(cfg, f.name)
        lines.append(f"{key}={v!r}" if isinstance(v, float) else f"{key}={v}")
    return "\n".join(lines) + "\n"
