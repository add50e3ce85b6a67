"""Command-line entry point.

Exit codes: 0 success, 1 usage, 2 configuration, 3 runtime failure or blow-up.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import littlewood_paley as lp
from .config import RunConfig, parse_config, parse_pairs, serialize_config
from .diagnostics import Accumulators, DiagRecord, csv_header
from .errors import ConfigError, FormatError, HschError, NonConvergenceError
from .initial import make_initial, phase_blob
from .integrator import SimState
from .physics import HschParams, ViscosityModel
from .pressure import PressureSolveConfig, solve_pressure
from .simulation import ResumePoint, Trajectory, run, scaling_experiment
from .snapshot import read_checkpoint, read_snapshot, write_checkpoint, write_snapshot
from .spectral import TorusGrid, random_field

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
CSV_NAME = "diagnostics.csv"
FINAL_NAME = "final.snap"
EFFECTIVE_NAME = "effective.cfg"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _err(msg: str) -> None:
    print(f"hsch: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# run / resume


class CsvSink:
    """Append-only diagnostics file that counts its data rows."""

    def __init__(self, path: Path, keep_rows: int | None = None):
        self.path = path
        if keep_rows is None:
            path.write_text(csv_header() + "\n")
            self.rows = 0
        else:
            lines = path.read_text().splitlines()
            if len(lines) < keep_rows + 1:
                raise FormatError(f"{path} holds fewer rows than the checkpoint expects")
            path.write_text("\n".join(lines[:keep_rows + 1]) + "\n")
            self.rows = keep_rows
        self._fh = open(path, "a")

    def __call__(self, rec: DiagRecord) -> None:
        self._fh.write(rec.csv_row() + "\n")
        self._fh.flush()
        self.rows += 1

    def close(self) -> None:
        self._fh.close()


def _execute(cfg: RunConfig, out: Path, resume_meta: dict | None = None,
             resume_state: SimState | None = None) -> int:
    out.mkdir(parents=True, exist_ok=True)
    (out / EFFECTIVE_NAME).write_text(serialize_config(cfg))
    grid, params, step_cfg = cfg.grid(), cfg.params(), cfg.step()
    cfg_text = serialize_config(cfg)

    if resume_meta is None:
        if cfg.init_snapshot:
            try:
                snap = read_snapshot(cfg.init_snapshot)
            except FormatError as exc:
                raise ConfigError(f"init.snapshot: {exc}", "init.snapshot") from exc
            if snap.c.grid != grid:
                raise ConfigError("init.snapshot: grid differs from grid.dim/grid.n_modes",
                                  "init.snapshot")
            init, t0 = snap.c, snap.t
        else:
            init = make_initial(grid, cfg.init_preset, cfg.init_amplitude, cfg.init_seed,
                                cfg.init_width)
            t0 = 0.0
        sink = CsvSink(out / CSV_NAME)
        resume = None
    else:
        init, t0 = resume_state.c, resume_meta["origin_t"]
        sink = CsvSink(out / CSV_NAME, resume_meta["csv_rows"])
        resume = ResumePoint(resume_state, Accumulators.from_dict(resume_meta["accum"]),
                             resume_meta["origin_t"])

    n_total = max(0, round((cfg.run_t_end - t0) / cfg.step_dt))

    def on_step(st: SimState, accum: Accumulators) -> None:
        if cfg.run_snapshot_every and st.step_count % cfg.run_snapshot_every == 0:
            write_snapshot(st, out / f"snap_{st.step_count:08d}.snap")
        due = cfg.run_checkpoint_every and st.step_count % cfg.run_checkpoint_every == 0
        if due or st.step_count == n_total:
            write_checkpoint(out, st, {"origin_t": t0, "accum": accum.to_dict(),
                                       "csv_rows": sink.rows, "config": cfg_text})

    try:
        traj: Trajectory = run(init, params, step_cfg, cfg.run_t_end, cfg.schedule(),
                               cfg.solver(), cfg.run_blowup_ceiling, on_sample=sink,
                               on_step=on_step, resume=resume, t0=t0)
    finally:
        sink.close()
    write_snapshot(traj.final, out / FINAL_NAME, sync=True)
    if traj.error:
        _err(f"run aborted at t={traj.final.t:.6g}: {traj.error}")
        return EXIT_RUNTIME
    last = traj.records[-1] if traj.records else None
    msg = f"completed {traj.final.step_count} steps to t={traj.final.t:.6g}"
    if last is not None:
        msg += f"; energy={last.energy:.6g}, mass={last.mass:.3g}"
    print(msg)
    return EXIT_OK


def _load_config(path: str | None, sets: list[str]) -> RunConfig:
    text = ""
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text)
    pairs = {}
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        pairs[k.strip()] = v
    return parse_pairs(pairs, cfg) if pairs else cfg


def cmd_run(args) -> int:
    cfg = _load_config(args.config, args.set)
    if args.output_dir:
        cfg = replace(cfg, output_dir=args.output_dir)
    return _execute(cfg, Path(cfg.output_dir))


def cmd_resume(args) -> int:
    out = Path(args.output_dir)
    try:
        st, meta = read_checkpoint(out)
    except FileNotFoundError:
        raise ConfigError(f"no checkpoint found in {out}") from None
    except (FormatError, KeyError, ValueError) as exc:
        raise ConfigError(f"unusable checkpoint in {out}: {exc}") from exc
    cfg = parse_config(meta["config"])
    if args.t_end is not None:
        cfg = parse_pairs({"run.t_end": str(args.t_end)}, cfg)
    cfg = replace(cfg, output_dir=str(out))
    return _execute(cfg, out, meta, st)


# ---------------------------------------------------------------------------
# analysis commands


def cmd_lp_harness(args) -> int:
    lemmas = lp.LEMMAS if args.lemma == "all" else (args.lemma,)
    ens = lp.EnsembleSpec(args.count, args.seed, args.slope, args.band)
    reports, verdicts = [], []
    for lemma in lemmas:
        v = lp.refinement_study(lemma, ens, args.n, args.dim, args.s)
        reports.extend(v.reports)
        verdicts.append((lemma, v))
    rows = lp.harness_csv_rows(reports)
    if args.out:
        Path(args.out).write_text("\n".join(rows) + "\n")
    else:
        print("\n".join(rows))
    for lemma, v in verdicts:
        status = "PASS" if v.bounded else "FAIL"
        print(f"# {lemma}: {status} slope={v.slope:.4g} lower95={v.slope_lower_95:.4g} "
              f"max_spread={v.max_ratio_spread:.3%}", file=sys.stderr)
    return EXIT_OK


def cmd_pressure_bench(args) -> int:
    grid = TorusGrid(args.dim, args.n)
    c = phase_blob(grid, 1.0, args.width)
    cfg = PressureSolveConfig(args.rel_tol, args.max_iters, args.method)
    print("contrast,iterations,relative_residual")
    for contrast in args.contrasts:
        visc = ViscosityModel("tanh_blend", 1.0, contrast, args.steepness)
        try:
            sol = solve_pressure(c, HschParams(viscosity=visc), cfg)
        except NonConvergenceError as exc:
            print(f"{contrast:g},nan,{exc.residual_history[-1]:.3e}")
            continue
        rel = sol.final_residual / sol.rhs_norm if sol.rhs_norm else 0.0
        print(f"{contrast:g},{sol.iterations},{rel:.3e}")
    return EXIT_OK


def cmd_scaling_test(args) -> int:
    grid = TorusGrid(2, args.n)
    c0 = random_field(grid, np.random.default_rng(args.seed), -2.0, args.band)
    c0 = c0 * (args.amplitude / c0.max_abs())
    res = scaling_experiment(c0, args.lam, args.t, args.dt)
    ok = res.deviation <= args.threshold
    print(f"{'PASS' if ok else 'FAIL'} lambda={res.lam} N={args.n}->{args.n * res.lam} "
          f"t={res.t:.3g} steps={res.steps} l2_deviation={res.deviation:.3e} "
          f"threshold={args.threshold:.1e}")
    return EXIT_OK if ok else EXIT_RUNTIME


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hsch", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("run", help="run a simulation from a config file")
    p.add_argument("--config", help="key=value configuration file (defaults if omitted)")
    p.add_argument("--output-dir", help="overrides output_dir from the config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="continue a run from its last checkpoint")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--t-end", type=float, help="new end time")
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("lp-harness", help="empirical ratios for the dyadic inequalities")
    p.add_argument("--lemma", default="all", choices=("all",) + lp.LEMMAS)
    p.add_argument("--n", type=int, nargs="+", default=[32, 64, 128])
    p.add_argument("--dim", type=int, default=2, choices=(2, 3))
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--s", type=float, default=1.5)
    p.add_argument("--slope", type=float, default=-3.0)
    p.add_argument("--band", type=int, default=None)
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.set_defaults(func=cmd_lp_harness)

    p = sub.add_parser("pressure-bench", help="CG iterations against viscosity contrast")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--dim", type=int, default=2, choices=(2, 3))
    p.add_argument("--contrasts", type=_float_list, default=[1, 2, 5, 10, 20, 50, 100])
    p.add_argument("--steepness", type=float, default=5.0)
    p.add_argument("--width", type=float, default=0.05)
    p.add_argument("--rel-tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--method", default="preconditioned_cg",
                   choices=("preconditioned_cg", "richardson_fixed_point"))
    p.set_defaults(func=cmd_pressure_bench)

    p = sub.add_parser("scaling-test", help="parabolic scaling check of the simplified model")
    p.add_argument("--lambda", dest="lam", type=int, default=2)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--t", type=float, default=1e-4)
    p.add_argument("--dt", type=float, default=1e-6)
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--band", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=1e-4)
    p.set_defaults(func=cmd_scaling_test)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("hsch: a subcommand is required "
                             "(run, resume, lp-harness, pressure-bench, scaling-test)")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        ap.print_usage(sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    except (HschError, OSError) as exc:
        _err(f"runtime error: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
