"""Acceptance criteria, one test per criterion, each reporting a PASS/FAIL line.

The long runs (criteria 1, 2 and 8) are cached per session so the shared
trajectories are computed once.
"""

import time
from collections import defaultdict
from functools import lru_cache

import numpy as np
import pytest
import sympy as sp

from hsch.cli import main
from hsch.diagnostics import DiagnosticsSchedule, gagliardo_nirenberg_ratio
from hsch.initial import modes, phase_blob
from hsch.integrator import SimState, StepConfig, derive, derive_hsch, hsch_rhs, step_simplified
from hsch.diagnostics import energy_balance_residual
from hsch.littlewood_paley import EnsembleSpec, build_partition, dyadic_block, refinement_study
from hsch.physics import HschParams, ViscosityModel
from hsch.pressure import (
    PressureSolveConfig,
    _WeightedLaplacian,
    solve_pressure,
    solve_weighted_poisson,
)
from hsch.simulation import galerkin_initial, run, scaling_experiment
from hsch.spectral import SpectralField, TorusGrid, differential, random_field

pytestmark = pytest.mark.slow

TWO_PI = 2 * np.pi
T_END = 1.0


@lru_cache(maxsize=None)
def reference_run(n: int, dt: float, contrast: float):
    """Criterion-1 run: 2D, preset modes with amplitude 0.1, to T = 1."""
    g = TorusGrid(2, n)
    visc = ViscosityModel("tanh_blend", 1.0, contrast, 1.0)
    p = HschParams(viscosity=visc)
    cfg = StepConfig(dt, n // 2)
    masses = []
    start = time.perf_counter()
    traj = run(modes(g, 0.1), p, cfg, T_END, DiagnosticsSchedule(every_n_steps=100),
               on_step=lambda st, acc: masses.append(st.c.mean()))
    return traj, masses, time.perf_counter() - start


def test_criterion_1_mass_conservation(report):
    traj, masses, elapsed = reference_run(64, 1e-4, 1.0)
    m0 = traj.records[0].mass
    drift = max(abs(r.mass - m0) for r in traj.records)
    step_drift = max(abs(m - m0) for m in masses)
    ok = (drift <= 1e-11 and step_drift <= 1e-11 and elapsed <= 120.0 and traj.error is None
          and abs(traj.final.t - T_END) < 1e-9)
    report("1", ok, f"max sample drift {drift:.2e}, max step drift {step_drift:.2e} "
                    f"(<= 1e-11), runtime {elapsed:.1f}s (<= 120s)")
    assert ok


def test_criterion_2_energy_law(report):
    coarse, _, _ = reference_run(64, 1e-4, 1.0)
    fine, _, _ = reference_run(64, 5e-5, 1.0)
    worst = -np.inf
    for traj, dt in ((coarse, 1e-4), (fine, 5e-5)):
        e = np.array(traj.energies)
        slack = 10 * dt**2 * max(traj.dissipations)
        worst = max(worst, float(np.max(np.diff(e) - slack)))
    r1 = coarse.accum.energy_residual
    r2 = fine.accum.energy_residual
    ratio = r1 / r2
    ok = worst <= 0.0 and abs(ratio - 2.0) <= 0.3
    report("2", ok, f"max(E[n+1]-E[n]-slack) = {worst:.2e} (<= 0); residual {r1:.3e} -> "
                    f"{r2:.3e}, ratio {ratio:.3f} (2 +- 0.3)")
    assert ok


def test_criterion_3_pressure(report):
    # constant viscosity against direct Fourier inversion
    g = TorusGrid(2, 64)
    c = random_field(g, np.random.default_rng(0), slope=-3.0, k_max=16)
    c = c * (0.9 / c.max_abs())
    p_const = HschParams(mach=1.3, viscosity=ViscosityModel("constant", 12.0, 12.0))
    sol = solve_pressure(c, p_const)
    div_f = np.sum(g.grad_symbol * sol.flux.spec, axis=0)
    sym = g.grad_laplacian_symbol
    p_hat = np.where(sym == 0, 0.0, 12.0 * div_f / np.where(sym == 0, 1.0, sym))
    exact = SpectralField(g, spec=p_hat).phys
    err_fourier = np.linalg.norm(sol.p.phys - exact) / np.linalg.norm(exact)

    # variable viscosity on 8^d against a dense least-squares solve
    err_dense = 0.0
    for dim in (2, 3):
        g8 = TorusGrid(dim, 8)
        x = g8.coordinates()
        c8 = SpectralField(g8, phys=0.7 * np.cos(TWO_PI * x[0]) + 0.4 * np.sin(TWO_PI * x[1])
                           + 0.2 * np.cos(TWO_PI * (x[0] - x[-1])))
        p10 = HschParams(viscosity=ViscosityModel("tanh_blend", 1.0, 10.0, 2.0))
        s8 = solve_pressure(c8, p10, PressureSolveConfig(rel_tol=1e-13))
        op = _WeightedLaplacian(g8, s8.weight, 1.0)
        npts = 8**dim
        a = np.empty((npts, npts))
        for i in range(npts):
            e = np.zeros(npts)
            e[i] = 1.0
            a[:, i] = op.apply(e.reshape(g8.shape)).ravel()
        rhs = differential(s8.flux, "div").phys.ravel()
        dense = np.linalg.lstsq(a, rhs, rcond=1e-12)[0]
        err_dense = max(err_dense, np.linalg.norm(s8.p.phys.ravel() - dense) / np.linalg.norm(dense))

    # iteration count at contrast 10 on the phase-blob benchmark
    blob = phase_blob(g, 1.0, 0.05)
    iters = solve_pressure(blob, HschParams(viscosity=ViscosityModel("tanh_blend", 1.0, 10.0, 5.0))
                           ).iterations
    ok = err_fourier <= 1e-9 and err_dense <= 1e-8 and iters <= 60
    report("3", ok, f"Fourier oracle rel err {err_fourier:.2e} (<= 1e-9), dense 8^d rel err "
                    f"{err_dense:.2e} (<= 1e-8), CG iterations at contrast 10: {iters} (<= 60)")
    assert ok


# -- exact Fourier-polynomial algebra for the manufactured right-hand side

def _clean(d):
    out = {}
    for k, v in d.items():
        v = sp.expand(v)
        if v != 0:
            out[k] = v
    return out


def _mul(a, b):
    out = defaultdict(lambda: sp.Integer(0))
    for ka, va in a.items():
        for kb, vb in b.items():
            out[(ka[0] + kb[0], ka[1] + kb[1])] += va * vb
    return _clean(out)


def _add(*terms):
    out = defaultdict(lambda: sp.Integer(0))
    for coef, t in terms:
        for k, v in t.items():
            out[k] += coef * v
    return _clean(out)


def _d(a, ax):
    return _clean({k: 2 * sp.pi * sp.I * k[ax] * v for k, v in a.items()})


def _lap(a):
    return _clean({k: -4 * sp.pi**2 * (k[0] ** 2 + k[1] ** 2) * v for k, v in a.items()})


def symbolic_rhs(pe, cahn, mach, eta, n):
    """Coefficients of ``-P_n(u . grad c) + (1/Pe) lap P_n mu`` for the two-mode ``c``.

    ``c = 3/10 cos(2 pi x1) + 1/5 sin(2 pi (x1 + 2 x2))``. With constant
    viscosity the pressure equation reduces to ``lap p = div(mu grad c)/M``,
    so ``u = Leray(mu grad c) / (12 eta M)`` exactly.
    """
    r = sp.Rational
    c = {(1, 0): r(3, 20), (-1, 0): r(3, 20), (1, 2): -sp.I / 10, (-1, -2): sp.I / 10}
    mu = _add((4, _mul(_mul(c, c), c)), (-4, c), (-cahn, _lap(c)))
    gc = [_d(c, 0), _d(c, 1)]
    f = [_mul(mu, g) for g in gc]
    u = [{}, {}]
    for k in set(f[0]) | set(f[1]):
        k2 = k[0] ** 2 + k[1] ** 2
        if k2 == 0:
            continue
        v = [f[0].get(k, 0), f[1].get(k, 0)]
        kv = k[0] * v[0] + k[1] * v[1]
        for ax in (0, 1):
            u[ax][k] = (v[ax] - k[ax] * kv / k2) / (12 * eta * mach)
    u = [_clean(ui) for ui in u]
    adv = _add((1, _mul(u[0], gc[0])), (1, _mul(u[1], gc[1])))
    full = _add((-1, adv), (1 / sp.Integer(pe), _lap(mu)))
    return {k: complex(sp.N(v, 30)) for k, v in full.items() if k[0] ** 2 + k[1] ** 2 <= n * n}


def test_criterion_4_spectral_accuracy(report):
    pe, cahn, mach, eta, n = 2, sp.Rational(1, 2), sp.Rational(3, 2), 3, 8
    exact = symbolic_rhs(pe, cahn, mach, eta, n)
    p = HschParams(pe, 0.5, 1.5, ViscosityModel("constant", 3.0, 3.0))
    got, errs = {}, {}
    for size in (32, 64):
        g = TorusGrid(2, size)
        x = g.coordinates()
        c = SpectralField(g, phys=0.3 * np.cos(TWO_PI * x[0])
                          + 0.2 * np.sin(TWO_PI * (x[0] + 2 * x[1])))
        rhs = hsch_rhs(c, derive_hsch(c, p, PressureSolveConfig(rel_tol=1e-14)), p, n)
        expect = np.zeros(g.shape, complex)
        for k, v in exact.items():
            expect[k[0] % size, k[1] % size] = v
        errs[size] = float(np.max(np.abs(rhs - expect)))
        got[size] = rhs
    k = TorusGrid(2, 32).wavenumbers
    refine = float(np.max(np.abs(got[32] - got[64][np.mod(k[0], 64), np.mod(k[1], 64)])))
    outside = float(np.max(np.abs(np.delete(got[64].ravel(), np.ravel_multi_index(
        tuple(np.mod(np.array(list(exact)).T, 64)), (64, 64))))))
    ok = max(errs.values()) <= 1e-10 and refine <= 1e-10 and outside <= 1e-10
    report("4", ok, f"max coefficient error N=32 {errs[32]:.2e}, N=64 {errs[64]:.2e}, "
                    f"N=32 vs 64 {refine:.2e}, spurious modes {outside:.2e} (all <= 1e-10; "
                    f"max |coefficient| {max(abs(v) for v in exact.values()):.1f})")
    assert ok


def test_criterion_5_littlewood_paley(report):
    pu, rec = 0.0, 0.0
    for n in (32, 64, 128):
        g = TorusGrid(2, n)
        part = build_partition(g)
        pu = max(pu, float(np.max(np.abs(part.weights.sum(axis=0) - 1.0))))
        f = SpectralField(g, phys=np.random.default_rng(n).standard_normal(g.shape))
        total = sum((dyadic_block(f, j, part) for j in part.indices), start=f * 0.0)
        rec = max(rec, (total - f).l2_norm())
    ens = EnsembleSpec(count=100, seed=0)
    bern = refinement_study("bernstein_6_1", ens, (32, 64, 128))
    comm = refinement_study("commutator_6_4", ens, (32, 64, 128))
    maxes = ", ".join(f"{r.max_ratio:.4g}" for r in comm.reports)
    ok = pu <= 1e-14 and rec <= 1e-12 and bern.max_ratio_spread <= 0.10 and comm.bounded
    report("5", ok, f"partition residual {pu:.1e} (<= 1e-14), reconstruction {rec:.1e} "
                    f"(<= 1e-12), Bernstein max-ratio spread {bern.max_ratio_spread:.2%} "
                    f"(<= 10%), commutator slope {comm.slope:.4f} with 95% lower bound "
                    f"{comm.slope_lower_95:.4f} (<= 0) and max ratios [{maxes}]")
    assert ok


def simplified_residual(c0, dt, t_end):
    cfg = StepConfig(dt, c0.grid.n_modes // 2, 0.0, "simplified")
    st = derive(SimState(0.0, galerkin_initial(c0, cfg)), None, cfg)
    total, u_max = 0.0, 0.0
    for _ in range(round(t_end / dt)):
        nxt = derive(step_simplified(st, cfg), None, cfg)
        total += energy_balance_residual(st, nxt, None, dt)
        u_max = max(u_max, nxt.cached.u.max_abs())
        st = nxt
    return total, u_max


def test_criterion_6_simplified_energy_identity(report):
    g = TorusGrid(2, 64)
    x = g.coordinates()
    inits = {
        "modes A=0.05": modes(g, 0.05),
        # two wavenumber shells, so lap c grad c is not a gradient and u != 0
        "two-shell": SpectralField(g, phys=0.04 * (np.cos(TWO_PI * x[0]) + np.cos(TWO_PI * x[1]))
                                   + 0.01 * np.cos(TWO_PI * (x[0] + x[1]))),
    }
    ok, parts = True, []
    for name, c0 in inits.items():
        r1, u1 = simplified_residual(c0, 1e-5, 0.01)
        r2, _ = simplified_residual(c0, 5e-6, 0.01)
        ratio = r1 / r2
        good = abs(r1) <= 1e-3 and abs(ratio - 2.0) <= 0.3
        ok &= good
        parts.append(f"{name}: residual {r1:.3e} (<= 1e-3), dt/2 ratio {ratio:.3f}, "
                     f"max|u| {u1:.1e}")
    report("6", ok, "; ".join(parts))
    assert ok


def test_criterion_7_scaling_invariance(report):
    g = TorusGrid(2, 64)
    c0 = random_field(g, np.random.default_rng(0), -2.0, 6)
    c0 = c0 * (0.5 / c0.max_abs())
    res = scaling_experiment(c0, 2, 1e-4, 1e-6)
    ok = res.deviation <= 1e-4
    report("7", ok, f"L2 deviation {res.deviation:.2e} (<= 1e-4) over {res.steps} steps, "
                    f"N=64 -> 128, reference norm {res.reference_norm:.3f}")
    assert ok


def test_criterion_8_global_existence_2d(report):
    runs = {n: reference_run(n, 1e-4, 10.0)[0] for n in (64, 128)}
    flags = any(r.blowup_flag for t in runs.values() for r in t.records)
    recs = runs[64].records
    hs = np.array([r.sobolev_norm for r in recs])
    last = hs[[r.t >= 0.75 * T_END for r in recs]]
    worst_rise = float(np.max(last[1:] / last[:-1])) if last.size > 1 else 1.0
    b64, b128 = runs[64].accum.bkm_integral, runs[128].accum.bkm_integral
    rel = abs(b128 - b64) / b64
    gn = gagliardo_nirenberg_ratio(recs)
    ok = (not flags and all(t.error is None for t in runs.values()) and np.all(np.isfinite(hs))
          and worst_rise <= 1.05 and rel <= 0.05)
    report("8", ok, f"blow-up flags: {flags}; sup H^2.5 {hs.max():.4g}; last-quarter max step "
                    f"ratio {worst_rise:.4f} (<= 1.05); bkm N=64 {b64:.5e}, N=128 {b128:.5e}, "
                    f"rel diff {rel:.2e} (<= 5%); Gagliardo-Nirenberg ratio {gn:.3g}")
    assert ok


def test_criterion_9_restart_determinism(report, tmp_path):
    sets = ["--set", "run.t_end=0.1", "--set", "run.checkpoint_every=300",
            "--set", "viscosity.lambda_max=10", "--set", "init.preset=random",
            "--set", "init.amplitude=0.5"]
    full, part = tmp_path / "full", tmp_path / "part"
    rc = [main(["run", "--output-dir", str(full)] + sets),
          main(["run", "--output-dir", str(part)] + sets + ["--set", "run.t_end=0.05"]),
          main(["resume", "--output-dir", str(part), "--t-end", "0.1"])]
    same_csv = (full / "diagnostics.csv").read_bytes() == (part / "diagnostics.csv").read_bytes()
    same_snap = (full / "final.snap").read_bytes() == (part / "final.snap").read_bytes()
    rows = len((full / "diagnostics.csv").read_text().splitlines()) - 1
    ok = rc == [0, 0, 0] and same_csv and same_snap
    report("9", ok, f"exit codes {rc}; diagnostics.csv identical: {same_csv} ({rows} rows); "
                    f"final snapshot identical: {same_snap}")
    assert ok
