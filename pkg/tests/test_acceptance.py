"""Acceptance criteria, one test each; every test records a PASS/FAIL line."""
import itertools
import math
import time

import numpy as np
import pytest

from bohmflow import cli
from bohmflow.beable import (LatticeSpec, block_tv, drift_check, lattice_current, lattice_probabilities,
                             reconstructed_flux, simulate_beables, suggest_dt, transition_rates)
from bohmflow.bohm import (DEFAULT_AMPLITUDE_INIT, PhasePoint, amplitude_metric, default_initial_grid,
                           equivariance_distance, integrate_ensemble)
from bohmflow.entanglement import separability_threshold, sudden_death_report, sudden_death_time, x_state_sudden_death
from bohmflow.validation import velocity_equivalence
from bohmflow.werner import BathParams, WernerParams, werner_damped, werner_initial

S = math.sqrt(0.5)


def test_01_separability_threshold_equal_weights(record_criterion):
    start = time.perf_counter()
    eps = separability_threshold(S, S)
    elapsed = time.perf_counter() - start
    ok = abs(eps - 1 / 3) < 1e-6 and elapsed < 1.0
    record_criterion("1 separability a=b", ok, f"eps*={eps:.12f} |d|={abs(eps - 1 / 3):.1e} in {elapsed:.3f}s")
    assert ok


def test_02_separability_threshold_unequal_weights(record_criterion):
    start = time.perf_counter()
    b = math.sqrt(0.96)
    eps = separability_threshold(0.2, b)
    elapsed = time.perf_counter() - start
    closed = 1 / (4 * 0.2 * b + 1)
    ok = abs(eps - 0.5606) < 0.005 and abs(eps - closed) < 1e-9 and elapsed < 1.0
    record_criterion("2 separability a=0.2", ok,
                     f"eps*={eps:.6f} (closed form {closed:.6f}, target 0.5606 +/- 0.005) in {elapsed:.3f}s")
    assert ok


def test_03_sudden_death_times(record_criterion):
    start = time.perf_counter()
    t1 = sudden_death_time(WernerParams.from_a(S, 0.4))
    p2 = WernerParams.from_a(0.2, 1.0)
    t2 = sudden_death_time(p2)
    p3 = WernerParams.from_a(0.2, 0.7)
    t3 = sudden_death_time(p3)
    elapsed = time.perf_counter() - start
    report = sudden_death_report()
    note = report[2].get("note", "")
    oracle2 = x_state_sudden_death(p2)
    ok = (abs(t1 - math.log(7 / 6)) < 1e-6 and abs(t1 - 0.15) < 0.01
          and abs(t2 - oracle2) < 1e-5 and abs(t2 - 0.23) < 0.01
          and abs(t3 - x_state_sudden_death(p3)) < 1e-6 and abs(t3 - 0.0869) < 1e-4
          and "0.026" in note and elapsed < 1.0)
    record_criterion(
        "3 sudden death", ok,
        f"ln(7/6) case {t1:.7f}; a=0.2 eps=1 {t2:.7f} (closed form {oracle2:.7f}, stated 0.22829 is off by "
        f"{abs(oracle2 - 0.22829):.1e}); a=0.2 eps=0.7 {t3:.6f} with note [{note}] in {elapsed:.3f}s")
    assert ok


def test_04_velocity_equivalence(record_criterion):
    start = time.perf_counter()
    worst = velocity_equivalence(n=1000, seed=0)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-9 and elapsed < 5.0
    record_criterion("4 velocity equivalence", ok, f"max rel err {worst:.2e} over 1000 tuples in {elapsed:.2f}s")
    assert ok


def test_05_equivariance(record_criterion):
    start = time.perf_counter()
    p, bath = WernerParams.from_a(S, 0.4), BathParams(0.1)
    d = equivariance_distance(p, bath, 10_000, 5.0, bins=40, seed=0)
    control = equivariance_distance(p, bath, 10_000, 5.0, bins=40, seed=0, form="no_osmotic")
    printed = equivariance_distance(p, bath, 10_000, 5.0, bins=40, seed=0, form="printed")
    elapsed = time.perf_counter() - start
    ok = d < 0.05 and control > 0.05 and elapsed < 300
    record_criterion("5 equivariance", ok,
                     f"TV {d:.4f} (< 0.05); osmotic-free control {control:.4f} (> 0.05); "
                     f"printed-sign field {printed:.4f} (informational) in {elapsed:.1f}s")
    assert ok


def test_06_beable_consistency(record_criterion):
    start = time.perf_counter()
    p, bath = WernerParams.from_a(S, 0.4), BathParams(0.1)
    spec = LatticeSpec(0.1, 40)
    flux = 0.0
    for tau in np.linspace(0, 5, 6):
        P = lattice_probabilities(p, bath, tau, spec)
        cur = lattice_current(p, bath, tau, spec)
        f1, f2 = reconstructed_flux(transition_rates(cur, P), P)
        flux = max(flux, np.abs(f1 - cur.axis1).max(), np.abs(f2 - cur.axis2).max())

    dt = suggest_dt(p, bath, spec, 5.0, target=0.05)
    n_steps = int(round(5.0 / dt))
    ens = simulate_beables(p, bath, spec, 10_000, dt, 5.0, seed=0, record_every=n_steps // 3)
    tvs = [block_tv(ens.paths[:, k], lattice_probabilities(p, bath, ens.times[k], spec), spec)
           for k in range(len(ens.times) - 3, len(ens.times))]

    bell = WernerParams.from_a(S, 1.0)
    drifts = {h: drift_check(bell, BathParams(), LatticeSpec.covering(h), (0.0, 0.5), math.pi / 4, 1_000_000, seed=0)
              for h in (0.2, 0.1, 0.05)}
    errs = [drifts[h].relative_error for h in (0.2, 0.1, 0.05)]
    expected = [drifts[h].expected_error for h in (0.2, 0.1, 0.05)]
    sig = [drifts[h].mc_sigma / math.hypot(*drifts[h].analytic) for h in (0.2, 0.1, 0.05)]
    decreasing = all(e2 <= e1 + 3 * s2 for e1, e2, s2 in zip(errs, errs[1:], sig[1:]))
    decreasing &= expected[0] > expected[1] > expected[2]
    elapsed = time.perf_counter() - start
    ok = (flux <= 1e-12 and max(tvs) < 0.05 and ens.max_exit_probability < 0.05 + 1e-12
          and errs[-1] < 0.05 and decreasing and elapsed < 600)
    record_criterion(
        "6 beables", ok,
        f"flux err {flux:.1e}; block TV at omega t={[round(float(t), 3) for t in ens.times[-3:]]} "
        f"{[round(v, 4) for v in tvs]}; drift rel err h=0.2/0.1/0.05 {[round(e, 4) for e in errs]} "
        f"(discretisation part {[round(e, 4) for e in expected]}) in {elapsed:.1f}s")
    assert ok


def test_07_straight_lines(record_criterion):
    p = WernerParams.from_a(S, 0.0)
    rng = np.random.default_rng(0)
    inits = np.vstack([default_initial_grid(), rng.uniform(-3, 3, (200, 2))])
    ts = np.linspace(0.0, 20.0, 401)
    res = integrate_ensemble(inits, p, BathParams(), ts, tol=1e-10)
    dev = float(np.abs(res.y - inits[:, None, :]).max())
    ok = dev <= 1e-12 and not res.truncated.any()
    record_criterion("7 straight lines", ok, f"max |x(t) - x(0)| = {dev:.1e} over omega t in [0, 20]")
    assert ok


def test_08_amplitude_ordering(record_criterion):
    init = PhasePoint(*DEFAULT_AMPLITUDE_INIT)
    eps = [0.0, 0.1, 1 / 3, 0.4, 0.7, 1.0]
    amps = [amplitude_metric(WernerParams.from_a(S, e), BathParams(), init, 10.0) for e in eps]
    ok = amps[0] <= 1e-12 and max(amps) == amps[-1] and amps[-1] > max(amps[:-1])
    record_criterion("8 amplitude ordering", ok,
                     "amplitudes " + ", ".join(f"{e:.3g}:{a:.4f}" for e, a in zip(eps, amps)))
    assert ok


def test_09_channel_invariants(record_criterion):
    g = 0.1
    trace_err, min_eig, identity = 0.0, math.inf, True
    for a, eps, gt in itertools.product(np.linspace(0, 1, 5), np.linspace(0, 1, 5), np.linspace(0, 4, 5)):
        p = WernerParams.from_a(float(a), float(eps))
        rho = werner_damped(p, BathParams(g), float(gt) / g)
        trace_err = max(trace_err, abs(np.trace(rho) - 1))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(rho).min()))
        identity &= bool(np.array_equal(werner_damped(p, BathParams(g), 0.0), werner_initial(p)))
    ok = trace_err <= 1e-12 and min_eig >= -1e-10 and identity
    record_criterion("9 channel invariants", ok,
                     f"trace err {trace_err:.1e}; min eigenvalue {min_eig:.1e}; t=0 identity exact: {identity}")
    assert ok


def test_10_cli_determinism(record_criterion, tmp_path):
    same = {}
    for command in ("trajectories", "beables"):
        outs = [tmp_path / command / "1", tmp_path / command / "2"]
        for out in outs:
            assert cli.main([command, "--out", str(out), "--seed", "7"]) == 0
        files = sorted(f.name for f in outs[0].iterdir())
        same[command] = files and all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files)
        same[command] = same[command] and files == sorted(f.name for f in outs[1].iterdir())
    ok = all(same.values())
    record_criterion("10 determinism", ok, f"byte-identical reruns: {same}")
    assert ok
