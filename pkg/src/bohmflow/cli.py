"""Command-line entry point.

    bohmflow {state,concurrence,trajectories,amplitude,beables,validate}
             [--config PATH] [--out DIR] [--seed N] [--no-figures]

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure
(including a failed ``validate`` run).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config

log = logging.getLogger("bohmflow")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class NumericalFailure(Exception):
    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload or {}


def _num(x) -> str:
    """Shortest round-trip decimal form of a binary64 value."""
    return repr(float(x))


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else str(v) if isinstance(v, (int, np.integer)) else _num(v)
                              for v in row) + "\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(path: Path, obj):
    with open(path, "w", newline="\n") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _meta(cfg: RunConfig, **extra) -> dict:
    out = {"version": __version__, "config": cfg.to_dict()}
    out.update(extra)
    return out


def _params(cfg):
    from .werner import BathParams, WernerParams

    return WernerParams.from_a(cfg.a, cfg.epsilon, cfg.sign_int), BathParams(cfg.gamma_over_omega, cfg.nbar)


def _time_grid(t_max: float, dt: float) -> np.ndarray:
    n = max(1, int(math.ceil(t_max / dt - 1e-9)))
    return np.linspace(0.0, t_max, n + 1)


def cmd_state(cfg, out: Path, figures: bool):
    from .werner import werner_damped

    p, bath = _params(cfg)
    times = _time_grid(cfg.t_max_omega, cfg.output_dt_omega)
    mats = []
    for tau in times:
        rho = werner_damped(p, bath, float(tau))
        mats.append([[[float(z.real), float(z.imag)] for z in row] for row in rho])
    write_json(out / "state.json", _meta(cfg, basis=["00", "01", "10", "11"], omega_t=times,
                                         gamma_t=times * cfg.gamma_over_omega, matrices=mats))
    return [out / "state.json"]


def cmd_concurrence(cfg, out: Path, figures: bool):
    from .entanglement import (concurrence, separability_threshold, sudden_death_report,
                               sudden_death_time, x_state_sudden_death)
    from .errors import DomainError
    from .werner import damped_state

    p, bath = _params(cfg)
    if cfg.nbar > 0:
        raise NumericalFailure("concurrence curve uses the zero-temperature channel", {"nbar": cfg.nbar})
    gts = np.linspace(0.0, cfg.concurrence.gamma_t_max, cfg.concurrence.points)
    values = [concurrence(damped_state(p, float(gt))).value for gt in gts]
    write_csv(out / "concurrence.csv", ["gamma_t", "concurrence"], zip(gts, values))
    eps_star = separability_threshold(p.a, p.b, p.sign)
    try:
        sd = sudden_death_time(p)
        status = "asymptotic" if math.isinf(sd) else "finite"
    except DomainError:
        sd, status = None, "separable at t = 0"
    notes = [row["note"] for row in sudden_death_report() if not row["agrees"]]
    side = _meta(cfg, epsilon_star=eps_star, gamma_t_sd=sd, sudden_death=status,
                 gamma_t_sd_closed_form=x_state_sudden_death(p) if status != "separable at t = 0" else None,
                 reported_sudden_death=sudden_death_report(), notes=notes)
    write_json(out / "concurrence.json", side)
    files = [out / "concurrence.csv", out / "concurrence.json"]
    if figures:
        from .plotting import plot_concurrence

        plot_concurrence(gts, values, out / "concurrence.png",
                         gamma_t_sd=sd if status == "finite" else None, meta=_meta(cfg))
        files.append(out / "concurrence.png")
    return files


def _initial_conditions(cfg, p, bath):
    from .bohm import default_initial_grid, sample_initial_ensemble

    ic = cfg.initial_conditions
    if ic == "default-grid":
        return default_initial_grid()
    if ic == "sampled":
        return sample_initial_ensemble(p, bath, cfg.n_traj, cfg.seed, method="rejection")
    return np.asarray(ic, dtype=float)


def cmd_trajectories(cfg, out: Path, figures: bool):
    from .bohm import integrate_ensemble

    p, bath = _params(cfg)
    inits = _initial_conditions(cfg, p, bath)
    times = _time_grid(cfg.t_max_omega, cfg.output_dt_omega)
    res = integrate_ensemble(inits, p, bath, times, tol=cfg.integrator.tol)
    rows = []
    for k in range(len(inits)):
        for j, tau in enumerate(times):
            x1, x2 = res.y[k, j]
            if np.isnan(x1):
                break
            rows.append((k, tau, x1, x2))
    write_csv(out / "trajectories.csv", ["traj_id", "omega_t", "x1", "x2"], rows)
    meta = _meta(
        cfg,
        params={"a": p.a, "b": p.b, "epsilon": p.epsilon, "sign": p.sign},
        bath={"gamma_over_omega": bath.gamma_over_omega, "nbar": bath.nbar},
        seed=cfg.seed,
        integrator={"method": "dormand-prince 5(4)", "rtol": cfg.integrator.tol, "atol": cfg.integrator.tol,
                    "node_threshold": 1e-8, "max_node_rejections": 60},
        initial_conditions=inits,
        truncated=res.truncated,
        last_good=[{"omega_t": t, "x1": s[0], "x2": s[1]} for t, s in zip(res.last_time, res.last_state)],
        accepted_steps=res.accepted,
        rejected_steps=res.rejected,
    )
    write_json(out / "trajectories.json", meta)
    files = [out / "trajectories.csv", out / "trajectories.json"]
    if figures:
        from .plotting import plot_trajectories

        shown = min(len(inits), 12)
        plot_trajectories(times, res.y[:shown, :, 0], res.y[:shown, :, 1], out / "trajectories.png",
                          title=rf"a = {p.a:.3g}, $\epsilon$ = {p.epsilon:.3g}, $\gamma/\omega$ = {bath.gamma_over_omega:g}",
                          meta=_meta(cfg))
        files.append(out / "trajectories.png")
    if res.truncated.any():
        raise NumericalFailure("trajectories truncated at nodal points",
                               {"truncated_ids": np.flatnonzero(res.truncated).tolist(),
                                "files": [str(f) for f in files]})
    return files


def cmd_amplitude(cfg, out: Path, figures: bool):
    from .bohm import PhasePoint, amplitude_metric
    from .werner import BathParams, WernerParams

    bath = BathParams(cfg.gamma_over_omega, cfg.nbar)
    init = PhasePoint(*map(float, cfg.amplitude.initial_condition))
    eps = [float(e) for e in cfg.amplitude.epsilons]
    amps = [amplitude_metric(WernerParams.from_a(cfg.a, e, cfg.sign_int), bath, init, cfg.t_max_omega,
                             tol=cfg.integrator.tol, output_dt=cfg.output_dt_omega) for e in eps]
    write_csv(out / "amplitude.csv", ["epsilon", "amplitude"], zip(eps, amps))
    write_json(out / "amplitude.json", _meta(cfg, initial_condition=[init.x1, init.x2],
                                             argmax_epsilon=eps[int(np.argmax(amps))]))
    files = [out / "amplitude.csv", out / "amplitude.json"]
    if figures:
        from .plotting import plot_amplitude

        plot_amplitude(eps, amps, out / "amplitude.png", meta=_meta(cfg))
        files.append(out / "amplitude.png")
    return files


def cmd_beables(cfg, out: Path, figures: bool):
    from .beable import (LatticeSpec, block_tv, drift_check, lattice_current, lattice_probabilities,
                         reconstructed_flux, simulate_beables, suggest_dt, transition_rates)

    p, bath = _params(cfg)
    spec = LatticeSpec(cfg.lattice.h, cfg.lattice.half_extent)
    t_end = cfg.t_max_omega
    dt = cfg.lattice.dt or suggest_dt(p, bath, spec, t_end, target=0.05)
    n_steps = max(1, int(round(t_end / dt)))
    dt = t_end / n_steps
    every = max(1, int(round(cfg.output_dt_omega / dt)))
    ens = simulate_beables(p, bath, spec, cfg.n_traj, dt, t_end, cfg.seed, record_every=every)
    rows = ((w, ens.times[k], int(ens.paths[w, k, 0]), int(ens.paths[w, k, 1]))
            for w in range(ens.paths.shape[0]) for k in range(len(ens.times)))
    write_csv(out / "beables.csv", ["walker_id", "omega_t", "n1", "n2"], rows)

    checkpoints = []
    for target in (t_end / 3, 2 * t_end / 3, t_end):
        k = int(np.argmin(np.abs(ens.times - target)))
        tau = float(ens.times[k])
        checkpoints.append({"omega_t": tau, "tv": block_tv(ens.paths[:, k], lattice_probabilities(p, bath, tau, spec),
                                                           spec, cfg.beables.block)})
    cur = lattice_current(p, bath, 0.0, spec)
    P = lattice_probabilities(p, bath, 0.0, spec)
    f1, f2 = reconstructed_flux(transition_rates(cur, P), P)
    flux_err = max(float(np.abs(f1 - cur.axis1).max()), float(np.abs(f2 - cur.axis2).max()))
    d = drift_check(p, bath, spec, tuple(cfg.beables.drift_site), cfg.beables.drift_omega_t,
                    cfg.beables.drift_samples, cfg.seed)
    report = _meta(cfg, dt=dt, steps=ens.steps, max_exit_probability=ens.max_exit_probability,
                   marginal_tv={"block": cfg.beables.block, "checkpoints": checkpoints},
                   flux_reconstruction_max_error=flux_err,
                   drift_check={"site": d.site, "omega_t": cfg.beables.drift_omega_t,
                                "samples": cfg.beables.drift_samples, "empirical": d.empirical,
                                "analytic": d.analytic, "relative_error": d.relative_error,
                                "expected": d.expected, "expected_relative_error": d.expected_error,
                                "mc_sigma": d.mc_sigma})
    write_json(out / "beables.json", report)
    files = [out / "beables.csv", out / "beables.json"]
    if figures:
        from .plotting import plot_walker_marginal

        plot_walker_marginal(ens.paths[:, -1], lattice_probabilities(p, bath, float(ens.times[-1]), spec),
                             spec.h, out / "beables.png", meta=_meta(cfg))
        files.append(out / "beables.png")
    return files


def cmd_validate(cfg, out: Path, figures: bool):
    from .validation import run_suite

    report = run_suite(cfg)
    write_json(out / "validate.json", report)
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: measured={_clean(c['measured'])!r} "
              f"threshold={_clean(c['threshold'])!r}")
    for note in report["notes"]:
        print(f"NOTE  {note}")
    if not report["passed"]:
        raise NumericalFailure("validation failed",
                               {"failed": [c["name"] for c in report["checks"] if not c["passed"]]})
    return [out / "validate.json"]


COMMANDS = {
    "state": cmd_state,
    "concurrence": cmd_concurrence,
    "trajectories": cmd_trajectories,
    "amplitude": cmd_amplitude,
    "beables": cmd_beables,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bohmflow", description=__doc__.split("\n")[0] or None)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, default=None, help="JSON or key = value config file")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    return parser


def main(argv=None) -> int:
    from .errors import BohmflowError

    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.check()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    try:
        files = COMMANDS[args.command](cfg, out, not args.no_figures)
    except NumericalFailure as exc:
        print(json.dumps({"error": str(exc), "payload": _clean(exc.payload)}), file=sys.stderr)
        return EXIT_NUMERIC
    except BohmflowError as exc:
        payload = _clean(getattr(exc, "payload", None) or {})
        point = getattr(exc, "point", None)
        if point is not None:
            payload["point"] = {"x1": point.x1, "x2": point.x2, "omega_t": point.tau}
        print(json.dumps({"error": str(exc), "type": type(exc).__name__, "payload": payload}), file=sys.stderr)
        return EXIT_NUMERIC
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
