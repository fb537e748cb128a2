"""Bohmian velocity field, trajectories and ensemble diagnostics.

Velocities are in units of dx~/d(omega t).  Three forms of the dissipative
field are available:

``"continuity"`` (default)
    v = Im[d rho]/rho - (g/2) x - kappa Re[d rho]/rho, the field whose flow
    carries the position density exactly as the damped master equation does.
``"printed"``
    v = Im[d rho]/rho + kappa Re[d rho]/rho, the compact density-matrix form
    with the opposite sign on the osmotic term.  Kept for comparison; it does
    not transport |psi|^2 when gamma > 0.
``"no_osmotic"``
    v = Im[d rho]/rho - (g/2) x, a deliberately wrong field used as a negative
    control for the equivariance diagnostic.

Here g = gamma/omega, kappa = g (2 nbar + 1)/2 and Re/Im[d rho]/rho are taken
on the unprimed coordinate at x' = x.  All three coincide at gamma = 0.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (DiagnosticFailure, NodalSingularityError, SamplingError,
                     UnsupportedTemperatureError)
from .fockspace import CoordinateKernel, cell_probabilities, diagonal_density, kernel_from_matrix
from .integrate import BatchResult, integrate_batch
from .werner import BathParams, WernerParams, coeff_arrays, werner_damped

FORMS = ("continuity", "printed", "no_osmotic")
NODE_THRESHOLD = 1e-8
BOX = 4.0
CHUNK = 2048

# Default initial conditions for trajectory figures: x1(0) on a fixed grid, x2(0) = x1(0) + 0.25.
DEFAULT_GRID_X1 = (-1.5, -1.0, -0.5, 0.5, 1.0, 1.5)
DEFAULT_OFFSET = 0.25
DEFAULT_AMPLITUDE_INIT = (0.5, 0.75)


def default_initial_grid() -> np.ndarray:
    x1 = np.array(DEFAULT_GRID_X1)
    return np.column_stack([x1, x1 + DEFAULT_OFFSET])


@dataclass(frozen=True)
class PhasePoint:
    x1: float
    x2: float
    tau: float = 0.0


@dataclass
class Trajectory:
    times: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    params: WernerParams
    bath: BathParams
    tol: float
    form: str = "continuity"
    seed: int | None = None
    truncated: bool = False
    last_good: PhasePoint | None = None
    step_sizes: list = field(default_factory=list)
    rejected_steps: int = 0


def _check_form(form):
    if form not in FORMS:
        raise ValueError(f"unknown velocity form {form!r}; expected one of {FORMS}")


def werner_velocity_arrays(p: WernerParams, gamma_over_omega: float, tau, x1, x2,
                           form: str = "continuity"):
    """Vectorised analytic velocity; returns (v1, v2, G) without node checks."""
    a_c, b_c, c_c, p00 = coeff_arrays(p, gamma_over_omega, tau)
    tau = np.asarray(tau, dtype=float)
    g = gamma_over_omega
    s = p.sign
    sin2, cos2 = np.sin(2.0 * tau), np.cos(2.0 * tau)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    den = p00 + 2.0 * b_c * (x1 * x1) * (x2 * x2) + c_c * (x1 * x1 + x2 * x2) + s * 4.0 * a_c * (x1 * x2) * cos2

    def component(own, other):
        # Im and Re of the unprimed derivative of the polynomial factor
        im_part = -2.0 * s * a_c * sin2 * other
        re_part = 2.0 * b_c * own * (other * other) + c_c * own + 2.0 * s * a_c * cos2 * other
        if form == "continuity":
            return (im_part - 0.5 * g * re_part) / den
        if form == "printed":
            return (im_part + 0.5 * g * re_part) / den - 0.5 * g * own
        return im_part / den - 0.5 * g * own

    with np.errstate(divide="ignore", invalid="ignore"):
        return component(x1, x2), component(x2, x1), den


def velocity_analytic(pt: PhasePoint, p: WernerParams, bath: BathParams,
                      form: str = "continuity", node_threshold: float = NODE_THRESHOLD):
    """Closed-form velocity of the damped Werner state at one configuration."""
    _check_form(form)
    if bath.nbar > 0:
        raise UnsupportedTemperatureError("the analytic Werner field is zero-temperature (nbar = 0)")
    v1, v2, den = werner_velocity_arrays(p, bath.gamma_over_omega, pt.tau, pt.x1, pt.x2, form)
    if not den > node_threshold:
        raise NodalSingularityError(f"density vanishes at {pt} (G = {float(den):.3e})", point=pt)
    return float(v1), float(v2)


def velocity_generic(kernel: CoordinateKernel, pt: PhasePoint, bath: BathParams,
                     mass_freq_scale: float = 1.0, form: str = "continuity",
                     node_threshold: float = NODE_THRESHOLD):
    """Velocity from an arbitrary two-mode kernel via its analytic x-derivatives.

    ``mass_freq_scale`` is hbar/M in scaled units and multiplies both the
    phase and the osmotic terms.  ``pt.tau`` is not used; the kernel already
    fixes the time.
    """
    _check_form(form)
    x = (float(pt.x1), float(pt.x2))
    poly = kernel.diagonal_polynomial(*x)
    den = float(np.real(poly))
    if not den > node_threshold:
        raise NodalSingularityError(f"diagonal kernel vanishes at {pt} ({den:.3e})", point=pt)
    g = bath.gamma_over_omega
    kappa = 0.5 * g * (2.0 * bath.nbar + 1.0)
    out = []
    for axis in (0, 1):
        d = complex(kernel.d_unprimed(axis, *x))
        im_ratio = d.imag / den
        re_ratio = d.real / den - x[axis]  # Gaussian envelope contributes -x
        if form == "continuity":
            v = mass_freq_scale * (im_ratio - kappa * re_ratio) - 0.5 * g * x[axis]
        elif form == "printed":
            v = mass_freq_scale * (im_ratio + kappa * re_ratio)
        else:
            v = mass_freq_scale * im_ratio - 0.5 * g * x[axis]
        out.append(v)
    return out[0], out[1]


def werner_rhs(p: WernerParams, bath: BathParams, form: str = "continuity",
               node_threshold: float = NODE_THRESHOLD):
    """Right-hand side for :func:`integrate_batch`; rows with G below threshold are flagged."""
    _check_form(form)
    if bath.nbar > 0:
        raise UnsupportedTemperatureError("the analytic Werner field is zero-temperature (nbar = 0)")
    g = bath.gamma_over_omega

    def rhs(t, y):
        v1, v2, den = werner_velocity_arrays(p, g, t, y[:, 0], y[:, 1], form)
        ok = den > node_threshold
        v = np.column_stack([v1, v2])
        v[~ok] = 0.0
        return v, ok

    return rhs


def _threads() -> int:
    raw = os.environ.get("BOHMFLOW_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def integrate_ensemble(inits, p: WernerParams, bath: BathParams, sample_times, tol=1e-8,
                       tau0=0.0, form="continuity", threads=None) -> BatchResult:
    """Integrate many trajectories; work is split into fixed-size chunks.

    Chunk boundaries do not depend on the thread count and every trajectory
    is advanced independently, so the output is the same for any
    BOHMFLOW_THREADS setting.
    """
    inits = np.atleast_2d(np.asarray(inits, dtype=float))
    rhs = werner_rhs(p, bath, form)
    chunks = [inits[i:i + CHUNK] for i in range(0, len(inits), CHUNK)]
    run = lambda block: integrate_batch(rhs, tau0, block, sample_times, rtol=tol, atol=tol)
    n_threads = threads or _threads()
    if n_threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    if len(parts) == 1:
        return parts[0]
    return BatchResult(
        times=parts[0].times,
        y=np.concatenate([r.y for r in parts]),
        truncated=np.concatenate([r.truncated for r in parts]),
        last_time=np.concatenate([r.last_time for r in parts]),
        last_state=np.concatenate([r.last_state for r in parts]),
        accepted=np.concatenate([r.accepted for r in parts]),
        rejected=np.concatenate([r.rejected for r in parts]),
        node_rejected=np.concatenate([r.node_rejected for r in parts]),
    )


def integrate_trajectory(init: PhasePoint, p: WernerParams, bath: BathParams, tau_end: float,
                         tol: float = 1e-10, sample_times=None, output_dt: float = 0.05,
                         form: str = "continuity", seed=None) -> Trajectory:
    """Adaptive Dormand-Prince integration of one trajectory with dense output."""
    if sample_times is None:
        n = max(1, int(math.ceil((tau_end - init.tau) / output_dt - 1e-9)))
        sample_times = np.linspace(init.tau, tau_end, n + 1)
    res = integrate_batch(werner_rhs(p, bath, form), init.tau, [[init.x1, init.x2]], sample_times,
                          rtol=tol, atol=tol, record_steps=True)
    ys = res.y[0]
    good = ~np.isnan(ys[:, 0])
    last = PhasePoint(float(res.last_state[0, 0]), float(res.last_state[0, 1]), float(res.last_time[0]))
    return Trajectory(times=res.times[good], x1=ys[good, 0], x2=ys[good, 1], params=p, bath=bath,
                      tol=tol, form=form, seed=seed, truncated=bool(res.truncated[0]), last_good=last,
                      step_sizes=res.step_sizes[0], rejected_steps=int(res.rejected[0]))


def initial_kernel(p: WernerParams, bath: BathParams, tau: float = 0.0) -> CoordinateKernel:
    return kernel_from_matrix(werner_damped(p, BathParams(bath.gamma_over_omega, 0.0), tau))


def _envelope(kernel: CoordinateKernel, box: float) -> float:
    grid = np.linspace(-box, box, 401)
    x1, x2 = np.meshgrid(grid, grid)
    return 1.05 * float(np.max(diagonal_density(kernel, x1, x2)))


def sample_initial_ensemble(p: WernerParams, bath: BathParams, n: int, seed: int,
                            method: str = "rejection", box: float = BOX) -> np.ndarray:
    """Draw n configurations from the t = 0 position density on [-box, box]^2.

    Both methods are rejection samplers with a uniform proposal on the box.
    ``"rejection"`` drives them with the PCG64 stream of ``seed``;
    ``"sobol"`` uses a scrambled Sobol sequence in (x1, x2, u) instead, which
    lowers the histogram noise of the accepted set.  Returns an (n, 2) array.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    kernel = initial_kernel(p, bath)
    env = _envelope(kernel, box)
    accepted = []
    have = 0
    proposed = 0
    if method == "rejection":
        rng = np.random.Generator(np.random.PCG64(seed))
        draw = lambda m: rng.random((m, 3))
    elif method == "sobol":
        from scipy.stats import qmc

        sobol = qmc.Sobol(d=3, scramble=True, seed=np.random.default_rng(seed))
        draw = lambda m: sobol.random(1 << int(math.ceil(math.log2(m))))
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    batch = max(1024, 8 * n)
    while have < n:
        u = draw(batch)
        proposed += len(u)
        x1 = box * (2.0 * u[:, 0] - 1.0)
        x2 = box * (2.0 * u[:, 1] - 1.0)
        dens = diagonal_density(kernel, x1, x2)
        if np.any(dens > env):
            raise SamplingError("density exceeded the rejection envelope")
        keep = u[:, 2] * env < dens
        accepted.append(np.column_stack([x1[keep], x2[keep]]))
        have += int(keep.sum())
        if proposed >= 1e5 and have / proposed < 1e-4:
            raise SamplingError(f"acceptance rate {have / proposed:.2e} below 1e-4")
    return np.concatenate(accepted)[:n]


def histogram_tv(points: np.ndarray, kernel: CoordinateKernel, bins: int, box: float = BOX) -> float:
    """Total-variation distance between an empirical sample and the exact cell masses.

    Mass outside the box counts as one extra cell.
    """
    edges = np.linspace(-box, box, bins + 1)
    exact = cell_probabilities(kernel, edges, edges)
    pts = points[~np.isnan(points).any(axis=1)]
    counts, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=[edges, edges])
    emp = counts / len(pts)
    out_emp = 1.0 - emp.sum()
    out_exact = 1.0 - exact.sum()
    return 0.5 * (np.abs(emp - exact).sum() + abs(out_emp - out_exact))


def equivariance_distance(p: WernerParams, bath: BathParams, n: int, tau_check: float,
                          bins: int = 40, seed: int = 0, tol: float = 1e-8,
                          form: str = "continuity", method: str = "sobol") -> float:
    """TV distance between the transported ensemble and |psi(tau_check)|^2 on a bins x bins grid."""
    if n < 1000:
        raise ValueError("equivariance check needs at least 1000 trajectories")
    pts0 = sample_initial_ensemble(p, bath, n, seed, method=method)
    res = integrate_ensemble(pts0, p, bath, [0.0, tau_check], tol=tol, form=form)
    n_trunc = int(res.truncated.sum())
    if n_trunc > 0.01 * n:
        raise DiagnosticFailure(f"{n_trunc} of {n} trajectories truncated at nodes",
                                payload={"truncated": n_trunc, "n": n})
    final = res.y[:, -1, :]
    return histogram_tv(final, initial_kernel(p, bath, tau_check), bins)


def amplitude_metric(p: WernerParams, bath: BathParams, init: PhasePoint, tau_end: float,
                     tol: float = 1e-10, output_dt: float = 0.01, form: str = "continuity") -> float:
    """Largest excursion |x1(tau) - x1(0)| over the sampled trajectory."""
    traj = integrate_trajectory(init, p, bath, tau_end, tol=tol, output_dt=output_dt, form=form)
    if traj.truncated:
        raise NodalSingularityError("trajectory truncated at a node", point=traj.last_good)
    return float(np.max(np.abs(traj.x1 - traj.x1[0])))
