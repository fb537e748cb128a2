"""Lattice beables: nearest-neighbour jump process whose drift is the Bohmian velocity.

Sites are n*h for n in [-N, N] on each axis; arrays are indexed [n1 + N, n2 + N].
Bond currents are evaluated at bond midpoints, so J(site -> nbr) = -J(nbr -> site)
holds exactly.  Rates follow the minimal solution T = max(J, 0) / P(source).
Sites on the boundary have no outward bonds (reflecting walls).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bohm import werner_velocity_arrays, NODE_THRESHOLD
from .errors import ParameterError, RateSingularityError, StepSizeError
from .fockspace import diagonal_density, kernel_from_matrix
from .werner import BathParams, WernerParams, werner_damped


@dataclass(frozen=True)
class LatticeSpec:
    h: float
    half_extent: int

    def __post_init__(self):
        if not self.h > 0:
            raise ParameterError("lattice spacing must be positive")
        if self.half_extent < 4:
            raise ParameterError("half_extent must be at least 4")
        if self.half_extent * self.h < 4.0 - 1e-9:
            raise ParameterError("lattice must cover [-4, 4] (half_extent * h >= 4)")

    @classmethod
    def covering(cls, h: float, box: float = 4.0) -> "LatticeSpec":
        return cls(h, max(4, int(math.ceil(box / h - 1e-9))))

    @property
    def size(self) -> int:
        return 2 * self.half_extent + 1

    @property
    def coords(self) -> np.ndarray:
        return np.arange(-self.half_extent, self.half_extent + 1) * self.h

    def index_of(self, x1: float, x2: float) -> tuple[int, int]:
        """Array index of the site nearest to (x1, x2)."""
        n = self.half_extent
        i = int(np.clip(round(x1 / self.h), -n, n)) + n
        j = int(np.clip(round(x2 / self.h), -n, n)) + n
        return i, j


@dataclass
class LatticeCurrents:
    """Bond currents: ``axis1[i, j]`` flows from site (i, j) to (i+1, j),
    ``axis2[i, j]`` from (i, j) to (i, j+1)."""

    axis1: np.ndarray
    axis2: np.ndarray
    nodal_bonds: int = 0

    def directed(self, site, step) -> float:
        """Current from ``site`` to the neighbour at ``site + step`` (step a unit vector)."""
        i, j = site
        di, dj = step
        if di == 1:
            return float(self.axis1[i, j])
        if di == -1:
            return -float(self.axis1[i - 1, j])
        if dj == 1:
            return float(self.axis2[i, j])
        return -float(self.axis2[i, j - 1])


@dataclass
class TransitionRates:
    """Jump rates out of each site toward (n1+1), (n1-1), (n2+1), (n2-1)."""

    up1: np.ndarray
    down1: np.ndarray
    up2: np.ndarray
    down2: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.up1 + self.down1 + self.up2 + self.down2


def _density(p, bath, tau, x1, x2):
    rho = werner_damped(p, BathParams(bath.gamma_over_omega, 0.0), tau)
    return diagonal_density(kernel_from_matrix(rho), x1, x2)


def lattice_probabilities(p: WernerParams, bath: BathParams, tau: float, spec: LatticeSpec) -> np.ndarray:
    """Site weights P = rho(x, x) h^2 (not renormalised; mass outside the lattice is lost)."""
    x = spec.coords
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    P = _density(p, bath, tau, x1, x2) * spec.h ** 2
    # Werner states are exchange symmetric; averaging removes summation-order roundoff.
    # Roundoff-level negatives at nodes are clipped.
    return np.maximum(0.5 * (P + P.T), 0.0)


def lattice_current(p: WernerParams, bath: BathParams, tau: float, spec: LatticeSpec,
                    form: str = "continuity") -> LatticeCurrents:
    """Bond currents J = rho(mid) v(mid) h with the analytic velocity at the bond midpoint."""
    x = spec.coords
    mid = 0.5 * (x[:-1] + x[1:])
    g = bath.gamma_over_omega
    nodal = 0
    out = []
    for m1, m2, axis in ((mid, x, 0), (x, mid, 1)):
        x1, x2 = np.meshgrid(m1, m2, indexing="ij")
        v1, v2, den = werner_velocity_arrays(p, g, tau, x1, x2, form)
        v = v1 if axis == 0 else v2
        ok = den > NODE_THRESHOLD
        nodal += int((~ok).sum())
        rho = np.where(ok, den, 0.0) * np.exp(-(x1 * x1 + x2 * x2)) / np.pi
        out.append(np.where(ok, rho * v * spec.h, 0.0))
    return LatticeCurrents(axis1=out[0], axis2=out[1], nodal_bonds=nodal)


def transition_rates(currents: LatticeCurrents, probabilities: np.ndarray) -> TransitionRates:
    """Minimal nonnegative rates reproducing the bond currents."""
    P = np.asarray(probabilities, dtype=float)
    shape = P.shape
    rates = {name: np.zeros(shape) for name in ("up1", "down1", "up2", "down2")}
    for J, fwd, bwd, src_f, src_b in (
        (currents.axis1, "up1", "down1", (slice(None, -1), slice(None)), (slice(1, None), slice(None))),
        (currents.axis2, "up2", "down2", (slice(None), slice(None, -1)), (slice(None), slice(1, None))),
    ):
        pos = np.maximum(J, 0.0)
        neg = np.maximum(-J, 0.0)
        for flow, src, name in ((pos, src_f, fwd), (neg, src_b, bwd)):
            p_src = P[src]
            bad = (flow > 0) & (p_src <= 0)
            if bad.any():
                i, j = np.argwhere(bad)[0]
                raise RateSingularityError(f"positive current out of an empty site near index {(i, j)}")
            rate = np.divide(flow, p_src, out=np.zeros_like(flow), where=flow > 0)
            rates[name][src] = rate
    return TransitionRates(**rates)


def reconstructed_flux(rates: TransitionRates, probabilities: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """T(n -> m) P(n) - T(m -> n) P(m) on every bond, per axis."""
    P = np.asarray(probabilities, dtype=float)
    f1 = rates.up1[:-1, :] * P[:-1, :] - rates.down1[1:, :] * P[1:, :]
    f2 = rates.up2[:, :-1] * P[:, :-1] - rates.down2[:, 1:] * P[:, 1:]
    return f1, f2


def rates_at(p, bath, tau, spec, form="continuity") -> TransitionRates:
    return transition_rates(lattice_current(p, bath, tau, spec, form), lattice_probabilities(p, bath, tau, spec))


def suggest_dt(p: WernerParams, bath: BathParams, spec: LatticeSpec, tau_end: float,
               target: float = 0.05, n_probe: int = 51, min_weight: float = 1e-12) -> float:
    """Step size keeping the exit probability below ``target`` at every site that
    carries weight above ``min_weight``, probed on a uniform time grid."""
    worst = 0.0
    for tau in np.linspace(0.0, tau_end, n_probe):
        P = lattice_probabilities(p, bath, tau, spec)
        total = rates_at(p, bath, tau, spec).total
        worst = max(worst, float(total[P > min_weight].max(initial=0.0)))
    if worst == 0.0:
        return min(tau_end, 0.1) if tau_end > 0 else 0.1
    n_steps = int(math.ceil(tau_end * worst / target)) if tau_end > 0 else 1
    return tau_end / max(n_steps, 1) if tau_end > 0 else target / worst


@dataclass
class BeableEnsemble:
    """Walker paths as integer site offsets n (not array indices)."""

    times: np.ndarray
    paths: np.ndarray  # (n_walkers, n_records, 2)
    spec: LatticeSpec
    dt: float
    seed: int
    max_exit_probability: float
    steps: int


_STEPS = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]])


def simulate_beables(p: WernerParams, bath: BathParams, spec: LatticeSpec, n_walkers: int,
                     dt: float, tau_end: float, seed: int, record_every: int = 1,
                     initial_sites=None, form: str = "continuity") -> BeableEnsemble:
    """Fixed-dt jump simulation.

    Each step a walker at site s jumps to neighbour k with probability
    T_k(s, tau) dt (rates refreshed every step) and otherwise stays.  Initial
    sites are drawn from the normalised lattice weights at tau = 0 unless
    ``initial_sites`` (site offsets, shape (n, 2)) is given.  One uniform per
    walker per step is drawn from a single PCG64 stream in walker order.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    N = spec.half_extent
    if initial_sites is None:
        P0 = lattice_probabilities(p, bath, 0.0, spec).ravel()
        flat = rng.choice(P0.size, size=n_walkers, p=P0 / P0.sum())
        idx = np.column_stack(np.unravel_index(flat, (spec.size, spec.size)))
    else:
        idx = np.asarray(initial_sites, dtype=int).reshape(-1, 2) + N
        if len(idx) != n_walkers:
            raise ValueError("initial_sites must have n_walkers rows")
    n_steps = int(round(tau_end / dt))
    if n_steps < 0 or abs(n_steps * dt - tau_end) > 1e-9 * max(1.0, tau_end):
        raise ValueError("tau_end must be an integer multiple of dt")
    record_at = list(range(0, n_steps + 1, record_every))
    if record_at[-1] != n_steps:
        record_at.append(n_steps)
    paths = np.empty((n_walkers, len(record_at), 2), dtype=np.int32)
    times = np.array(record_at, dtype=float) * dt
    paths[:, 0] = idx - N
    rec = 1
    max_exit = 0.0
    for step in range(n_steps):
        tau = step * dt
        rates = rates_at(p, bath, tau, spec, form)
        i, j = idx[:, 0], idx[:, 1]
        probs = np.column_stack([rates.up1[i, j], rates.down1[i, j], rates.up2[i, j], rates.down2[i, j]]) * dt
        exit_p = probs.sum(axis=1)
        worst = int(np.argmax(exit_p))
        if exit_p[worst] >= 1.0:
            raise StepSizeError(
                f"exit probability {exit_p[worst]:.3f} >= 1 at site {tuple(idx[worst] - N)} (tau = {tau:.4f})",
                site=tuple(int(v) for v in idx[worst] - N),
            )
        max_exit = max(max_exit, float(exit_p[worst]))
        u = rng.random(n_walkers)
        cum = np.cumsum(probs, axis=1)
        choice = (u[:, None] >= cum).sum(axis=1)  # 4 means stay
        moved = choice < 4
        idx[moved] += _STEPS[choice[moved]]
        if rec < len(record_at) and step + 1 == record_at[rec]:
            paths[:, rec] = idx - N
            rec += 1
    return BeableEnsemble(times=times, paths=paths, spec=spec, dt=dt, seed=seed,
                          max_exit_probability=max_exit, steps=n_steps)


def block_tv(sites: np.ndarray, weights: np.ndarray, spec: LatticeSpec, block: int = 9) -> float:
    """TV distance between walker occupation and normalised lattice weights,
    after pooling sites into block x block cells."""
    N = spec.half_extent
    counts = np.zeros((spec.size, spec.size))
    np.add.at(counts, (sites[:, 0] + N, sites[:, 1] + N), 1.0)
    counts /= len(sites)
    w = weights / weights.sum()
    starts = np.arange(0, spec.size, block)
    pool = lambda a: np.add.reduceat(np.add.reduceat(a, starts, axis=0), starts, axis=1)
    return 0.5 * float(np.abs(pool(counts) - pool(w)).sum())


def evolve_master_equation(p: WernerParams, bath: BathParams, spec: LatticeSpec, dt: float,
                           tau_end: float, form: str = "continuity") -> np.ndarray:
    """Deterministic forward-Euler evolution of the lattice master equation
    from the normalised tau = 0 weights, with the same rates as the walkers."""
    P = lattice_probabilities(p, bath, 0.0, spec)
    P = P / P.sum()
    for step in range(int(round(tau_end / dt))):
        r = rates_at(p, bath, step * dt, spec, form)
        out = r.total * P
        inflow = np.zeros_like(P)
        inflow[1:, :] += r.up1[:-1, :] * P[:-1, :]
        inflow[:-1, :] += r.down1[1:, :] * P[1:, :]
        inflow[:, 1:] += r.up2[:, :-1] * P[:, :-1]
        inflow[:, :-1] += r.down2[:, 1:] * P[:, 1:]
        P = P + dt * (inflow - out)
    return P


@dataclass
class DriftCheck:
    empirical: tuple[float, float]
    analytic: tuple[float, float]
    relative_error: float
    expected: tuple[float, float]
    expected_error: float
    mc_sigma: float
    site: tuple[int, int]


def _rel(est, ref) -> float:
    diff = math.hypot(est[0] - ref[0], est[1] - ref[1])
    scale = math.hypot(*ref)
    if scale == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return diff / scale


def drift_check(p: WernerParams, bath: BathParams, spec: LatticeSpec, site, tau: float,
                n_samples: int, seed: int, dt: float | None = None,
                form: str = "continuity") -> DriftCheck:
    """Empirical drift h * <signed jumps>/dt over one-step trials from ``site``
    (coordinates; the nearest lattice site is used) against the analytic velocity."""
    i, j = spec.index_of(*site)
    rates = rates_at(p, bath, tau, spec, form)
    r = np.array([rates.up1[i, j], rates.down1[i, j], rates.up2[i, j], rates.down2[i, j]])
    total = r.sum()
    if dt is None:
        dt = 0.05 / total if total > 0 else 1.0
    probs = r * dt
    if probs.sum() >= 1.0:
        raise StepSizeError(f"exit probability {probs.sum():.3f} >= 1", site=(i - spec.half_extent, j - spec.half_extent))
    rng = np.random.Generator(np.random.PCG64(seed))
    counts = rng.multinomial(n_samples, np.append(probs, 1.0 - probs.sum()))
    h = spec.h
    emp = (h * (counts[0] - counts[1]) / (n_samples * dt), h * (counts[2] - counts[3]) / (n_samples * dt))
    expected = (h * (r[0] - r[1]), h * (r[2] - r[3]))
    x = spec.coords
    v1, v2, den = werner_velocity_arrays(p, bath.gamma_over_omega, tau, x[i], x[j], form)
    analytic = (float(v1), float(v2))
    sigma = h * math.sqrt(max(probs.sum(), 0.0) / n_samples) / dt
    return DriftCheck(empirical=emp, analytic=analytic, relative_error=_rel(emp, analytic),
                      expected=expected, expected_error=_rel(expected, analytic),
                      mc_sigma=sigma, site=(i - spec.half_extent, j - spec.half_extent))
