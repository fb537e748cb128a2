"""Batched Dormand-Prince 5(4) integrator with dense output and node rejection.

Each row of the batch carries its own time and step size, so the result for
one trajectory does not depend on which other trajectories share the batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

C_NODES = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A_MATRIX = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
ERR = B5 - B4
# continuous extension, y(t + th*h) = y + h * K^T (P @ [th, th^2, th^3, th^4])
DENSE_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
MAX_NODE_REJECTIONS = 60
MIN_STEP_REL = 1e-13


@dataclass
class BatchResult:
    """Samples of a batch integration.

    ``y`` has shape (n, n_samples, dim); entries after a truncation are NaN.
    """

    times: np.ndarray
    y: np.ndarray
    truncated: np.ndarray
    last_time: np.ndarray
    last_state: np.ndarray
    accepted: np.ndarray
    rejected: np.ndarray
    node_rejected: np.ndarray
    step_sizes: list = field(default_factory=list)


def integrate_batch(rhs, t0, y0, sample_times, rtol=1e-8, atol=None, h0=None,
                    fixed_step=None, max_steps=1_000_000, record_steps=False):
    """Integrate dy/dt = rhs(t, y) for a batch of initial states.

    ``rhs(t, y)`` receives t of shape (m,) and y of shape (m, dim) and returns
    ``(dydt, ok)``; rows with ok False are treated as nodal hits: the step is
    rejected and halved, and after 60 consecutive such rejections the row is
    truncated at its last accepted point.

    With ``fixed_step`` set, error control is skipped and every step has that
    size (used for order checks).
    """
    y0 = np.atleast_2d(np.asarray(y0, dtype=float))
    n, dim = y0.shape
    ts = np.asarray(sample_times, dtype=float)
    if ts.ndim != 1 or ts.size == 0 or np.any(np.diff(ts) <= 0) or ts[0] < t0:
        raise ValueError("sample_times must be strictly increasing and start at or after t0")
    t_end = ts[-1]
    atol = rtol if atol is None else atol

    out = np.full((n, ts.size, dim), np.nan)
    next_idx = np.zeros(n, dtype=int)
    at_start = ts == t0
    if at_start.any():
        out[:, 0, :] = y0
        next_idx[:] = 1

    t = np.full(n, float(t0))
    y = y0.copy()
    if fixed_step is not None:
        h = np.full(n, float(fixed_step))
    elif h0 is not None:
        h = np.full(n, float(h0))
    else:
        h = np.full(n, min(1e-2, max(t_end - t0, 1e-12)))
    done = next_idx >= ts.size
    truncated = np.zeros(n, dtype=bool)
    node_streak = np.zeros(n, dtype=int)
    accepted = np.zeros(n, dtype=int)
    rejected = np.zeros(n, dtype=int)
    node_rejected = np.zeros(n, dtype=int)
    steps = [[] for _ in range(n)] if record_steps else []

    f0, ok0 = rhs(t, y)
    truncated |= ~ok0 & ~done
    k_first = np.where(ok0[:, None], f0, 0.0)

    for _ in range(max_steps):
        act = np.flatnonzero(~done & ~truncated)
        if act.size == 0:
            break
        ta, ya, ha = t[act], y[act], h[act]
        ha = np.minimum(ha, t_end - ta)
        k = np.empty((7, act.size, dim))
        k[0] = k_first[act]
        ok = np.ones(act.size, dtype=bool)
        for s in range(1, 6):
            ys = ya + ha[:, None] * np.tensordot(A_MATRIX[s], k[:s], axes=(0, 0))
            k[s], oks = rhs(ta + C_NODES[s] * ha, ys)
            ok &= oks
        y_new = ya + ha[:, None] * np.tensordot(B5[:6], k[:6], axes=(0, 0))
        t_new = np.where(ha == t_end - ta, t_end, ta + ha)
        k[6], ok7 = rhs(t_new, y_new)
        ok &= ok7

        if fixed_step is not None:
            err = np.zeros(act.size)
        else:
            scale = atol + rtol * np.maximum(np.abs(ya), np.abs(y_new))
            e = ha[:, None] * np.tensordot(ERR, k, axes=(0, 0)) / scale
            err = np.sqrt(np.mean(e * e, axis=1))
        good = ok & (err <= 1.0)

        # nodal hits: halve, count the streak
        node = ~ok
        idx = act[node]
        node_streak[idx] += 1
        node_rejected[idx] += 1
        h[idx] = 0.5 * ha[node]
        truncated[idx[node_streak[idx] >= MAX_NODE_REJECTIONS]] = True
        # a step that can no longer advance t means the row is pinned at a node
        truncated[idx[h[idx] <= MIN_STEP_REL * np.maximum(1.0, np.abs(ta[node]))]] = True

        # error rejections
        bad = ok & ~good
        idx = act[bad]
        rejected[idx] += 1
        node_streak[idx] = 0
        fac = np.maximum(MIN_FACTOR, SAFETY * err[bad] ** -0.2)
        h[idx] = ha[bad] * np.minimum(1.0, fac)

        if not good.any():
            continue
        gi = act[good]
        t_old, y_old, hg = ta[good], ya[good], ha[good]
        kg = k[:, good, :]
        node_streak[gi] = 0
        accepted[gi] += 1
        if record_steps:
            for i, hh in zip(gi, hg):
                steps[i].append(float(hh))

        _dense_fill(out, next_idx, ts, gi, t_old, y_old, hg, kg, t_new[good], y_new[good])

        t[gi] = t_new[good]
        y[gi] = y_new[good]
        k_first[gi] = kg[6]
        if fixed_step is None:
            e = err[good]
            fac = np.where(e == 0.0, MAX_FACTOR, SAFETY * np.where(e == 0.0, 1.0, e) ** -0.2)
            h[gi] = hg * np.clip(fac, MIN_FACTOR, MAX_FACTOR)
        else:
            h[gi] = fixed_step
        done[gi] = next_idx[gi] >= ts.size
    else:
        truncated |= ~done

    return BatchResult(times=ts, y=out, truncated=truncated, last_time=t, last_state=y,
                       accepted=accepted, rejected=rejected, node_rejected=node_rejected,
                       step_sizes=steps)


def _dense_fill(out, next_idx, ts, rows, t_old, y_old, h, k, t_new, y_new):
    """Write every requested sample in (t_old, t_new] for the accepted rows."""
    n_ts = ts.size
    pending = np.arange(rows.size)
    while pending.size:
        r = rows[pending]
        j = next_idx[r]
        live = j < n_ts
        pending, r, j = pending[live], r[live], j[live]
        if pending.size == 0:
            break
        target = ts[j]
        inside = target <= t_new[pending]
        pending, r, j, target = pending[inside], r[inside], j[inside], target[inside]
        if pending.size == 0:
            break
        exact = target == t_new[pending]
        theta = (target - t_old[pending]) / h[pending]
        powers = theta[:, None] ** np.arange(1, 5)[None, :]
        q = powers @ DENSE_P.T  # (m, 7)
        yi = y_old[pending] + h[pending, None] * np.einsum("ms,smd->md", q, k[:, pending, :])
        yi[exact] = y_new[pending[exact]]
        out[r, j, :] = yi
        next_idx[r] = j + 1
