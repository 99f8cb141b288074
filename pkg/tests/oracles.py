"""Independent reference computations the tests check the package against.

Everything here deliberately avoids the package's own divided-difference
and tensor-building code paths: predictions go through the Lagrange form,
segment costs through a literal per-step loop, and the uniform-grid
predictor through classical finite differences.
"""

from __future__ import annotations

from math import factorial

import numpy as np


def lagrange_predict(points, t: float) -> np.ndarray:
    """Interpolating-polynomial value at t via the Lagrange basis."""
    xs = [float(p[0]) for p in points]
    ys = [np.asarray(p[1], dtype=np.float64) for p in points]
    acc = np.zeros_like(ys[0])
    for j, (xj, yj) in enumerate(zip(xs, ys)):
        weight = 1.0
        for r, xr in enumerate(xs):
            if r != j:
                weight *= (t - xr) / (xj - xr)
        acc = acc + weight * yj
    return acc


def segment_cost_oracle(traj, i, j, k, order, dim_mode, aggregate_mode, bound_mode) -> float:
    """Literal evaluation of the per-segment skipping cost."""
    T = traj.total_steps
    if dim_mode == "2d":
        points = [(j + 1, traj.at(j + 1)), (j, traj.at(j))] if j + 1 <= T else [(j, traj.at(j))]
    else:
        if i is None or i == T + 1:
            points = [(j, traj.at(j))]
        else:
            points = [(i, traj.at(i)), (j, traj.at(j))]
    if order == 0:
        points = points[-1:]
    lo = k if bound_mode == "paper" else k + 1
    taus = list(range(lo, j))
    if aggregate_mode == "term":
        taus = taus[:1]
    total = 0.0
    for tau in taus:
        pred = lagrange_predict(points, tau)
        total += float(np.abs(traj.at(tau) - pred).sum())
    return total


def taylor_fd_predict(history, t: float) -> np.ndarray:
    """Uniform-grid extrapolation from cached finite differences.

    ``history`` is [(t0 + m*N, h), ..., (t0 + N, h), (t0, h)], oldest first
    with constant spacing N; the prediction at t = t0 - k uses the finite
    differences of the cached features and step counts in units of N.
    """
    ts = [float(p[0]) for p in history]
    spacings = {round(a - b, 12) for a, b in zip(ts, ts[1:])}
    assert len(spacings) == 1, "history must be uniformly spaced"
    N = spacings.pop()
    newest_t = ts[-1]
    k = newest_t - t
    rows = [np.asarray(p[1], dtype=np.float64) for p in history][::-1]  # newest first
    diffs = [rows[0]]
    level = rows
    for _ in range(1, len(rows)):
        level = [level[r + 1] - level[r] for r in range(len(level) - 1)]
        diffs.append(level[0])
    acc = np.zeros_like(rows[0])
    prod = 1.0
    for i, diff in enumerate(diffs):
        if i > 0:
            prod *= -k - (i - 1) * N
        acc = acc + diff * prod / (factorial(i) * N**i)
    return acc


def objective_oracle(tensor_values, total_steps, steps, prefix) -> float:
    """Schedule objective summed straight from the raw value array."""
    no_pred = total_steps + 1
    seq = list(steps) + [0]
    total = 0.0
    for m in range(1, len(steps) + 1):
        if m <= prefix - 1:
            continue
        i = seq[m - 2] if m >= 2 else no_pred
        total += tensor_values[i, seq[m - 1], seq[m]]
    return total


def random_cost_values(total_steps: int, rng, i_independent: bool = False) -> np.ndarray:
    """Dense random tensor values over exactly the valid (i, j, k) triples."""
    n = total_steps + 2
    values = np.zeros((n, n, n))
    for j in range(1, total_steps + 1):
        for k in range(j):
            if i_independent:
                values[j + 1 : n, j, k] = rng.uniform(0.0, 1.0)
            else:
                values[j + 1 : n, j, k] = rng.uniform(0.0, 1.0, size=n - j - 1)
    return values
