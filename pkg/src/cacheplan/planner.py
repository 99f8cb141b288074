"""Key-timestep schedule selection over a calibrated cost tensor.

Three solvers minimize the same objective — the sum of path-conditioned
segment costs along the schedule, with a sentinel terminal step 0:

- ``plan_paper_dp``: table DP over (step count, timestep) states whose
  transitions condition each segment cost on the stored predecessor of the
  source state. Fast (O(K T^2)) but the single stored predecessor is a
  first-order compression of a second-order cost, so it is a heuristic on
  tensors whose entries genuinely depend on the predecessor.
- ``plan_exact_dp``: DP over (step count, last two keys) states; exact for
  the stated objective at O(K T^3).
- ``brute_force_plan``: exhaustive enumeration; the test oracle.

Every feasible schedule starts at T and has its first M steps pinned to
T, T-1, ..., T-M+1; segments inside that enforced prefix carry zero cost,
mirroring the DP initialization, so solver table values and recomputed
objectives agree exactly.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .cost import CostTensor, CostVariant
from .errors import ConfigError, FormatError, InfeasibleError


@dataclass(frozen=True)
class Schedule:
    """K strictly decreasing key timesteps, steps[0] = T, all >= 1."""

    total_steps: int
    steps: tuple[int, ...]
    enforced_prefix: int
    objective: float

    def __post_init__(self) -> None:
        steps = tuple(int(s) for s in self.steps)
        object.__setattr__(self, "steps", steps)
        T, M = self.total_steps, self.enforced_prefix
        if not steps:
            raise ConfigError("schedule has no steps")
        if not (1 <= M <= len(steps) <= T):
            raise ConfigError(f"need 1 <= M <= K <= T, got M={M}, K={len(steps)}, T={T}")
        if steps[0] != T:
            raise ConfigError(f"first step must be T={T}, got {steps[0]}")
        if any(b >= a for a, b in zip(steps, steps[1:])):
            raise ConfigError(f"steps must be strictly decreasing, got {steps}")
        if steps[-1] < 1:
            raise ConfigError(f"steps must stay >= 1, got terminal {steps[-1]}")
        expected_prefix = tuple(range(T, T - M, -1))
        if steps[:M] != expected_prefix:
            raise ConfigError(
                f"first {M} steps must be {expected_prefix}, got {steps[:M]}"
            )

    @property
    def num_steps(self) -> int:
        return len(self.steps)


@dataclass
class PlanTables:
    """Solver work tables, kept for inspection and backtracking checks.

    ``costs``/``predecessors`` are the (K+2, T+1) tables of the
    predecessor-conditioned table DP; the exact solver additionally fills
    the (K+2, T+2, T+1) state arrays over (step count, previous key,
    current key).
    """

    costs: np.ndarray
    predecessors: np.ndarray
    exact_costs: np.ndarray | None = None
    exact_back: np.ndarray | None = None


def _check_plan_args(tensor: CostTensor, num_steps: int, prefix: int) -> None:
    T = tensor.total_steps
    if prefix < 1 or prefix > num_steps or num_steps > T:
        raise InfeasibleError(
            f"infeasible plan: need 1 <= M <= K <= T, got M={prefix}, K={num_steps}, T={T}"
        )


def _objective_for_steps(tensor: CostTensor, steps, prefix: int) -> float:
    """Sum of conditioned segment costs, prefix-internal segments zeroed."""
    C = tensor.values
    no_pred = tensor.no_predecessor
    seq = tuple(steps) + (0,)
    total = 0.0
    for m in range(1, len(steps) + 1):  # segment from t_m down to t_{m+1}
        if m <= prefix - 1:
            continue
        i = seq[m - 2] if m >= 2 else no_pred
        total += C[i, seq[m - 1], seq[m]]
    return float(total)


def objective_of(schedule: Schedule, tensor: CostTensor) -> float:
    """Recompute a schedule's objective on a tensor (self-consistency op)."""
    if schedule.total_steps != tensor.total_steps:
        raise ConfigError(
            f"schedule T={schedule.total_steps} does not match tensor T={tensor.total_steps}"
        )
    return _objective_for_steps(tensor, schedule.steps, schedule.enforced_prefix)


def plan_paper_dp(tensor: CostTensor, num_steps: int, prefix: int = 3):
    """Schedule by the predecessor-conditioned table DP with backtracking.

    Ties in the transition minimum break toward the larger source timestep,
    keeping computation denser in the early high-change regime.
    """
    _check_plan_args(tensor, num_steps, prefix)
    T, K, M = tensor.total_steps, num_steps, prefix
    C = tensor.values
    D = np.full((K + 2, T + 1), np.inf)
    P = np.full((K + 2, T + 1), -1, dtype=np.int64)
    for m in range(1, M + 1):
        k = T - m + 1
        D[m, k] = 0.0
        P[m, k] = k + 1
    for m in range(M + 1, K + 2):
        for k in range(T - m + 1, -1, -1):
            js = np.arange(k + 1, T + 1)
            prev = D[m - 1, js]
            finite = np.isfinite(prev)
            if not finite.any():
                continue
            js = js[finite]
            vals = prev[finite] + C[P[m - 1, js], js, k]
            pick = np.argmin(vals[::-1])  # first min of reversed = largest j on ties
            D[m, k] = vals[::-1][pick]
            P[m, k] = js[::-1][pick]
    if not np.isfinite(D[K + 1, 0]):
        raise InfeasibleError(f"no feasible schedule for T={T}, K={K}, M={M}")
    steps_rev = []
    cur = 0
    for m in range(K, 0, -1):
        cur = int(P[m + 1, cur])
        steps_rev.append(cur)
    schedule = Schedule(T, tuple(reversed(steps_rev)), M, float(D[K + 1, 0]))
    return schedule, PlanTables(costs=D, predecessors=P)


def plan_exact_dp(tensor: CostTensor, num_steps: int, prefix: int = 3):
    """Globally optimal schedule via DP over (last two keys) states."""
    _check_plan_args(tensor, num_steps, prefix)
    T, K, M = tensor.total_steps, num_steps, prefix
    C = tensor.values
    no_pred = tensor.no_predecessor
    Dx = np.full((K + 2, T + 2, T + 1), np.inf)
    Bx = np.full((K + 2, T + 2, T + 1), -1, dtype=np.int64)
    if M == 1:
        Dx[1, no_pred, T] = 0.0
    else:
        Dx[M, T - M + 2, T - M + 1] = 0.0
    for m in range(M, K + 1):
        nxt = m + 1
        for j in range(1, T - m + 2):
            col = Dx[m, j + 1 : T + 2, j]
            finite = np.isfinite(col)
            if not finite.any():
                continue
            ks = np.arange(1, j) if nxt <= K else np.arange(0, 1)
            if ks.size == 0:
                continue
            cand = col[:, None] + C[j + 1 : T + 2, j, :][:, ks]
            flipped = cand[::-1]  # prefer the larger predecessor on ties
            pick = np.argmin(flipped, axis=0)
            best = flipped[pick, np.arange(ks.size)]
            ok = np.isfinite(best)
            Dx[nxt, j, ks[ok]] = best[ok]
            Bx[nxt, j, ks[ok]] = (T + 1) - pick[ok]
    final = Dx[K + 1, :, 0]
    if not np.isfinite(final).any():
        raise InfeasibleError(f"no feasible schedule for T={T}, K={K}, M={M}")
    pick = int(np.argmin(final[::-1]))
    last_key = (T + 1) - pick
    objective = float(final[last_key])
    keys = [last_key]
    m, i_cur, j_cur = K + 1, last_key, 0
    while True:
        p = int(Bx[m, i_cur, j_cur])
        if p < 0 or p == no_pred:
            break
        keys.append(p)
        m, i_cur, j_cur = m - 1, p, i_cur
    # the init state only carries the last two enforced keys; restore the rest
    keys.extend(range(keys[-1] + 1, T + 1))
    schedule = Schedule(T, tuple(reversed(keys)), M, objective)
    tables = PlanTables(
        costs=np.full((K + 2, T + 1), np.nan),
        predecessors=np.full((K + 2, T + 1), -1, dtype=np.int64),
        exact_costs=Dx,
        exact_back=Bx,
    )
    return schedule, tables


BRUTE_FORCE_LIMIT = 2_000_000


def brute_force_plan(tensor: CostTensor, num_steps: int, prefix: int = 3) -> Schedule:
    """Exhaustive argmin over all feasible schedules; test oracle only.

    Ties resolve to the lexicographically largest steps tuple.
    """
    _check_plan_args(tensor, num_steps, prefix)
    T, K, M = tensor.total_steps, num_steps, prefix
    count = math.comb(T - M, K - M)
    if count > BRUTE_FORCE_LIMIT:
        raise ConfigError(
            f"{count} candidate schedules exceed the brute-force limit {BRUTE_FORCE_LIMIT}"
        )
    head = tuple(range(T, T - M, -1))
    best_steps = None
    best_obj = np.inf
    # descending pool makes candidates enumerate in descending lexicographic
    # order, so keeping strict improvements implements the tie rule
    for tail in itertools.combinations(range(T - M, 0, -1), K - M):
        steps = head + tail
        obj = _objective_for_steps(tensor, steps, M)
        if obj < best_obj:
            best_obj = obj
            best_steps = steps
    return Schedule(T, best_steps, M, float(best_obj))


def all_steps_schedule(total_steps: int) -> Schedule:
    """The degenerate full-computation schedule {T, T-1, ..., 1}."""
    return Schedule(total_steps, tuple(range(total_steps, 0, -1)), 1, 0.0)


def uniform_schedule(
    total_steps: int,
    num_steps: int,
    tensor: CostTensor | None = None,
    prefix: int = 1,
) -> Schedule:
    """Evenly spaced K steps from T down to 1, the fixed-schedule baseline.

    ``prefix`` enforces the same M-step warm-up planned schedules carry, so
    baseline comparisons isolate key placement from cache cold-start.
    """
    T, K, M = total_steps, num_steps, prefix
    if not 1 <= M <= K <= T:
        raise InfeasibleError(f"need 1 <= M <= K <= T, got M={M}, K={K}, T={T}")
    head = tuple(range(T, T - M, -1))
    span_top = T - M  # spread the remaining keys over [1, T - M]
    idx = np.round(np.linspace(0.0, span_top - 1, K - M)).astype(int) if K > M else np.array([], int)
    for pos in range(1, len(idx)):
        if idx[pos] <= idx[pos - 1]:
            idx[pos] = idx[pos - 1] + 1
    steps = head + tuple(int(span_top - v) for v in idx)
    schedule = Schedule(T, steps, M, math.nan)
    if tensor is not None:
        schedule = Schedule(T, steps, M, objective_of(schedule, tensor))
    return schedule


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def schedule_to_json(
    schedule: Schedule, solver: str, variant: CostVariant | None = None
) -> str:
    payload = {
        "T": schedule.total_steps,
        "M": schedule.enforced_prefix,
        "steps": list(schedule.steps),
        "objective": None if math.isnan(schedule.objective) else schedule.objective,
        "solver": solver,
        "variant": variant.to_dict() if variant is not None else None,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def schedule_from_json(text: str) -> tuple[Schedule, dict]:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad schedule JSON: {exc}") from exc
    try:
        objective = payload.get("objective")
        schedule = Schedule(
            total_steps=int(payload["T"]),
            steps=tuple(int(s) for s in payload["steps"]),
            enforced_prefix=int(payload["M"]),
            objective=math.nan if objective is None else float(objective),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"schedule JSON missing field: {exc}") from exc
    except ConfigError as exc:
        raise FormatError(f"schedule JSON violates invariants: {exc}") from exc
    return schedule, payload
