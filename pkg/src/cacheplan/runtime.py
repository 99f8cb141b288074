"""Accelerated sampling: compute at key steps, extrapolate everywhere else.

The runtime walks t = T..1, calling the supplied model only at schedule
steps and feeding every state update with either the computed or the
predicted feature. It guarantees where features come from; what the
integrator does with them is the caller's update rule (a fixed Euler step
by default, matching the toy sampler). The sentinel slot t = 0 is filled by
one final cache prediction, which is also how the full-step baseline run is
defined (an all-steps schedule), so the degenerate equivalence between the
two is structural.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, DivergedError
from .planner import Schedule, all_steps_schedule
from .predictor import DEFAULT_ORDER, PredictorCache
from .trajectory import FeatureTrajectory, euler_update

ModelCallback = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class StepOutcome:
    """What happened at one timestep: a model call or a prediction."""

    timestep: int
    computed: bool
    order: int | None = None


@dataclass
class RunRecord:
    """Everything an accelerated run produced, for metrics and export."""

    schedule: Schedule
    outcomes: tuple[StepOutcome, ...]
    trajectory: FeatureTrajectory
    final_state: np.ndarray
    invocation_count: int
    wall_time: float


def playback_model(traj: FeatureTrajectory) -> ModelCallback:
    """A state-independent model that replays a recorded trajectory."""

    def model(state: np.ndarray, t: int) -> np.ndarray:
        return traj.at(t)

    return model


def run_schedule(
    model: ModelCallback,
    schedule: Schedule,
    init_state: np.ndarray,
    order: int = DEFAULT_ORDER,
    update_rule=None,
    predictor_factory=None,
) -> RunRecord:
    """Run one accelerated sampling pass under a schedule.

    ``predictor_factory(order, dim)`` may supply any predictor exposing
    ``insert``/``predict`` with the cache's semantics; schedule planning is
    agnostic to the prediction method as long as calibration and inference
    use the same one.
    """
    total_steps = schedule.total_steps
    state = np.asarray(init_state, dtype=np.float64).reshape(-1)
    dim = state.shape[0]
    update = update_rule if update_rule is not None else euler_update(total_steps)
    if predictor_factory is None:
        cache = PredictorCache(order=order, dim=dim)
    else:
        cache = predictor_factory(order, dim)
    keys = frozenset(schedule.steps)
    feats = np.empty((total_steps + 1, dim), dtype=np.float64)
    outcomes: list[StepOutcome] = []
    started = time.perf_counter()
    for row, t in enumerate(range(total_steps, 0, -1)):
        if t in keys:
            feature = np.asarray(model(state, t), dtype=np.float64).reshape(-1)
            if feature.shape != (dim,):
                raise ConfigError(f"model returned length {feature.shape[0]}, expected {dim}")
            if not np.all(np.isfinite(feature)):
                raise DivergedError(f"model output non-finite at timestep {t}")
            cache = cache.insert(t, feature)
            outcomes.append(StepOutcome(t, True))
        else:
            pred = cache.predict(t)
            feature = pred.feature
            outcomes.append(StepOutcome(t, False, pred.effective_order))
        feats[row] = feature
        state = update(state, feature, t)
        if not np.all(np.isfinite(state)):
            raise DivergedError(f"state became non-finite at timestep {t - 1}")
    sentinel = cache.predict(0)
    feats[total_steps] = sentinel.feature
    outcomes.append(StepOutcome(0, False, sentinel.effective_order))
    wall = time.perf_counter() - started
    traj = FeatureTrajectory(total_steps, dim, feats, label=None)
    return RunRecord(
        schedule=schedule,
        outcomes=tuple(outcomes),
        trajectory=traj,
        final_state=state,
        invocation_count=len(schedule.steps),
        wall_time=wall,
    )


def run_baseline(
    model: ModelCallback,
    total_steps: int,
    init_state: np.ndarray,
    order: int = DEFAULT_ORDER,
    update_rule=None,
) -> RunRecord:
    """Full computation at every step: the all-steps schedule."""
    return run_schedule(model, all_steps_schedule(total_steps), init_state, order, update_rule)


def run_sidecar(record: RunRecord) -> dict:
    """JSON-ready summary of a run; volatile timings are deliberately
    excluded so re-runs produce byte-identical artifacts."""
    return {
        "T": record.schedule.total_steps,
        "M": record.schedule.enforced_prefix,
        "steps": list(record.schedule.steps),
        "invocation_count": record.invocation_count,
        "outcomes": [
            {"t": o.timestep, "kind": "computed" if o.computed else "predicted", "order": o.order}
            for o in record.outcomes
        ],
    }
