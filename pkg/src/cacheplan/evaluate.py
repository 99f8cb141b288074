"""Schedule quality metrics and trajectory projection.

Deviation metrics compare an accelerated run against the full-step ground
truth; PSNR compares terminal states; the cost-fidelity check correlates
planned objectives with realized deviations to validate that the
calibrated tensor actually predicts run quality; the 2D projection gives
the standard principal-component view of sampling trajectories.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .cost import CostTensor
from .errors import ConfigError
from .planner import Schedule, objective_of
from .runtime import RunRecord, playback_model, run_baseline, run_schedule
from .trajectory import FeatureTrajectory

PSNR_CAP_DB = 99.0
_MSE_FLOOR = 1e-12

DEVIATION_NORMS = ("l1", "l2")


def _step_norm(diff: np.ndarray, norm: str) -> float:
    if norm == "l1":
        return float(np.abs(diff).sum())
    if norm == "l2":
        return float(np.sqrt((diff * diff).sum()))
    raise ConfigError(f"norm must be one of {DEVIATION_NORMS}, got {norm!r}")


def per_step_deviation(
    record: RunRecord, truth: FeatureTrajectory, norm: str = "l1"
) -> np.ndarray:
    """Per-timestep gap between the run's features and the truth, t = T..0."""
    if (
        record.trajectory.total_steps != truth.total_steps
        or record.trajectory.dim != truth.dim
    ):
        raise ConfigError("run and truth trajectories have mismatched shapes")
    diffs = record.trajectory.features - truth.features
    if norm == "l1":
        return np.abs(diffs).sum(axis=1)
    if norm == "l2":
        return np.sqrt((diffs * diffs).sum(axis=1))
    raise ConfigError(f"norm must be one of {DEVIATION_NORMS}, got {norm!r}")


def realized_deviation(record: RunRecord, truth: FeatureTrajectory, norm: str = "l1") -> float:
    """Accumulated feature gap over the run's predicted sampling steps.

    Only steps t >= 1 count: the sentinel slot is bookkeeping, not a step
    the sampler takes. Accumulation is plain float64 over ascending
    timestep order.
    """
    if (
        record.trajectory.total_steps != truth.total_steps
        or record.trajectory.dim != truth.dim
    ):
        raise ConfigError("run and truth trajectories have mismatched shapes")
    total = 0.0
    for outcome in sorted(record.outcomes, key=lambda o: o.timestep):
        if outcome.computed or outcome.timestep < 1:
            continue
        t = outcome.timestep
        total += _step_norm(record.trajectory.at(t) - truth.at(t), norm)
    return total


def psnr(a: np.ndarray, b: np.ndarray, peak: float | str = "auto") -> float:
    """10 log10(peak^2 / MSE), capped at 99 dB for (near-)identical inputs.

    peak="auto" uses max|a|, i.e. the first argument is the reference.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ConfigError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if isinstance(peak, str):
        if peak != "auto":
            raise ConfigError(f"peak must be a positive number or 'auto', got {peak!r}")
        peak_val = float(np.max(np.abs(a)))
        if peak_val == 0.0:
            peak_val = 1.0
    else:
        peak_val = float(peak)
    if peak_val <= 0:
        raise ConfigError(f"peak must be positive, got {peak_val}")
    mse = float(np.mean((a - b) ** 2))
    if mse < _MSE_FLOOR:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(peak_val * peak_val / mse), PSNR_CAP_DB)


def invocation_ratio(schedule: Schedule) -> float:
    return schedule.total_steps / schedule.num_steps


def _pearson(xs: np.ndarray, ys: np.ndarray) -> tuple[float, bool]:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    xc = xs - xs.mean()
    yc = ys - ys.mean()
    vx = float(xc @ xc)
    vy = float(yc @ yc)
    if vx <= 0.0 or vy <= 0.0:
        return math.nan, True
    return float((xc @ yc) / math.sqrt(vx * vy)), False


@dataclass
class CostFidelity:
    """Correlation between planned objectives and realized deviations."""

    pearson_r: float
    degenerate: bool
    planned: list[float]
    realized: list[float]


def cost_fidelity(
    tensor: CostTensor,
    trajs: list[FeatureTrajectory],
    schedules: list[Schedule],
    order: int = 1,
    norm: str = "l1",
) -> CostFidelity:
    """Correlate objective_of against playback-run deviation per schedule.

    With the tensor built in skipped-only cumulative mode from a single
    trajectory and the runs replaying that same trajectory at the tensor's
    order, objective and deviation coincide by definition and r = 1.
    """
    if len(schedules) < 3:
        raise ConfigError(f"need at least 3 schedules, got {len(schedules)}")
    if not trajs:
        raise ConfigError("need at least one evaluation trajectory")
    planned: list[float] = []
    realized: list[float] = []
    for schedule in schedules:
        planned.append(objective_of(schedule, tensor))
        devs = []
        for traj in trajs:
            record = run_schedule(
                playback_model(traj), schedule, np.zeros(traj.dim), order=order
            )
            devs.append(realized_deviation(record, traj, norm=norm))
        realized.append(float(np.mean(devs)))
    r, degenerate = _pearson(np.array(planned), np.array(realized))
    return CostFidelity(pearson_r=r, degenerate=degenerate, planned=planned, realized=realized)


def mean_trajectory(trajs: list[FeatureTrajectory]) -> FeatureTrajectory:
    """Per-timestep average of several same-shape trajectories."""
    if not trajs:
        raise ConfigError("need at least one trajectory")
    total_steps, dim = trajs[0].total_steps, trajs[0].dim
    for traj in trajs:
        if traj.total_steps != total_steps or traj.dim != dim:
            raise ConfigError("trajectories have mismatched shapes")
    stacked = np.stack([traj.features for traj in trajs])
    return FeatureTrajectory(total_steps, dim, stacked.mean(axis=0), label="mean")


@dataclass
class PcaProjection:
    """2D tracks of each input trajectory plus the fitted directions."""

    tracks: list[np.ndarray]
    components: np.ndarray  # (2, dim) rows are the principal directions
    mean: np.ndarray
    rank_deficient: bool


def pca_project(trajs: list[FeatureTrajectory]) -> PcaProjection:
    """Project trajectories onto the top-2 principal directions.

    The decomposition is fitted on the pooled point set of all given
    trajectories, centered by the pooled mean. Each component's sign is
    fixed by making its first nonzero loading positive. Rank-deficient
    input yields an all-zero second coordinate and a flag.
    """
    if not trajs:
        raise ConfigError("need at least one trajectory")
    dim = trajs[0].dim
    if len(trajs) < 2 and dim < 2:
        raise ConfigError("need >= 2 trajectories or feature dim >= 2")
    pooled = np.vstack([traj.features for traj in trajs])
    mean = pooled.mean(axis=0)
    centered = pooled - mean
    cov = centered.T @ centered / max(pooled.shape[0] - 1, 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    scale = float(eigvals[0]) if eigvals.size else 0.0
    tol = 1e-12 * max(scale, 1.0)
    components = np.zeros((2, dim), dtype=np.float64)
    rank_deficient = False
    for c in range(2):
        if c < eigvals.size and eigvals[c] > tol:
            vec = eigvecs[:, c]
            nz = np.nonzero(np.abs(vec) > 1e-12)[0]
            if nz.size and vec[nz[0]] < 0:
                vec = -vec
            components[c] = vec
        else:
            rank_deficient = True
    tracks = [(traj.features - mean) @ components.T for traj in trajs]
    return PcaProjection(tracks=tracks, components=components, mean=mean, rank_deficient=rank_deficient)


@dataclass
class EvalReport:
    """Headline metrics of one accelerated run against its baseline."""

    realized_deviation: float
    final_psnr: float
    invocation_ratio: float
    planned_objective: float | None = None
    pearson_r: float | None = None
    per_step: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "realized_deviation": self.realized_deviation,
            "final_psnr": self.final_psnr,
            "invocation_ratio": self.invocation_ratio,
            "planned_objective": self.planned_objective,
            "pearson_r": self.pearson_r,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def evaluate_playback(
    truth: FeatureTrajectory,
    schedule: Schedule,
    order: int,
    tensor: CostTensor | None = None,
    norm: str = "l1",
) -> tuple[EvalReport, RunRecord, RunRecord]:
    """Run schedule and baseline in playback mode and compare them."""
    model = playback_model(truth)
    init = np.zeros(truth.dim)
    record = run_schedule(model, schedule, init, order=order)
    base = run_baseline(model, truth.total_steps, init, order=order)
    report = EvalReport(
        realized_deviation=realized_deviation(record, truth, norm=norm),
        final_psnr=psnr(base.final_state, record.final_state, peak="auto"),
        invocation_ratio=invocation_ratio(schedule),
        planned_objective=objective_of(schedule, tensor) if tensor is not None else None,
        per_step=per_step_deviation(record, truth, norm=norm),
    )
    return report, record, base


def write_series_csv(path, series: np.ndarray, total_steps: int) -> None:
    """Per-step series as `timestep,value` rows, t = T..0."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestep", "value"])
        for row, value in enumerate(series):
            writer.writerow([total_steps - row, repr(float(value))])


def write_tracks_csv(path, projection: PcaProjection, total_steps: int) -> None:
    """PCA tracks as `sample,step,x,y` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", "step", "x", "y"])
        for sample, track in enumerate(projection.tracks):
            for row in range(track.shape[0]):
                writer.writerow(
                    [sample, total_steps - row, repr(float(track[row, 0])), repr(float(track[row, 1]))]
                )
