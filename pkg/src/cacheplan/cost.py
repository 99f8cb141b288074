"""Calibrated cost of skipping between key timesteps.

For a segment that computes at key j and next at key k, with i the key
before j, the cost is the accumulated L1 error of predicting every step of
the segment from the cached pair (i, j). Stacking these over all valid
(i, j, k) gives a third-order tensor indexed by predecessor, source and
target; averaging it over a calibration set yields the planner's input.

Index conventions: timesteps run T..0 with k = 0 the sentinel slot, and
i = T+1 is the reserved "no predecessor" index meaning prediction from j
alone (zeroth-order hold). Ablation knobs cover the tensor's dimensionality
(conditioning on the true predecessor vs. the dense neighbor pair), error
aggregation (summed over the segment vs. the target step only), and whether
the segment's target step itself is counted.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatError
from .predictor import PredictorCache
from .trajectory import FeatureTrajectory

TENSOR_MAGIC = b"DPCT"
TENSOR_VERSION = 1
MAX_TOTAL_STEPS = 128

DIM_MODES = ("3d", "2d")
AGGREGATE_MODES = ("cum", "term")
BOUND_MODES = ("paper", "skipped")


@dataclass(frozen=True)
class CostVariant:
    """Which flavor of segment cost the tensor stores.

    - dim_mode "3d": condition prediction on the actual predecessor pair
      (i, j); "2d": condition on the dense neighbors (j+1, j), making
      entries independent of i.
    - aggregate_mode "cum": sum errors over the whole segment; "term":
      only the error at the segment's target step.
    - bound_mode "paper": the summed range includes the target key k
      itself (tau = k..j-1); "skipped": only strictly skipped steps
      (tau = k+1..j-1).
    """

    dim_mode: str = "3d"
    aggregate_mode: str = "cum"
    bound_mode: str = "paper"

    def __post_init__(self) -> None:
        if self.dim_mode not in DIM_MODES:
            raise ConfigError(f"dim_mode must be one of {DIM_MODES}, got {self.dim_mode!r}")
        if self.aggregate_mode not in AGGREGATE_MODES:
            raise ConfigError(
                f"aggregate_mode must be one of {AGGREGATE_MODES}, got {self.aggregate_mode!r}"
            )
        if self.bound_mode not in BOUND_MODES:
            raise ConfigError(f"bound_mode must be one of {BOUND_MODES}, got {self.bound_mode!r}")

    def to_dict(self) -> dict:
        return {
            "dim_mode": self.dim_mode,
            "aggregate_mode": self.aggregate_mode,
            "bound_mode": self.bound_mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CostVariant":
        return cls(
            dim_mode=d.get("dim_mode", "3d"),
            aggregate_mode=d.get("aggregate_mode", "cum"),
            bound_mode=d.get("bound_mode", "paper"),
        )


@dataclass
class CostTensor:
    """Dense (T+2)^3 array of segment costs; only i > j > k is addressable."""

    total_steps: int
    variant: CostVariant
    values: np.ndarray
    sample_count: int = 0

    def __post_init__(self) -> None:
        n = self.total_steps + 2
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.total_steps < 2:
            raise ConfigError(f"total_steps must be >= 2, got {self.total_steps}")
        if self.total_steps > MAX_TOTAL_STEPS:
            raise ConfigError(
                f"total_steps {self.total_steps} exceeds dense-tensor limit {MAX_TOTAL_STEPS}"
            )
        if self.values.shape != (n, n, n):
            raise ConfigError(f"values shape {self.values.shape} != {(n, n, n)}")

    @property
    def no_predecessor(self) -> int:
        return self.total_steps + 1

    def check_triple(self, i: int | None, j: int, k: int) -> int:
        """Validate an (i, j, k) address; returns the resolved i index."""
        ii = self.no_predecessor if i is None else int(i)
        if not (0 <= k < j <= self.total_steps):
            raise ConfigError(f"need T >= j > k >= 0, got j={j}, k={k}, T={self.total_steps}")
        if not (j < ii <= self.no_predecessor):
            raise ConfigError(f"predecessor index {ii} not in ({j}, {self.no_predecessor}]")
        return ii

    def value(self, i: int | None, j: int, k: int) -> float:
        return float(self.values[self.check_triple(i, j, k), j, k])


def _conditioning(
    by_t: np.ndarray, total_steps: int, i: int | None, j: int, order: int, variant: CostVariant
) -> list[tuple[int, np.ndarray]]:
    """Key points the segment's predictions are conditioned on, oldest first."""
    no_pred = total_steps + 1
    if variant.dim_mode == "2d":
        points = [(j + 1, by_t[j + 1]), (j, by_t[j])] if j + 1 <= total_steps else [(j, by_t[j])]
    else:
        if i is None or i == no_pred:
            points = [(j, by_t[j])]
        else:
            points = [(i, by_t[i]), (j, by_t[j])]
    if order == 0:
        points = points[-1:]
    return points


def _range_costs(errs: np.ndarray, variant: CostVariant) -> np.ndarray:
    """Per-target-k costs for k = 0..j-1 from per-step errors at tau = 0..j-1."""
    j = errs.shape[0]
    out = np.empty(j, dtype=np.float64)
    if variant.aggregate_mode == "cum":
        suffix = np.cumsum(errs[::-1])[::-1]  # suffix[k] = sum of errs[k:]
        if variant.bound_mode == "paper":
            return suffix
        out[: j - 1] = suffix[1:]
        out[j - 1] = 0.0
        return out
    if variant.bound_mode == "paper":
        return errs.copy()
    out[: j - 1] = errs[1:]
    out[j - 1] = 0.0
    return out


def _per_step_errors(by_t: np.ndarray, points: list[tuple[int, np.ndarray]], j: int) -> np.ndarray:
    """L1 error of the conditioned linear/hold prediction at tau = 0..j-1."""
    taus = np.arange(j, dtype=np.float64)
    if len(points) == 1:
        pred = np.broadcast_to(points[0][1], (j, by_t.shape[1]))
    else:
        (ti, hi), (tj, hj) = points
        slope = (hi - hj) / (ti - tj)
        pred = hj[None, :] + (taus - tj)[:, None] * slope[None, :]
    return np.abs(by_t[:j] - pred).sum(axis=1)


def segment_cost(
    traj: FeatureTrajectory,
    i: int | None,
    j: int,
    k: int,
    order: int = 1,
    variant: CostVariant = CostVariant(),
) -> float:
    """Cost of the single segment (i, j, k) on one trajectory.

    Predictions go through the same cache machinery the runtime uses; with
    only two conditioning points available the effective order caps at 1
    regardless of the requested inference order.
    """
    total_steps = traj.total_steps
    no_pred = total_steps + 1
    if not (0 <= k < j <= total_steps):
        raise ConfigError(f"need T >= j > k >= 0, got j={j}, k={k}, T={total_steps}")
    if i is not None and not (j < i <= no_pred):
        raise ConfigError(f"predecessor {i} not in ({j}, {no_pred}]")
    if order < 0:
        raise ConfigError(f"order must be >= 0, got {order}")
    by_t = traj.by_timestep()
    points = _conditioning(by_t, total_steps, i, j, order, variant)
    cache = PredictorCache(order=min(order, 1), dim=traj.dim)
    for t, h in points:
        cache = cache.insert(t, h)
    lo = k if variant.bound_mode == "paper" else k + 1
    taus = range(lo, j)
    if variant.aggregate_mode == "term":
        taus = list(taus)[:1]
    total = 0.0
    for tau in taus:
        pred = cache.predict(tau).feature
        total += float(np.abs(traj.at(tau) - pred).sum())
    return total


def _single_trajectory_tensor(
    traj: FeatureTrajectory, order: int, variant: CostVariant
) -> np.ndarray:
    total_steps = traj.total_steps
    n = total_steps + 2
    by_t = np.ascontiguousarray(traj.by_timestep())
    tensor = np.zeros((n, n, n), dtype=np.float64)
    for j in range(1, total_steps + 1):
        if variant.dim_mode == "2d" or order == 0:
            points = _conditioning(by_t, total_steps, None, j, order, variant)
            row = _range_costs(_per_step_errors(by_t, points, j), variant)
            tensor[j + 1 : n, j, :j] = row[None, :]
        else:
            for i in range(j + 1, n):
                points = _conditioning(by_t, total_steps, i, j, order, variant)
                row = _range_costs(_per_step_errors(by_t, points, j), variant)
                tensor[i, j, :j] = row
    return tensor


def build_pact(
    trajs: list[FeatureTrajectory],
    order: int = 1,
    variant: CostVariant = CostVariant(),
) -> CostTensor:
    """Average per-trajectory cost tensors over a calibration set.

    The running-mean update leaves identical inputs bit-identical to the
    single-trajectory tensor, which keeps calibration-size comparisons
    exact.
    """
    if not trajs:
        raise ConfigError("calibration set is empty")
    total_steps, dim = trajs[0].total_steps, trajs[0].dim
    for s, traj in enumerate(trajs):
        if traj.total_steps != total_steps or traj.dim != dim:
            raise ConfigError(
                f"calibration trajectory {s} has shape (T={traj.total_steps}, dim={traj.dim}); "
                f"expected (T={total_steps}, dim={dim})"
            )
    if total_steps > MAX_TOTAL_STEPS:
        raise ConfigError(
            f"total_steps {total_steps} exceeds dense-tensor limit {MAX_TOTAL_STEPS}"
        )
    mean = None
    for s, traj in enumerate(trajs, start=1):
        tensor = _single_trajectory_tensor(traj, order, variant)
        if mean is None:
            mean = tensor
        else:
            mean += (tensor - mean) / s
    return CostTensor(total_steps, variant, mean, sample_count=len(trajs))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_TENSOR_HEADER = struct.Struct("<4sIIIIII")  # magic, version, T, dim, agg, bound, samples


def _triple_mask(total_steps: int) -> np.ndarray:
    n = total_steps + 2
    idx = np.arange(n)
    mask = (idx[:, None, None] > idx[None, :, None]) & (idx[None, :, None] > idx[None, None, :])
    mask &= idx[None, :, None] <= total_steps  # j is a real timestep
    return mask


def write_cost_tensor(tensor: CostTensor) -> bytes:
    v = tensor.variant
    header = _TENSOR_HEADER.pack(
        TENSOR_MAGIC,
        TENSOR_VERSION,
        tensor.total_steps,
        DIM_MODES.index(v.dim_mode),
        AGGREGATE_MODES.index(v.aggregate_mode),
        BOUND_MODES.index(v.bound_mode),
        tensor.sample_count,
    )
    payload = tensor.values[_triple_mask(tensor.total_steps)].astype("<f8").tobytes()
    return header + payload


def read_cost_tensor(data: bytes) -> CostTensor:
    if len(data) < _TENSOR_HEADER.size:
        raise FormatError("truncated header")
    magic, version, total_steps, dim_code, agg_code, bound_code, samples = (
        _TENSOR_HEADER.unpack_from(data, 0)
    )
    if magic != TENSOR_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != TENSOR_VERSION:
        raise FormatError(f"unsupported version {version}")
    if total_steps < 2 or total_steps > MAX_TOTAL_STEPS:
        raise FormatError(f"invalid total_steps {total_steps}")
    try:
        variant = CostVariant(
            DIM_MODES[dim_code], AGGREGATE_MODES[agg_code], BOUND_MODES[bound_code]
        )
    except IndexError as exc:
        raise FormatError("unknown variant code") from exc
    mask = _triple_mask(total_steps)
    count = int(mask.sum())
    if len(data) != _TENSOR_HEADER.size + 8 * count:
        raise FormatError(
            f"payload size {len(data) - _TENSOR_HEADER.size} != expected {8 * count}"
        )
    flat = np.frombuffer(data, dtype="<f8", count=count, offset=_TENSOR_HEADER.size)
    if not np.all(np.isfinite(flat)):
        raise FormatError("payload contains non-finite values")
    n = total_steps + 2
    values = np.zeros((n, n, n), dtype=np.float64)
    values[mask] = flat
    return CostTensor(total_steps, variant, values, sample_count=samples)


def save_cost_tensor(path, tensor: CostTensor) -> None:
    with open(path, "wb") as fh:
        fh.write(write_cost_tensor(tensor))


def load_cost_tensor(path) -> CostTensor:
    with open(path, "rb") as fh:
        return read_cost_tensor(fh.read())
