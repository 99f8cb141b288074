"""Extrapolating skipped-step features from a short history of key steps.

The cache keeps the O+1 most recent computed (timestep, feature) pairs.
Prediction evaluates the Newton interpolating polynomial through that
history at the requested timestep; divided differences make the form valid
for the irregular key spacings that planned schedules produce, and on a
uniformly spaced history it reduces to the classical finite-difference
extrapolation. A one-entry history degenerates to plain reuse of the cached
feature (zeroth-order hold).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError

DEFAULT_ORDER = 2


def divided_differences(timesteps, values) -> list[np.ndarray]:
    """Newton coefficients f[x0], f[x0,x1], ... over the given points.

    ``timesteps`` must be strictly decreasing (insertion order of the
    cache); ``values`` is the matching sequence of feature vectors.
    """
    xs = [float(t) for t in timesteps]
    if len(xs) != len(values) or not xs:
        raise ConfigError("timesteps and values must be equal-length and non-empty")
    if any(b >= a for a, b in zip(xs, xs[1:])):
        raise ConfigError(f"timesteps must be strictly decreasing, got {xs}")
    level = [np.asarray(v, dtype=np.float64) for v in values]
    coeffs = [level[0]]
    for span in range(1, len(xs)):
        level = [
            (level[i + 1] - level[i]) / (xs[i + span] - xs[i])
            for i in range(len(level) - 1)
        ]
        coeffs.append(level[0])
    return coeffs


def newton_evaluate(timesteps, coeffs, t: float) -> np.ndarray:
    """Evaluate the Newton-form polynomial sum_i c_i * prod_{r<i}(t - x_r)."""
    acc = np.array(coeffs[0], dtype=np.float64, copy=True)
    prod = 1.0
    for i in range(1, len(coeffs)):
        prod *= t - float(timesteps[i - 1])
        acc += coeffs[i] * prod
    return acc


@dataclass(frozen=True)
class Prediction:
    """An extrapolated feature and the polynomial order actually used."""

    timestep: int
    feature: np.ndarray
    effective_order: int


@dataclass(frozen=True)
class PredictorCache:
    """Immutable history of the most recent computed key steps.

    ``history`` is a tuple of (timestep, feature) pairs, newest last, with
    strictly decreasing timesteps (sampling runs T down to 0). Length is
    bounded by order + 1; inserting beyond that evicts the oldest entry.
    ``insert`` returns a new cache, so values can be shared freely.
    """

    order: int
    dim: int
    history: tuple[tuple[int, np.ndarray], ...] = ()

    def __post_init__(self) -> None:
        if self.order < 0:
            raise ConfigError(f"order must be >= 0, got {self.order}")
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")

    @property
    def newest_timestep(self) -> int | None:
        return self.history[-1][0] if self.history else None

    def insert(self, t: int, feature: np.ndarray) -> "PredictorCache":
        feature = np.asarray(feature, dtype=np.float64).reshape(-1)
        if feature.shape != (self.dim,):
            raise ConfigError(f"feature length {feature.shape[0]} != dim {self.dim}")
        newest = self.newest_timestep
        if newest is not None and t >= newest:
            raise ConfigError(
                f"timestep {t} not below newest cached timestep {newest}"
            )
        history = self.history + ((int(t), feature),)
        if len(history) > self.order + 1:
            history = history[-(self.order + 1) :]
        return replace(self, history=history)

    def predict(self, t: int) -> Prediction:
        """Extrapolate the feature at timestep t < newest cached timestep."""
        if not self.history:
            raise ConfigError("cannot predict from an empty cache")
        newest = self.newest_timestep
        if t >= newest:
            raise ConfigError(f"timestep {t} is not below newest cached timestep {newest}")
        effective = min(self.order, len(self.history) - 1)
        points = self.history[-(effective + 1) :]
        ts = [p[0] for p in points]
        coeffs = divided_differences(ts, [p[1] for p in points])
        feature = newton_evaluate(ts, coeffs, t)
        return Prediction(timestep=int(t), feature=feature, effective_order=effective)


def empty_cache(order: int, dim: int) -> PredictorCache:
    return PredictorCache(order=order, dim=dim)
