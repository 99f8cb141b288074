"""Feature trajectories of a denoising run and their sources.

A trajectory holds the final-layer feature vector of every timestep of a
full-step sampling run, indexed t = T down to 0. Timestep T is the first
model call of the run; t = 0 is the sentinel slot appended so that costs of
the final schedule segment are well-defined. Trajectories come from three
places: synthetic closed-form generators (cheap, exactly analyzable), a
deterministic toy sampler with state feedback (end-to-end evaluation), or
the on-disk interchange format written by an external feature extractor.

Values are float64 in memory and float32 on disk.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergedError, FormatError

MAGIC = b"DPTJ"
FORMAT_VERSION = 1
_DTYPE_F32LE = 0

GENERATOR_KINDS = ("polynomial", "exp-decay", "two-regime")
FIELD_KINDS = ("linear-field", "two-regime", "oscillatory")


@dataclass(frozen=True)
class FeatureTrajectory:
    """Ground-truth features for one sample, one vector per timestep T..0.

    ``features`` has shape (T+1, dim); row r corresponds to timestep T - r,
    so row 0 is the first model call and the last row is the sentinel.
    """

    total_steps: int
    dim: int
    features: np.ndarray
    label: str | None = None

    def __post_init__(self) -> None:
        if self.total_steps < 2:
            raise ConfigError(f"total_steps must be >= 2, got {self.total_steps}")
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.shape != (self.total_steps + 1, self.dim):
            raise ConfigError(
                f"features shape {feats.shape} != ({self.total_steps + 1}, {self.dim})"
            )
        if not np.all(np.isfinite(feats)):
            raise ConfigError("features contain non-finite values")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)

    def at(self, t: int) -> np.ndarray:
        """Feature vector at timestep t (t = T..0)."""
        if not 0 <= t <= self.total_steps:
            raise ConfigError(f"timestep {t} outside [0, {self.total_steps}]")
        return self.features[self.total_steps - t]

    def by_timestep(self) -> np.ndarray:
        """(T+1, dim) view indexed by timestep: row t is the feature at t."""
        return self.features[::-1]


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def _check_finite_params(params: dict) -> None:
    for key, val in params.items():
        arr = np.asarray(val, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ConfigError(f"parameter {key!r} is non-finite")


def generate_synthetic(
    kind: str,
    total_steps: int,
    dim: int,
    params: dict | None = None,
    seed: int = 0,
) -> FeatureTrajectory:
    """Produce a closed-form trajectory; deterministic for a fixed seed.

    Kinds and their parameters (all optional unless noted):

    - ``polynomial``: ``degree`` (default 1), ``coefficients`` — array of
      shape (degree+1,) shared across dims or (dim, degree+1); drawn
      uniformly from [-1, 1] when absent. h_t[d] = sum_r c[d, r] * t**r.
    - ``exp-decay``: ``rate``/``amplitude`` scalars or length-dim arrays;
      h_t[d] = amp[d] * exp(-rate[d] * s) with progress s = (T - t)/T.
    - ``two-regime``: fast + slow exponential mixture with most change in
      the early half of sampling (t > T/2): ``rate_fast``, ``rate_slow``,
      ``amp_fast``, ``amp_slow``.

    Every kind accepts ``noise`` >= 0, the std-dev of seeded additive
    Gaussian noise.
    """
    params = dict(params or {})
    if total_steps < 2:
        raise ConfigError(f"total_steps must be >= 2, got {total_steps}")
    if dim < 1:
        raise ConfigError(f"dim must be >= 1, got {dim}")
    noise = float(params.pop("noise", 0.0))
    if noise < 0:
        raise ConfigError(f"noise amplitude must be >= 0, got {noise}")
    _check_finite_params(params)
    rng = _rng(seed)
    ts = np.arange(total_steps, -1, -1, dtype=np.float64)  # T..0
    progress = (total_steps - ts) / total_steps  # 0..1 along sampling

    if kind == "polynomial":
        degree = int(params.get("degree", 1))
        if degree < 0:
            raise ConfigError(f"degree must be >= 0, got {degree}")
        coeffs = params.get("coefficients")
        if coeffs is None:
            coeffs = rng.uniform(-1.0, 1.0, size=(dim, degree + 1))
        else:
            coeffs = np.asarray(coeffs, dtype=np.float64)
            if coeffs.ndim == 1:
                coeffs = np.broadcast_to(coeffs, (dim, coeffs.shape[0])).copy()
            if coeffs.shape != (dim, degree + 1):
                raise ConfigError(
                    f"coefficients shape {coeffs.shape} incompatible with "
                    f"dim={dim}, degree={degree}"
                )
        powers = ts[:, None] ** np.arange(degree + 1)[None, :]  # (T+1, degree+1)
        feats = powers @ coeffs.T
    elif kind == "exp-decay":
        rate = np.broadcast_to(
            np.asarray(params.get("rate", rng.uniform(1.0, 4.0, size=dim)), dtype=np.float64),
            (dim,),
        )
        amp = np.broadcast_to(
            np.asarray(params.get("amplitude", rng.uniform(0.5, 2.0, size=dim)), dtype=np.float64),
            (dim,),
        )
        feats = amp[None, :] * np.exp(-rate[None, :] * progress[:, None])
    elif kind == "two-regime":
        rate_fast = np.broadcast_to(
            np.asarray(params.get("rate_fast", rng.uniform(8.0, 16.0, size=dim)), dtype=np.float64),
            (dim,),
        )
        rate_slow = np.broadcast_to(
            np.asarray(params.get("rate_slow", rng.uniform(0.2, 1.0, size=dim)), dtype=np.float64),
            (dim,),
        )
        amp_fast = np.broadcast_to(
            np.asarray(params.get("amp_fast", rng.uniform(0.5, 2.0, size=dim)), dtype=np.float64),
            (dim,),
        )
        amp_slow = np.broadcast_to(
            np.asarray(params.get("amp_slow", rng.uniform(0.5, 2.0, size=dim)), dtype=np.float64),
            (dim,),
        )
        feats = amp_fast[None, :] * np.exp(-rate_fast[None, :] * progress[:, None])
        feats = feats + amp_slow[None, :] * np.exp(-rate_slow[None, :] * progress[:, None])
    else:
        raise ConfigError(f"unknown generator kind {kind!r}; expected one of {GENERATOR_KINDS}")

    if noise > 0:
        feats = feats + rng.normal(0.0, noise, size=feats.shape)
    return FeatureTrajectory(total_steps, dim, feats, label=f"{kind}:{seed}")


@dataclass(frozen=True)
class ToyModelSpec:
    """A tiny analytic vector field standing in for a denoising network.

    ``kind`` selects the dynamics; ``params`` holds its coefficients.
    Per-dimension coefficients not given explicitly are drawn from ``seed``,
    so a spec names a deterministic model.
    """

    dim: int
    kind: str = "linear-field"
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.kind not in FIELD_KINDS:
            raise ConfigError(f"unknown field kind {self.kind!r}; expected one of {FIELD_KINDS}")
        _check_finite_params(self.params)


def make_field(spec: ToyModelSpec, total_steps: int):
    """Build the callable f(state, t) -> feature for a toy model spec.

    The same callable serves as the model callback of accelerated runs, so
    calibration and inference see one consistent model.
    """
    rng = _rng(spec.seed)
    p = spec.params
    dim = spec.dim
    if spec.kind == "linear-field":
        a = np.broadcast_to(np.asarray(p.get("a", -1.0), dtype=np.float64), (dim,))

        def field_fn(state: np.ndarray, t: int) -> np.ndarray:
            return a * state

    elif spec.kind == "two-regime":
        # driven relaxation: the drive decays fast for t > T/2, then nearly
        # flattens, concentrating prediction difficulty in the early half
        rho_fast = float(p.get("rho_fast", rng.uniform(8.0, 14.0)))
        rho_slow = float(p.get("rho_slow", rng.uniform(0.02, 0.12)))
        amp = np.asarray(
            p.get("amp", rng.uniform(0.5, 2.0, size=dim) * rng.choice((-1.0, 1.0), size=dim)),
            dtype=np.float64,
        )
        amp = np.broadcast_to(amp, (dim,))
        a = np.broadcast_to(
            np.asarray(p.get("a", rng.uniform(-0.6, -0.2, size=dim)), dtype=np.float64), (dim,)
        )

        def field_fn(state: np.ndarray, t: int) -> np.ndarray:
            s = (total_steps - t) / total_steps
            drive = amp * np.exp(-rho_fast * min(s, 0.5) - rho_slow * max(s - 0.5, 0.0))
            return drive + a * state

    else:  # oscillatory
        freq = float(p.get("freq", 1.0))
        amp = np.broadcast_to(
            np.asarray(p.get("amp", rng.uniform(0.5, 1.5, size=dim)), dtype=np.float64), (dim,)
        )
        decay = float(p.get("decay", 0.5))
        phase = np.asarray(p.get("phase", rng.uniform(0.0, 2 * np.pi, size=dim)), dtype=np.float64)
        phase = np.broadcast_to(phase, (dim,))

        def field_fn(state: np.ndarray, t: int) -> np.ndarray:
            drive = amp * np.sin(2 * np.pi * freq * t / total_steps + phase)
            return drive - decay * state

    return field_fn


def euler_update(total_steps: int):
    """Fixed-step Euler state update x_{t-1} = x_t + f(x_t, t) / T."""
    h = 1.0 / total_steps

    def update(state: np.ndarray, feature: np.ndarray, t: int) -> np.ndarray:
        return state + h * feature

    return update


def run_toy_sampler(
    spec: ToyModelSpec, total_steps: int, init_state: np.ndarray
) -> tuple[FeatureTrajectory, np.ndarray]:
    """Integrate the toy model for T steps and record its feature at each.

    The model is evaluated at t = T..1 with the state advanced by a fixed
    Euler step after each evaluation; the sentinel slot t = 0 is filled by
    evaluating the field once more at the terminal state (no state update).
    Returns the trajectory and the terminal state.
    """
    if total_steps < 2:
        raise ConfigError(f"total_steps must be >= 2, got {total_steps}")
    state = np.asarray(init_state, dtype=np.float64).reshape(-1)
    if state.shape != (spec.dim,):
        raise ConfigError(f"init_state length {state.shape[0]} != dim {spec.dim}")
    field_fn = make_field(spec, total_steps)
    update = euler_update(total_steps)
    feats = np.empty((total_steps + 1, spec.dim), dtype=np.float64)
    for row, t in enumerate(range(total_steps, 0, -1)):
        feature = field_fn(state, t)
        feats[row] = feature
        state = update(state, feature, t)
        if not np.all(np.isfinite(state)):
            raise DivergedError(f"state became non-finite at timestep {t - 1}")
    feats[total_steps] = field_fn(state, 0)
    traj = FeatureTrajectory(total_steps, spec.dim, feats, label=f"toy:{spec.kind}:{spec.seed}")
    return traj, state


# ---------------------------------------------------------------------------
# Interchange format
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sIIII")  # magic, version, T, dim, dtype code


def write_trajectory(traj: FeatureTrajectory, metadata: dict | None = None) -> bytes:
    """Serialize to the binary interchange format (float32 payload).

    An optional metadata dict is appended as a length-prefixed UTF-8 JSON
    block; keys are sorted so equal inputs give equal bytes.
    """
    payload = traj.features.astype("<f4").tobytes()
    out = bytearray()
    out += _HEADER.pack(MAGIC, FORMAT_VERSION, traj.total_steps, traj.dim, _DTYPE_F32LE)
    out += payload
    if metadata is not None:
        blob = json.dumps(metadata, sort_keys=True).encode("utf-8")
        out += struct.pack("<I", len(blob)) + blob
    return bytes(out)


def read_trajectory(data: bytes) -> tuple[FeatureTrajectory, dict | None]:
    """Parse interchange bytes back into a trajectory and its metadata."""
    if len(data) < _HEADER.size:
        raise FormatError("truncated header")
    magic, version, total_steps, dim, dtype_code = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}")
    if dtype_code != _DTYPE_F32LE:
        raise FormatError(f"unsupported dtype code {dtype_code}")
    if total_steps < 2 or dim < 1:
        raise FormatError(f"invalid sizes T={total_steps}, dim={dim}")
    count = (total_steps + 1) * dim
    need = _HEADER.size + 4 * count
    if len(data) < need:
        raise FormatError(f"truncated payload: have {len(data) - _HEADER.size} of {4 * count} bytes")
    feats = np.frombuffer(data, dtype="<f4", count=count, offset=_HEADER.size)
    feats = feats.astype(np.float64).reshape(total_steps + 1, dim)
    if not np.all(np.isfinite(feats)):
        raise FormatError("payload contains non-finite values")
    metadata = None
    rest = data[need:]
    if rest:
        if len(rest) < 4:
            raise FormatError("truncated metadata length")
        (meta_len,) = struct.unpack_from("<I", rest, 0)
        if len(rest) < 4 + meta_len:
            raise FormatError("truncated metadata block")
        try:
            metadata = json.loads(rest[4 : 4 + meta_len].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"bad metadata block: {exc}") from exc
    label = metadata.get("label") if isinstance(metadata, dict) else None
    return FeatureTrajectory(total_steps, dim, feats, label=label), metadata


def save_trajectory(path, traj: FeatureTrajectory, metadata: dict | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(write_trajectory(traj, metadata))


def load_trajectory(path) -> tuple[FeatureTrajectory, dict | None]:
    with open(path, "rb") as fh:
        return read_trajectory(fh.read())
