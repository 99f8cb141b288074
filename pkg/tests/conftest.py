import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cacheplan import CostTensor, CostVariant, FeatureTrajectory, generate_synthetic


@pytest.fixture
def quadratic_traj() -> FeatureTrajectory:
    """Scalar h_t = t^2, T = 10 — the worked example used throughout."""
    return generate_synthetic(
        "polynomial", 10, 1, {"degree": 2, "coefficients": [0.0, 0.0, 1.0]}
    )


@pytest.fixture
def linear_traj() -> FeatureTrajectory:
    """Scalar h_t = 2t, T = 10."""
    return generate_synthetic(
        "polynomial", 10, 1, {"degree": 1, "coefficients": [0.0, 2.0]}
    )


def make_tensor(total_steps: int, values: np.ndarray, variant: CostVariant | None = None) -> CostTensor:
    return CostTensor(total_steps, variant or CostVariant(), values, sample_count=1)
