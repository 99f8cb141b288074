"""Globally planned feature-cache schedules for diffusion-style samplers.

Pipeline: record full-step feature trajectories (synthetic, toy-sampler or
externally extracted), calibrate a path-aware cost tensor from them, select
the K key timesteps minimizing total predicted error by dynamic
programming, then run accelerated sampling that computes only at those keys
and extrapolates everything else from a short cache.
"""

from .cost import (
    CostTensor,
    CostVariant,
    build_pact,
    load_cost_tensor,
    read_cost_tensor,
    save_cost_tensor,
    segment_cost,
    write_cost_tensor,
)
from .errors import (
    CachePlanError,
    ConfigError,
    DivergedError,
    FormatError,
    InfeasibleError,
)
from .evaluate import (
    CostFidelity,
    EvalReport,
    PcaProjection,
    cost_fidelity,
    evaluate_playback,
    invocation_ratio,
    mean_trajectory,
    pca_project,
    per_step_deviation,
    psnr,
    realized_deviation,
)
from .planner import (
    PlanTables,
    Schedule,
    all_steps_schedule,
    brute_force_plan,
    objective_of,
    plan_exact_dp,
    plan_paper_dp,
    schedule_from_json,
    schedule_to_json,
    uniform_schedule,
)
from .predictor import DEFAULT_ORDER, Prediction, PredictorCache, divided_differences, empty_cache
from .runtime import RunRecord, StepOutcome, playback_model, run_baseline, run_schedule
from .trajectory import (
    FeatureTrajectory,
    ToyModelSpec,
    euler_update,
    generate_synthetic,
    load_trajectory,
    make_field,
    read_trajectory,
    run_toy_sampler,
    save_trajectory,
    write_trajectory,
)

__version__ = "0.1.0"
