from rmppi.planner.config import (
    DYNAMICS_PRESETS,
    PLANNER_PRESETS,
    PlannerConfig,
    Variant,
    planner_preset,
)
from rmppi.planner.mppi import (
    PlanDiagnostics,
    Planner,
    ScoredRollout,
    ScoredRollouts,
    TrueDynamics,
    WeightVector,
    compute_weights,
    init_nominal,
    sample_noise,
    score_rollout,
    score_rollouts,
    update_sequence,
)
from rmppi.planner.runner import EpisodeMetrics, Trajectory, receding_horizon_run


def plan(planner: Planner, x0):
    return planner.plan(x0)


__all__ = [
    "DYNAMICS_PRESETS",
    "EpisodeMetrics",
    "PLANNER_PRESETS",
    "PlanDiagnostics",
    "Planner",
    "PlannerConfig",
    "ScoredRollout",
    "ScoredRollouts",
    "Trajectory",
    "TrueDynamics",
    "Variant",
    "WeightVector",
    "compute_weights",
    "init_nominal",
    "plan",
    "planner_preset",
    "receding_horizon_run",
    "sample_noise",
    "score_rollout",
    "score_rollouts",
    "update_sequence",
]
