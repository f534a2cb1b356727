from rmppi.dynamics.dataset import TransitionDataset, load_dataset, save_dataset
from rmppi.dynamics.model import (
    LearnedDynamics,
    Normalizer,
    load_dynamics,
    multi_step_loss,
    save_dynamics,
)
from rmppi.dynamics.training import (
    OpenLoopError,
    TrainConfig,
    TrainingReport,
    collect_rollouts,
    evaluate_open_loop,
    finetune_online,
    train_dynamics,
)


def predict(dyn: LearnedDynamics, x, u):
    return dyn.predict(x, u)


__all__ = [
    "LearnedDynamics",
    "Normalizer",
    "OpenLoopError",
    "TrainConfig",
    "TrainingReport",
    "TransitionDataset",
    "collect_rollouts",
    "evaluate_open_loop",
    "finetune_online",
    "load_dataset",
    "load_dynamics",
    "multi_step_loss",
    "predict",
    "save_dataset",
    "save_dynamics",
    "train_dynamics",
]
