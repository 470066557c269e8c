from app.train.config import PROTOCOL_DEFAULTS, TrainConfig, train_config_for
from app.train.optim import OptimState, Optimizer, adam_step, adamw_step
from app.train.sweep import SweepResult, SweepRow, sweep_epsilon
from app.train.trainer import FitResult, calibrate_threshold, fit, write_history

__all__ = [
    "FitResult",
    "OptimState",
    "Optimizer",
    "PROTOCOL_DEFAULTS",
    "SweepResult",
    "SweepRow",
    "TrainConfig",
    "adam_step",
    "adamw_step",
    "calibrate_threshold",
    "fit",
    "sweep_epsilon",
    "train_config_for",
    "write_history",
]
