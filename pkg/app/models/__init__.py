"""Attribution classifiers: CAT and the CNN / MLP baselines."""

from app.models.base import BaseClassifier, ModelOutput
from app.models.cat import CatModel, cat_forward, param_count
from app.models.checkpoint import CheckpointMeta, load_checkpoint, save_checkpoint
from app.models.cnn import CnnModel, cnn_forward
from app.models.config import CatConfig, CnnConfig, MlpConfig
from app.models.mlp import MlpModel, mlp_forward
from app.models.registry import Prediction, build_model, model_config_for, predict

__all__ = [
    "BaseClassifier",
    "CatConfig",
    "CatModel",
    "CheckpointMeta",
    "CnnConfig",
    "CnnModel",
    "MlpConfig",
    "MlpModel",
    "ModelOutput",
    "Prediction",
    "build_model",
    "cat_forward",
    "cnn_forward",
    "load_checkpoint",
    "mlp_forward",
    "model_config_for",
    "param_count",
    "predict",
    "save_checkpoint",
]
