from qcnn_gait.training.checkpoint import (
    Checkpoint,
    load_checkpoint,
    restore_model,
    save_checkpoint,
)
from qcnn_gait.training.metrics import EpochMetrics, EvalReport
from qcnn_gait.training.trainer import TrainingResult, build_model, evaluate, train

__all__ = [
    "Checkpoint",
    "EpochMetrics",
    "EvalReport",
    "TrainingResult",
    "build_model",
    "evaluate",
    "load_checkpoint",
    "restore_model",
    "save_checkpoint",
    "train",
]
