from qcnn_gait.api.api import (
    evaluate_checkpoint,
    generate_dataset_file,
    run_flip_from_config,
    run_matrix_from_config,
    train_from_config,
    visualize_checkpoint,
)
from qcnn_gait.verification import check_equivariance_suite, grad_check_small_qcnn

__version__ = "0.1.0.dev0"

__all__ = [
    "generate_dataset_file",
    "train_from_config",
    "evaluate_checkpoint",
    "run_matrix_from_config",
    "run_flip_from_config",
    "visualize_checkpoint",
    "check_equivariance_suite",
    "grad_check_small_qcnn",
]
