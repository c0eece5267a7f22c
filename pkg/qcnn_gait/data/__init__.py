from qcnn_gait.data.cycles import (
    CYCLE_LENGTH,
    GaitCycle,
    GaitDataset,
    resample_cycle,
    rotate_cycle,
    rotate_dataset,
    split_train_val,
)
from qcnn_gait.data.io import load_dataset, save_dataset
from qcnn_gait.data.synthetic import generate_synthetic_dataset

__all__ = [
    "CYCLE_LENGTH",
    "GaitCycle",
    "GaitDataset",
    "generate_synthetic_dataset",
    "load_dataset",
    "resample_cycle",
    "rotate_cycle",
    "rotate_dataset",
    "save_dataset",
    "split_train_val",
]
