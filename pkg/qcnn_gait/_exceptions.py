class QcnnError(Exception):
    """Base class for errors raised by qcnn_gait."""


class QuaternionDomainError(QcnnError, ValueError):
    """Quaternion outside the domain of an operation (zero inverse, non-unit rotation)."""


class ContractViolation(QcnnError, ValueError):
    """Shape or argument contract broken by a caller."""


class ConfigurationError(QcnnError, ValueError):
    """Invalid model or run configuration."""


class DatasetFormatError(QcnnError):
    """Error while parsing a binary gait-cycle dataset."""

    def __init__(self, message: str, *, offset: int) -> None:
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class CheckpointError(QcnnError):
    """Error while reading or writing a checkpoint file."""


class TrainingDivergedError(QcnnError):
    """Loss became non-finite during training."""

    def __init__(self, message: str, *, epoch: int, step: int) -> None:
        super().__init__(message)
        self.epoch = epoch
        self.step = step


class VisualizationError(QcnnError):
    """Error during kernel visualization."""
