from typing import List, Optional, Tuple


class SDLPGCError(Exception):
    """Base class for all forecaster errors."""


class DataValidationError(SDLPGCError, ValueError):
    """Raised when a dataset file or array violates the loading contract."""

    def __init__(self, message: str, cells: Optional[List[Tuple[int, int]]] = None):
        super().__init__(message)
        self.cells = cells or []


class ConfigurationError(SDLPGCError, ValueError):
    """Raised when a configuration cannot produce a valid model or run."""


class CheckpointError(SDLPGCError):
    """Raised for corrupt, truncated or unsupported checkpoints."""


class TrainingDivergedError(SDLPGCError):
    """Raised when the training loss stops being finite."""

    def __init__(self, epoch: int, learning_rate: float, grad_norm: float):
        super().__init__(
            f"Loss became non-finite at epoch {epoch} "
            f"(lr={learning_rate:.3g}, last grad norm={grad_norm:.3g})"
        )
        self.epoch = epoch
        self.learning_rate = learning_rate
        self.grad_norm = grad_norm
