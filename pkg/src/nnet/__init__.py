from .model import Dataset, FnnModel, forward, gradient, jacobian, mse, residuals
from .training import TrainConfig, TrainResult, train

__all__ = [
    "Dataset",
    "FnnModel",
    "forward",
    "gradient",
    "jacobian",
    "mse",
    "residuals",
    "TrainConfig",
    "TrainResult",
    "train",
]
