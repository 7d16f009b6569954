"""Reference learner for magrid environments over the wire protocol."""

from .client import EnvClient, ProtocolError
from .train import AblationReport, TrainConfig, TrainResult, ablate, greedy_eval, train

__all__ = [
    "AblationReport",
    "EnvClient",
    "ProtocolError",
    "TrainConfig",
    "TrainResult",
    "ablate",
    "greedy_eval",
    "train",
]
