"""Discrete prototypical network trainer and embedding exporter."""

from .config import EpisodeSpec, ModelConfig, TrainConfig
from .data import SplitError, Splits, load_splits, make_splits, synthetic_splits
from .model import DPN, round_bits

__version__ = "0.1.0"

__all__ = [
    "DPN",
    "EpisodeSpec",
    "ModelConfig",
    "SplitError",
    "Splits",
    "TrainConfig",
    "load_splits",
    "make_splits",
    "round_bits",
    "synthetic_splits",
    "__version__",
]
