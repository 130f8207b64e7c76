"""Configuration dataclasses for model, episodes, and training."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ModelConfig:
    """Shared-weight conv stack + fully connected head with sigmoid output.

    The anchor path sums the K per-anchor conv outputs before the shared
    fully connected layer; the query path multiplies its single conv output
    by K before the same layer, so both paths see activations on the same
    scale.
    """

    n: int = 1024            # embedding dimension
    channels: int = 64       # conv width, all four blocks
    image_size: int = 28

    def __post_init__(self):
        if self.n < 1 or self.channels < 1:
            raise ValueError("n and channels must be positive")
        if self.image_size < 16:
            # four 2x2 poolings must leave at least a 1x1 map
            raise ValueError(f"image_size {self.image_size} too small")


@dataclass(frozen=True)
class EpisodeSpec:
    way: int                 # classes per episode (40 train; 5 or 20 eval)
    shot: int = 1            # anchors per class (K)
    queries: int = 3         # query images per class

    def __post_init__(self):
        if self.way < 2:
            raise ValueError("way must be >= 2")
        if self.shot < 1 or self.queries < 1:
            raise ValueError("shot and queries must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    """Defaults are the reference desk-scale recipe (~8 min on one CPU core)."""

    lambda_reg: float = 0.0
    epochs: int = 12
    batches_per_epoch: int = 100
    lr: float = 2e-3
    seed: int = 0

    def __post_init__(self):
        if self.lambda_reg < 0:
            raise ValueError("lambda_reg must be nonnegative")
        if self.epochs < 1 or self.batches_per_epoch < 1:
            raise ValueError("epochs and batches_per_epoch must be >= 1")


TRAIN_EPISODES = EpisodeSpec(way=40, shot=1, queries=3)
# log-spaced regularizer sweep; the exact values are a choice, not a given
LAMBDA_SWEEP = (1e-3, 1e-2, 1e-1)
