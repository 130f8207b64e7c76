"""Training loop, metrics logging, and discrete nearest-neighbor evaluation."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
import torch

from .config import EpisodeSpec, ModelConfig, TrainConfig, TRAIN_EPISODES
from .episodes import sample_episode
from .losses import episode_loss
from .model import DPN, round_bits


class DivergenceError(RuntimeError):
    pass


@dataclass
class MetricsRow:
    epoch: int
    batch: int
    loss: float
    accuracy: float
    gap: float


def train(
    train_classes,
    cfg: TrainConfig,
    model_cfg: ModelConfig = ModelConfig(),
    episodes: EpisodeSpec = TRAIN_EPISODES,
    log_path=None,
) -> tuple[DPN, list[MetricsRow]]:
    """Episodic training; returns the model and the per-batch metrics log."""
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    model = DPN(model_cfg)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    rows: list[MetricsRow] = []
    for epoch in range(cfg.epochs):
        for batch in range(cfg.batches_per_epoch):
            ep = sample_episode(rng, train_classes, episodes)
            opt.zero_grad()
            loss, stats = episode_loss(model, ep, cfg.lambda_reg)
            if not torch.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch} batch {batch}: "
                    f"{loss.item()!r} (lr={cfg.lr}, lambda={cfg.lambda_reg})")
            loss.backward()
            opt.step()
            rows.append(MetricsRow(epoch, batch, loss.item(),
                                   stats["accuracy"], stats["gap"]))
    if log_path is not None:
        write_metrics(log_path, rows)
    model.eval()
    return model, rows


def write_metrics(path, rows: list[MetricsRow]) -> None:
    with open(os.fspath(path), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "batch", "loss", "accuracy", "gap"])
        for r in rows:
            w.writerow([r.epoch, r.batch, repr(r.loss),
                        repr(r.accuracy), repr(r.gap)])


@torch.no_grad()
def evaluate_discrete(
    model: DPN, classes, spec: EpisodeSpec, episodes: int, seed: int = 0
) -> float:
    """Mean nearest-neighbor accuracy on rounded (Hamming-space) embeddings."""
    model.eval()
    rng = np.random.default_rng(seed)
    correct = total = 0
    for _ in range(episodes):
        ep = sample_episode(rng, classes, spec)
        protos = round_bits(model.prototypes(ep.anchors))
        q = round_bits(model.embed(ep.queries, k=ep.anchors.shape[1]))
        dist = (q.unsqueeze(1) != protos.unsqueeze(0)).sum(dim=2)
        pred = dist.argmin(dim=1)
        correct += (pred == ep.labels).sum().item()
        total += len(ep.labels)
    return correct / total
