"""Episode loss and the discretization gap."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .model import DPN, round_bits
from .episodes import Episode


def discretization_gap(outputs: torch.Tensor) -> torch.Tensor:
    """Mean absolute distance to the rounded output, over samples and coords.

    0 for exactly binary outputs; 0.25 in expectation for outputs uniform on
    (0, 1) — the untrained-network ballpark.
    """
    if outputs.lt(0).any() or outputs.gt(1).any():
        raise ValueError("outputs must lie in [0, 1]")
    return (outputs - round_bits(outputs)).abs().mean()


def episode_loss(
    model: DPN, episode: Episode, lambda_reg: float = 0.0
) -> tuple[torch.Tensor, dict]:
    """NLL of softmax over negated squared distances, plus the binarization
    penalty lambda * mean-per-sample ||f(x) - round(f(x))||^2.

    Distances use the raw sigmoid outputs: rounding has a zero derivative, so
    training must happen pre-rounding.
    """
    k = episode.anchors.shape[1]
    protos = model.prototypes(episode.anchors)          # (way, n)
    q = model.embed(episode.queries, k=k)               # (way*queries, n)
    d2 = torch.cdist(q, protos).square()
    nll = F.cross_entropy(-d2, episode.labels)
    loss = nll
    outputs = torch.cat([q, protos])
    if lambda_reg:
        reg = (outputs - round_bits(outputs).detach()).square().sum(dim=1).mean()
        loss = nll + lambda_reg * reg
    with torch.no_grad():
        acc = (d2.argmin(dim=1) == episode.labels).float().mean().item()
        gap = discretization_gap(outputs).item()
    return loss, {"nll": nll.item(), "accuracy": acc, "gap": gap}
