"""Episode sampling: way classes, K anchors and q queries per class."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .config import EpisodeSpec


@dataclass(frozen=True)
class Episode:
    anchors: torch.Tensor    # (way, K, 1, S, S) float32
    queries: torch.Tensor    # (way * q, 1, S, S) float32
    labels: torch.Tensor     # (way * q,) int64, position of the true class
    class_indices: tuple     # indices into the split's class list


def sample_episode(rng: np.random.Generator, classes, spec: EpisodeSpec) -> Episode:
    if spec.way > len(classes):
        raise ValueError(f"way {spec.way} > {len(classes)} available classes")
    picked = rng.choice(len(classes), size=spec.way, replace=False)
    anchors, queries, labels = [], [], []
    for slot, ci in enumerate(picked):
        imgs = classes[ci].images
        need = spec.shot + spec.queries
        if need > len(imgs):
            raise ValueError(
                f"class {classes[ci].name} has {len(imgs)} samples, need {need}")
        sel = rng.choice(len(imgs), size=need, replace=False)
        anchors.append(imgs[sel[:spec.shot]])
        queries.append(imgs[sel[spec.shot:]])
        labels.extend([slot] * spec.queries)
    a = torch.from_numpy(np.stack(anchors)).float().unsqueeze(2)
    q = torch.from_numpy(np.concatenate(queries)).float().unsqueeze(1)
    return Episode(
        anchors=a,
        queries=q,
        labels=torch.tensor(labels, dtype=torch.int64),
        class_indices=tuple(int(i) for i in picked),
    )
