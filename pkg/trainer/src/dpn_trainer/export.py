"""Export rounded embeddings and Hamming distance matrices.

Two on-disk products, both consumed by the matching toolkit through its
documented file formats (this package deliberately does not import it):

- embedding files: magic ``DEMB``, u16 version 1, u32 dimension, u32 record
  count, then per record a u32 label and ceil(n/8) bytes of packed bits
  (little-endian byte order throughout, bit j of a record at byte j//8,
  position j%8);
- distance-matrix CSVs: one row per query — the Hamming distances to the
  episode's class anchors, then the correct column index.
"""

from __future__ import annotations

import os
import struct

import numpy as np
import torch

from .config import EpisodeSpec
from .episodes import sample_episode
from .model import DPN, round_bits

_MAGIC = b"DEMB"
_VERSION = 1


def pack_bits(bits: np.ndarray) -> bytes:
    return np.packbits(bits.astype(np.uint8), bitorder="little").tobytes()


def write_demb(path, records: list[tuple[int, np.ndarray]], n: int) -> None:
    """records: (label, bit vector of length n) pairs."""
    with open(os.fspath(path), "wb") as f:
        f.write(_MAGIC + struct.pack("<HII", _VERSION, n, len(records)))
        for label, bits in records:
            if bits.shape != (n,):
                raise ValueError(f"bit vector shape {bits.shape} != ({n},)")
            f.write(struct.pack("<I", label) + pack_bits(bits))


def read_demb(path) -> tuple[int, list[tuple[int, np.ndarray]]]:
    """Inverse of write_demb, for tests and round-trip checks."""
    with open(os.fspath(path), "rb") as f:
        blob = f.read()
    if blob[:4] != _MAGIC:
        raise ValueError("bad magic")
    version, n, count = struct.unpack_from("<HII", blob, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported version {version}")
    span = (n + 7) // 8
    records = []
    off = 14
    for _ in range(count):
        (label,) = struct.unpack_from("<I", blob, off)
        raw = np.frombuffer(blob, np.uint8, span, off + 4)
        records.append((label, np.unpackbits(raw, bitorder="little")[:n]))
        off += 4 + span
    return n, records


@torch.no_grad()
def embed_classes(model: DPN, classes, sample_index: int = 0) -> np.ndarray:
    """One rounded embedding per class, from its sample_index-th image."""
    model.eval()
    imgs = torch.from_numpy(
        np.stack([c.images[sample_index] for c in classes])
    ).float().unsqueeze(1)
    out = []
    for chunk in imgs.split(256):
        out.append(round_bits(model.embed(chunk)).numpy().astype(np.uint8))
    return np.concatenate(out)


def export_embeddings(model: DPN, classes, path) -> None:
    emb = embed_classes(model, classes)
    write_demb(path, list(enumerate(emb)), emb.shape[1])


@torch.no_grad()
def episode_distance_rows(
    model: DPN, classes, spec: EpisodeSpec, episodes: int, seed: int = 0
) -> list[list[int]]:
    """Hamming rows (k distances + correct index) over sampled episodes."""
    model.eval()
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(episodes):
        ep = sample_episode(rng, classes, spec)
        protos = round_bits(model.prototypes(ep.anchors))
        q = round_bits(model.embed(ep.queries, k=ep.anchors.shape[1]))
        dist = (q.unsqueeze(1) != protos.unsqueeze(0)).sum(dim=2)
        for drow, label in zip(dist.tolist(), ep.labels.tolist()):
            rows.append([int(d) for d in drow] + [int(label)])
    return rows


def write_distance_csv(path, rows: list[list[int]]) -> None:
    with open(os.fspath(path), "w") as f:
        for row in rows:
            f.write(",".join(str(x) for x in row) + "\n")


def export_distance_matrices(
    model: DPN, classes, spec: EpisodeSpec, episodes: int, out_dir, seed: int = 0
) -> str:
    """Per-episode CSVs plus a combined file; returns the combined path."""
    os.makedirs(os.fspath(out_dir), exist_ok=True)
    combined: list[list[int]] = []
    per_episode = spec.way * spec.queries
    rows = episode_distance_rows(model, classes, spec, episodes, seed)
    for e in range(episodes):
        chunk = rows[e * per_episode:(e + 1) * per_episode]
        write_distance_csv(os.path.join(out_dir, f"episode_{e:03d}.csv"), chunk)
        combined.extend(chunk)
    combined_path = os.path.join(out_dir, "combined.csv")
    write_distance_csv(combined_path, combined)
    return combined_path
