"""Command line front end: train, eval, export."""

from __future__ import annotations

import argparse
import os
import sys

import torch

from .config import EpisodeSpec, ModelConfig, TrainConfig
from .data import SplitError, load_splits, synthetic_splits
from .model import DPN


def _splits(args):
    if args.data_root:
        return load_splits(args.data_root)
    return synthetic_splits(args.data_seed)


def _add_data_args(sp):
    sp.add_argument("--data-root", default=None,
                    help="image-folder corpus; omit to use the synthetic one")
    sp.add_argument("--data-seed", type=int, default=0)


def build_parser():
    ap = argparse.ArgumentParser(prog="dpn-trainer", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    defaults = TrainConfig()
    sp = sub.add_parser("train", help="train and write checkpoint + metrics log")
    _add_data_args(sp)
    sp.add_argument("--epochs", type=int, default=defaults.epochs)
    sp.add_argument("--batches", type=int, default=defaults.batches_per_epoch)
    sp.add_argument("--lambda-reg", type=float, default=defaults.lambda_reg)
    sp.add_argument("--lr", type=float, default=defaults.lr)
    sp.add_argument("--seed", type=int, default=defaults.seed)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--metrics", required=True)

    sp = sub.add_parser("eval", help="discrete nearest-neighbor accuracy")
    _add_data_args(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--split", choices=("train", "val", "test"), default="test")
    sp.add_argument("--way", type=int, required=True)
    sp.add_argument("--shot", type=int, default=1)
    sp.add_argument("--queries", type=int, default=5)
    sp.add_argument("--episodes", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("export", help="write embeddings + distance matrices")
    _add_data_args(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--split", choices=("train", "val", "test"), default="val")
    sp.add_argument("--way", type=int, default=5)
    sp.add_argument("--shot", type=int, default=1)
    sp.add_argument("--queries", type=int, default=5)
    sp.add_argument("--episodes", type=int, default=40)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", required=True)
    return ap


def load_checkpoint(path) -> DPN:
    state = torch.load(path, weights_only=True)
    model = DPN(ModelConfig(**state["config"]))
    model.load_state_dict(state["model"])
    model.eval()
    return model


def cmd_train(args) -> int:
    from .train import train

    splits = _splits(args)
    cfg = TrainConfig(lambda_reg=args.lambda_reg, epochs=args.epochs,
                      batches_per_epoch=args.batches, lr=args.lr, seed=args.seed)
    model, rows = train(splits.train, cfg, log_path=args.metrics)
    torch.save({"config": vars(ModelConfig()), "model": model.state_dict()},
               args.checkpoint)
    last = rows[-1]
    print(f"trained {cfg.epochs}x{cfg.batches_per_epoch} batches, "
          f"final loss {last.loss:.4f}, accuracy {last.accuracy:.3f}, "
          f"gap {last.gap:.4f}")
    return 0


def cmd_eval(args) -> int:
    from .train import evaluate_discrete

    splits = _splits(args)
    model = load_checkpoint(args.checkpoint)
    spec = EpisodeSpec(way=args.way, shot=args.shot, queries=args.queries)
    acc = evaluate_discrete(model, getattr(splits, args.split), spec,
                            args.episodes, args.seed)
    print(f"{args.way}-way {args.shot}-shot discrete accuracy: {acc:.4f} "
          f"({args.episodes} episodes, split {args.split})")
    return 0


def cmd_export(args) -> int:
    from .export import export_distance_matrices, export_embeddings

    splits = _splits(args)
    model = load_checkpoint(args.checkpoint)
    classes = getattr(splits, args.split)
    spec = EpisodeSpec(way=args.way, shot=args.shot, queries=args.queries)
    os.makedirs(args.out_dir, exist_ok=True)
    export_embeddings(model, classes, os.path.join(args.out_dir, "embeddings.demb"))
    combined = export_distance_matrices(
        model, classes, spec, args.episodes, args.out_dir, args.seed)
    print(f"wrote embeddings.demb and {args.episodes} episode matrices "
          f"(+ {os.path.basename(combined)}) to {args.out_dir}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return {"train": cmd_train, "eval": cmd_eval, "export": cmd_export}[args.command](args)
    except (SplitError, FileNotFoundError, ValueError) as e:
        print(f"dpn-trainer: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
