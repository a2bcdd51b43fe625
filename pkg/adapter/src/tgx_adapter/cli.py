"""tgx-adapter command line: serve a model over stdio, or train a toy one."""

from __future__ import annotations

import argparse
import json
import sys

from .cell import from_checkpoint, from_weights_document
from .serve import serve
from .train import TrainConfig, train_toy


def cmd_serve(args) -> int:
    if bool(args.weights) == bool(args.checkpoint):
        print("serve needs exactly one of --weights or --checkpoint", file=sys.stderr)
        return 2
    if args.weights:
        if not args.adjacency:
            print("--weights requires --adjacency", file=sys.stderr)
            return 2
        cell = from_weights_document(args.weights, args.adjacency)
    else:
        cell = from_checkpoint(args.checkpoint)
    log = open(args.log, "a") if args.log else None
    try:
        return serve(cell, sys.stdin, sys.stdout, log=log)
    finally:
        if log is not None:
            log.close()


def cmd_train_toy(args) -> int:
    report = train_toy(
        TrainConfig(
            adjacency_path=args.adjacency,
            features_path=args.features,
            out_path=args.out,
            window=args.window,
            hidden_dim=args.hidden_dim,
            epochs=args.epochs,
            batch_size=args.batch_size,
            learning_rate=args.learning_rate,
            seed=args.seed,
        )
    )
    print(json.dumps(report, indent=1, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tgx-adapter")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="answer protocol requests on stdio")
    p.add_argument("--weights", help="shared weights document (needs --adjacency)")
    p.add_argument("--adjacency", help="adjacency CSV for the weights document")
    p.add_argument("--checkpoint", help="torch checkpoint from train-toy")
    p.add_argument("--log", help="append request/response lines to this file")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("train-toy", help="train a small model on synthetic CSVs")
    p.add_argument("--adjacency", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--window", type=int, default=4)
    p.add_argument("--hidden-dim", type=int, default=6)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_toy)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
