"""Command-line entry points for surrogate training and prediction."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .archive import save_weights
from .config import SurrogateConfig
from .predict import predict_to_file
from .training import TrainingDivergedError, save_history, train


def _cmd_train(args: argparse.Namespace) -> int:
    config = SurrogateConfig(
        modes=args.modes,
        width=args.width,
        layers=args.layers,
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
        test_fraction=args.test_fraction,
    )
    try:
        result = train(args.manifest, config)
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    weights_path = out / "weights.npz"
    save_weights(
        weights_path,
        result.weights,
        result.stats,
        config,
        extra={
            "manifest": str(args.manifest),
            "train_ids": list(result.train_ids),
            "test_ids": list(result.test_ids),
        },
    )
    save_history(out / "history.json", result.history)
    summary = {
        "out": str(out),
        "weights": str(weights_path),
        "epochs": config.epochs,
        "final_train_rel_l2": result.history["train"][-1],
    }
    if result.history["test"]:
        summary["final_test_rel_l2"] = result.history["test"][-1]
    print(json.dumps(summary))
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    fields = predict_to_file(args.weights, args.model, args.out)
    print(
        json.dumps(
            {
                "out": args.out,
                "shape": list(fields.shape),
                "finite": bool(np.isfinite(fields).all()),
            }
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fnosurrogate",
        description=(
            "Fourier neural operator surrogate: train on homogenization "
            "datasets and export warm-start field predictions."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train on a dataset manifest")
    tr.add_argument("--manifest", required=True, help="dataset manifest path")
    tr.add_argument("--out", required=True, help="output directory")
    tr.add_argument("--modes", type=int, default=12)
    tr.add_argument("--width", type=int, default=32)
    tr.add_argument("--layers", type=int, default=4)
    tr.add_argument("--lr", type=float, default=1e-3)
    tr.add_argument("--epochs", type=int, default=100)
    tr.add_argument("--batch", type=int, default=4)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument(
        "--test-fraction", dest="test_fraction", type=float, default=0.2
    )
    tr.set_defaults(func=_cmd_train)

    pr = sub.add_parser("predict", help="write warm-start fields for a model")
    pr.add_argument("--weights", required=True, help="weights archive path")
    pr.add_argument("--model", required=True, help="model container path")
    pr.add_argument("--out", required=True, help="output container path")
    pr.set_defaults(func=_cmd_predict)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
