"""Command-line entry points for generation, solves, and benchmarks."""

from __future__ import annotations

import argparse
import json
import sys

from . import pipeline
from .container import save_model
from .geometry import volume_fraction

FAMILY_CHOICES = ("primitive", "gyroid", "diamond", "fks")


def _cmd_gen(args: argparse.Namespace) -> int:
    model, meta = pipeline.generate_tpms_model(
        args.family, args.network, args.vf, args.res, args.nu
    )
    meta["seed"] = args.seed
    save_model(model, args.out, meta)
    print(
        json.dumps(
            {
                "out": args.out,
                "family": args.family,
                "network": args.network,
                "volume_fraction": volume_fraction(model),
                "c": meta["c"],
            }
        )
    )
    return 0


def _cmd_homog(args: argparse.Namespace) -> int:
    payload = pipeline.run_homogenize(
        args.model,
        args.out,
        tol=args.tol,
        method=args.solver,
        preconditioner=args.precond,
        max_iters=args.max_iters,
        init_path=args.init,
        tol_fine=args.tol_fine,
    )
    print(json.dumps({"out": args.out, "unconverged_cases": payload["unconverged_cases"]}))
    return 0 if not payload["unconverged_cases"] else 1


def _cmd_dataset(args: argparse.Namespace) -> int:
    with open(args.config) as fh:
        config = json.load(fh)
    manifest = pipeline.gen_dataset(config, args.out)
    print(
        json.dumps(
            {
                "out": args.out,
                "samples": len(manifest["samples"]),
                "failures": len(manifest.get("failures", ())),
            }
        )
    )
    return 0 if not manifest.get("failures") else 1


def _cmd_bench(args: argparse.Namespace) -> int:
    with open(args.config) as fh:
        config = json.load(fh)
    payload = pipeline.bench_warmstart(config, args.out)
    print(json.dumps({"out": args.out, "cells": len(payload["rows"])}))
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    factor = pipeline.calibrate_from_manifest(args.manifest, args.out)
    print(json.dumps({"out": args.out, "train_count": factor.train_count}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prefine",
        description=(
            "Periodic voxel FEM homogenization of 3D microstructures with "
            "warm-started iterative solvers."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a TPMS voxel model file")
    gen.add_argument("--family", required=True, choices=FAMILY_CHOICES)
    gen.add_argument("--network", required=True, choices=("solid", "sheet"))
    gen.add_argument("--vf", required=True, type=float, help="target volume fraction")
    gen.add_argument("--res", required=True, type=int, help="voxels per axis")
    gen.add_argument("--nu", required=True, type=float, help="Poisson ratio")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output container path")
    gen.set_defaults(func=_cmd_gen)

    homog = sub.add_parser("homog", help="homogenize a stored model")
    homog.add_argument("--model", required=True)
    homog.add_argument("--tol", type=float, default=1e-8)
    homog.add_argument(
        "--solver", default="pcg", choices=("pcg", "cg", "jacobi", "gauss_seidel", "sor")
    )
    homog.add_argument("--init", default=None, help="warm-start fields container")
    homog.add_argument("--tol-fine", dest="tol_fine", type=float, default=None)
    homog.add_argument("--precond", default="jacobi_diag", choices=("none", "jacobi_diag", "ic0"))
    homog.add_argument("--max-iters", dest="max_iters", type=int, default=50_000)
    homog.add_argument("--out", required=True, help="output directory")
    homog.set_defaults(func=_cmd_homog)

    dataset = sub.add_parser("dataset", help="generate a solved dataset + manifest")
    dataset.add_argument("--config", required=True, help="JSON config path")
    dataset.add_argument("--out", required=True, help="output directory")
    dataset.set_defaults(func=_cmd_dataset)

    bench = sub.add_parser("bench", help="run the warm-start benchmark table")
    bench.add_argument("--config", required=True, help="JSON config path")
    bench.add_argument("--out", required=True, help="output directory")
    bench.set_defaults(func=_cmd_bench)

    calibrate = sub.add_parser(
        "calibrate", help="fit the tensor scaling factor from a manifest"
    )
    calibrate.add_argument("--manifest", required=True)
    calibrate.add_argument("--out", required=True, help="output JSON path")
    calibrate.set_defaults(func=_cmd_calibrate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
