"""Command line for the activation exporter."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .export import ExportSpec, WeightsUnavailableError, export, read_manifest


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cnn_export",
        description="Export final-convolution-block CNN activations to MFP1 feature files.",
    )
    parser.add_argument("--model", choices=("alexnet", "vgg19"), required=True)
    parser.add_argument("--policy", choices=("full", "resize224"), default="full")
    parser.add_argument("--manifest", required=True, help="CSV manifest with a path,label header")
    parser.add_argument("--out", required=True)
    parser.add_argument(
        "--weights",
        choices=("pretrained", "random"),
        default="pretrained",
        help="'random' uses a seeded initialisation for offline/deterministic runs",
    )
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    try:
        inputs = read_manifest(Path(args.manifest))
        spec = ExportSpec(
            model=args.model,
            resize_policy=args.policy,
            inputs=tuple(inputs),
            out_dir=Path(args.out),
            weights=args.weights,
            seed=args.seed,
        )
        written = export(spec)
    except WeightsUnavailableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(written)} tensors to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
