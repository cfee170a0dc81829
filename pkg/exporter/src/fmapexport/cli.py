"""Command line for the feature exporter."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .export import CheckpointMismatch, ExportSpec, export_features


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fmap-export",
        description="Export final-stage ResNet-50 feature maps as FMAP files.",
    )
    parser.add_argument("--images", type=Path, required=True, help="input image directory")
    parser.add_argument("--ckpt", type=Path, required=True, help="backbone checkpoint")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--size", type=int, default=672, help="square input size")
    parser.add_argument("--batch", type=int, default=8, help="inference batch size")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--threads", type=int, default=1)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    spec = ExportSpec(
        checkpoint=str(args.ckpt),
        input_size=args.size,
        batch_size=args.batch,
        device=args.device,
        threads=args.threads,
    )
    try:
        summary = export_features(args.images, args.out, spec)
    except (CheckpointMismatch, FileNotFoundError, ValueError) as exc:
        logging.getLogger("fmapexport").error("%s", exc)
        return 2
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
