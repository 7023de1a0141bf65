"""Command-line front end mirroring ExtractionJob."""

from __future__ import annotations

import argparse
import sys

from .extract import LAYERS, ExtractionError, ExtractionJob, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="osav-extract",
        description="Capture classifier activations for a dataset as an OSAV v1 file",
    )
    parser.add_argument("--arch", required=True,
                        help="torchvision model name, or 'torchscript'")
    parser.add_argument("--weights", help="weights path (state_dict or torchscript)")
    parser.add_argument("--data", required=True, help="ImageFolder dataset root")
    parser.add_argument("--split", help="subdirectory of the dataset root")
    parser.add_argument("--layer", choices=LAYERS, default="logits")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--image-size", type=int, default=32)
    parser.add_argument("--out", required=True, help="output OSAV path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = ExtractionJob(
        architecture=args.arch,
        weights_path=args.weights,
        data_root=args.data,
        output_path=args.out,
        split=args.split,
        layer=args.layer,
        batch_size=args.batch_size,
        device=args.device,
        image_size=args.image_size,
    )
    try:
        extract(job)
    except ExtractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
