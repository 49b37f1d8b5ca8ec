"""Command-line entry point.

Exit codes: 0 success, 1 runtime/data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

from .encoders import CLIP_DIM, make_encoder
from .extract import extract


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="embed-extract",
        description="encode an (image, prompt, mos) manifest into a HALN embedding file",
    )
    ap.add_argument("--manifest", required=True, help="CSV with image_path,prompt,mos columns")
    ap.add_argument("--out", required=True, help="output embedding file")
    ap.add_argument("--scale", default="1:5", help="rating scale as lo:hi (default 1:5)")
    ap.add_argument("--batch-size", type=int, default=16)
    ap.add_argument("--encoder", choices=["clip", "hashed"], default="clip",
                    help="'clip' needs pretrained weights; 'hashed' is a deterministic offline stand-in")
    ap.add_argument("--dim", type=int, default=CLIP_DIM,
                    help="embedding width for the hashed encoder")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        lo_text, _, hi_text = args.scale.partition(":")
        lo, hi = float(lo_text), float(hi_text)
    except ValueError:
        ap.error(f"--scale must look like '1:5', got {args.scale!r}")
    if args.batch_size < 1:
        ap.error("--batch-size must be positive")
    try:
        encoder = make_encoder(args.encoder, dim=args.dim)
        report = extract(args.manifest, args.out, lo, hi, encoder,
                         batch_size=args.batch_size)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {report.written} records to {args.out}"
          + (f" ({report.skipped} skipped)" if report.skipped else ""))
    return 0


if __name__ == "__main__":
    sys.exit(main())
