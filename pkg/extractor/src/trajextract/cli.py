"""Command line for trajectory extraction."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .capture import ExtractionConfig, ExtractionError, extract
from .pipelines import PIPELINES


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajextract")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="dump per-step final-layer features")
    p.add_argument("--model", required=True, choices=sorted(PIPELINES))
    p.add_argument("--prompts", required=True, help="text file, one prompt per line")
    p.add_argument("-T", type=int, default=10, help="denoising step count")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--device", default="cpu")
    p.add_argument("--pool-cap", type=int, default=4096,
                   help="mean-pool feature maps larger than this many values")
    p.set_defaults(func=cmd_extract)
    return parser


def cmd_extract(args) -> int:
    prompts_path = Path(args.prompts)
    if not prompts_path.exists():
        print(f"error: --prompts file not found: {prompts_path}", file=sys.stderr)
        return 2
    prompts = [line.strip() for line in prompts_path.read_text().splitlines() if line.strip()]
    try:
        config = ExtractionConfig(
            model=args.model,
            prompts=prompts,
            total_steps=args.T,
            out_dir=args.out,
            device=args.device,
            seed=args.seed,
            pool_cap=args.pool_cap,
        )
        paths = extract(config)
    except (ExtractionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
