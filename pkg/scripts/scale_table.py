#!/usr/bin/env python3
"""Print a scale-function table for one model, comparing inversion against
the closed form when one exists (same format as `levyfn scale-table`)."""

import argparse
import sys

from levyfn.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default="stable15")
    ap.add_argument("--min", type=float, default=0.1)
    ap.add_argument("--max", type=float, default=10.0)
    ap.add_argument("--count", type=int, default=25)
    args = ap.parse_args()
    return cli_main(["scale-table", "--model", args.model,
                     "--min", str(args.min), "--max", str(args.max),
                     "--count", str(args.count)])


if __name__ == "__main__":
    sys.exit(main())
