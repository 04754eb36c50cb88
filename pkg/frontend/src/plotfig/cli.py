"""Command line: plot --csv PATH --figure {rho|power|feedback} --out PATH.

Exit codes: 0 success, 2 unreadable or mismatched input.
"""
from __future__ import annotations

import argparse
import sys

from .reader import SchemaError
from .render import figure_spec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render a sweep CSV as a figure")
    parser.add_argument("--csv", required=True, help="sweep CSV path")
    parser.add_argument("--figure", required=True,
                        choices=["rho", "power", "feedback"],
                        help="which sweep the CSV holds")
    parser.add_argument("--out", required=True,
                        help="output image path (.svg or .png)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        path = render(figure_spec(args.figure, args.csv, args.out))
    except SchemaError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
