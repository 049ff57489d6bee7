"""plotkit command line: render buschain CSVs into figures."""
from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plotkit")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render a CSV into a figure")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="input_csv", required=True)
    p.add_argument("--out", dest="output_image", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(input_csv=args.input_csv, kind=args.kind,
                          output_image=args.output_image)
        render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
