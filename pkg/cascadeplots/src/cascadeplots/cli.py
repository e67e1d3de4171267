"""Command-line entry point: ``plot <kind> --in PATHS --out FILE [--truth v1,v2]``."""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureSpec, render


def _parse_truth(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render figures from cascade simulation CSV files."
    )
    parser.add_argument("kind", choices=KINDS, help="figure type to render")
    parser.add_argument(
        "--in", dest="inputs", nargs="+", required=True, metavar="PATH", help="input CSV files"
    )
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument(
        "--truth",
        type=_parse_truth,
        default=(),
        help="comma-separated true values, one per density panel",
    )
    parser.add_argument("--xlabel", default=None)
    parser.add_argument("--ylabel", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        inputs=tuple(args.inputs),
        out=args.out,
        truth=args.truth,
        xlabel=args.xlabel,
        ylabel=args.ylabel,
    )
    try:
        render(spec)
    except (ValueError, KeyError, OSError) as exc:
        message = exc.args[0] if exc.args else exc
        print(f"error: {message}", file=sys.stderr)
        return 1
    print(f"wrote {spec.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
