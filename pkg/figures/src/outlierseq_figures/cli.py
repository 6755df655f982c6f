"""Command line entry: render one figure from a results CSV."""

import argparse
import sys
from pathlib import Path

from .render import FIGURE_IDS, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="outlierseq-figures",
        description="Render an error-rate or convergence figure from a simulation results CSV.",
    )
    parser.add_argument("figure_id", choices=FIGURE_IDS, help="which figure layout to draw")
    parser.add_argument("csv", help="results CSV written by the simulation harness")
    parser.add_argument("--out", required=True, help="output image path (.svg or .png)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = render(FigureSpec(args.figure_id, Path(args.csv), Path(args.out)))
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.out_path}: {len(result.series)} series")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
