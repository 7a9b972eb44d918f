"""Command line for rendering ellipsorb artifacts.

    ellipsorb-plots spectrum out.png sweep_b4.csv sweep_b8.csv --column A
    ellipsorb-plots error out.png validate_b6.csv
    ellipsorb-plots layout out.png init_config.json final_config.json
    ellipsorb-plots convergence out.png history.csv

Exit codes: 0 success, 2 bad input (missing file or schema violation).
"""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, FigureSpec, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ellipsorb-plots",
                                     description="Render ellipsorb CSV/JSON artifacts")
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("output", help="output image path (png/svg by extension)")
    parser.add_argument("inputs", nargs="+", help="input CSV/JSON files")
    parser.add_argument("--label", action="append", default=[],
                        help="legend label (repeat per input)")
    parser.add_argument("--column", default="A",
                        help="spectrum column to plot (default A)")
    parser.add_argument("--title", default="")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(kind=args.kind, inputs=tuple(args.inputs), output=args.output,
                          labels=tuple(args.label), title=args.title, column=args.column)
        path = render(spec)
    except SchemaError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
