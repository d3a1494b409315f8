"""Command-line figure renderer: ``homctl-figures KIND --in CSV... --out PNG``."""

import argparse
import sys

from .render import (FigureSpec, RenderError, render_certificate,
                     render_comparison, render_control, render_trajectory)

RENDERERS = {
    "trajectory": render_trajectory,
    "control": render_control,
    "certificate": render_certificate,
    "comparison": render_comparison,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="homctl-figures",
        description="Render homctl CSV outputs to PNG figures")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in RENDERERS:
        p = sub.add_parser(kind)
        p.add_argument("--in", dest="inputs", nargs="+", required=True,
                       help="input CSV path(s)")
        p.add_argument("--out", dest="output", required=True,
                       help="output PNG path")
        p.add_argument("--title", default="")
        p.add_argument("--panel-titles", nargs="*", default=())
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    spec = FigureSpec(inputs=tuple(args.inputs), kind=args.kind,
                      output=args.output, title=args.title,
                      panel_titles=tuple(args.panel_titles))
    try:
        out = RENDERERS[args.kind](spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
