"""Command-line entry points for the analysis scripts."""

from __future__ import annotations

import argparse
import sys

from .reports import convergence_table, plot_curl_growth, stokes_report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="curlflow-analysis",
        description="post-process curlflow run directories")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curl-growth",
                       help="log-log curl norm plots with fitted slopes")
    p.add_argument("runs", nargs="+", help="run directories")
    p.add_argument("--out", default="figures", help="output directory")

    p = sub.add_parser("stokes",
                       help="overlay a snapshot against the erf profile")
    p.add_argument("snapshot", help="snapshot CSV file")
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--out", default="stokes_profile.png")

    p = sub.add_parser("convergence",
                       help="error table with observed orders")
    p.add_argument("rows", nargs="+",
                   help="h:L1:L2:Linf entries, coarsest first")
    p.add_argument("--out", default="convergence.csv")

    args = parser.parse_args(argv)
    if args.command == "curl-growth":
        slopes = plot_curl_growth(args.runs, args.out)
        for name, slope in slopes.items():
            print(f"{name}: slope {slope!r}")
    elif args.command == "stokes":
        stokes_report(args.snapshot, args.nu, args.t, out_path=args.out)
    elif args.command == "convergence":
        rows = [tuple(float(v) for v in r.split(":")) for r in args.rows]
        convergence_table(rows, out_path=args.out)
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
