"""Figure CLI: `plots errgap <csv...>` and `plots traj <csv>`."""

from __future__ import annotations

import argparse
import sys

from .figures import PlotJob, SchemaError, UnsupportedDimension, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plots", description="Render experiment CSVs to figures")
    sub = parser.add_subparsers(dest="command", required=True)

    err = sub.add_parser("errgap", help="log-scale error-gap curves, one per CSV")
    err.add_argument("csvs", nargs="+", help="trajectory CSVs with t,err_gap columns")
    err.add_argument("--labels", nargs="+", help="legend labels, one per CSV")
    err.add_argument("--out", required=True, help="output image path")

    traj = sub.add_parser("traj", help="per-cluster 2-D action traces")
    traj.add_argument("csv", help="run CSV written with --log-positions")
    traj.add_argument("--meta", help="metadata sidecar (derived from the CSV name by default)")
    traj.add_argument("--out", required=True, help="output image path")

    args = parser.parse_args(argv)
    try:
        if args.command == "errgap":
            job = PlotJob(tuple(args.csvs), "errgap", args.out, labels=args.labels and tuple(args.labels))
        else:
            job = PlotJob((args.csv,), "trajectories", args.out, meta=args.meta)
        render(job)
    except (SchemaError, UnsupportedDimension, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
