"""Rewrite a measurement CSV with arbitrary column names into the vlpcal schema.

Example:
    python3 tools/map_dataset.py raw.csv data/measurements.csv \
        --x X --y Y --rss LED1,LED2,LED3,LED4 --scale-xy 0.01
"""

import argparse
import csv
import sys


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("source")
    ap.add_argument("dest")
    ap.add_argument("--x", required=True, help="source column holding x")
    ap.add_argument("--y", required=True, help="source column holding y")
    ap.add_argument("--z", help="source column holding z (default: 0 for every row)")
    ap.add_argument("--id", help="source column holding the point id (default: row number)")
    ap.add_argument("--rss", required=True, help="comma-separated source columns, in LED order")
    ap.add_argument("--scale-xy", type=float, default=1.0, help="factor converting coordinates to meters")
    ap.add_argument("--delimiter", default=",")
    args = ap.parse_args(argv)

    rss_cols = [c.strip() for c in args.rss.split(",") if c.strip()]
    with open(args.source, newline="") as f:
        reader = csv.DictReader(f, delimiter=args.delimiter)
        wanted = [args.x, args.y] + rss_cols + [c for c in (args.z, args.id) if c]
        missing = [c for c in wanted if c not in (reader.fieldnames or [])]
        if missing:
            sys.exit(f"missing columns in {args.source}: {', '.join(missing)}")
        rows = list(reader)

    with open(args.dest, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["point_id", "x", "y", "z"] + [f"rss_{i}" for i in range(len(rss_cols))])
        for n, row in enumerate(rows, start=1):
            z = float(row[args.z]) * args.scale_xy if args.z else 0.0
            w.writerow(
                [row[args.id] if args.id else n,
                 repr(float(row[args.x]) * args.scale_xy),
                 repr(float(row[args.y]) * args.scale_xy),
                 repr(z)]
                + [repr(float(row[c])) for c in rss_cols]
            )
    print(f"wrote {len(rows)} records with {len(rss_cols)} RSS columns to {args.dest}")


if __name__ == "__main__":
    main()
