"""Export the first 501 daily closes of R's EuStockMarkets as CSV.

Needs the ``rdatasets`` package (``pip install rdatasets``), which bundles
R's datasets collection. Usage::

    python scripts/fetch_eustock.py eustock.csv
"""

import argparse
import csv
import sys

N_ROWS = 501


def load(n_rows: int = N_ROWS):
    from rdatasets import data

    df = data("datasets", "EuStockMarkets")
    names = ["DAX", "SMI", "CAC", "FTSE"]
    return names, df[names].to_numpy()[:n_rows]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out", nargs="?", default="-")
    parser.add_argument("--rows", type=int, default=N_ROWS)
    args = parser.parse_args(argv)
    names, prices = load(args.rows)
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        w.writerows([repr(float(x)) for x in row] for row in prices)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
