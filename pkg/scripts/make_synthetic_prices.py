"""Write the synthetic price fixture used by the fitting tests.

Three series over 501 days: A and B share a Gumbel(2) copula on their daily
returns, C is independent of both. Returns have Student-t(4) margins.
"""

import csv
import sys

import numpy as np
from scipy import stats

from ccte.copulas import GumbelCopula
from ccte.montecarlo import sample_pairs

SEED = 20240501
N_DAYS = 501


def build(seed: int = SEED, n_days: int = N_DAYS) -> np.ndarray:
    rng = np.random.default_rng(seed)
    u, v = sample_pairs(GumbelCopula(2.0), n_days - 1, rng)
    w = rng.random(n_days - 1)
    ret = 0.01 * stats.t.ppf(np.column_stack([u, v, w]), df=4)
    start = np.array([100.0, 250.0, 40.0])
    return start * np.exp(np.vstack([np.zeros(3), np.cumsum(ret, axis=0)]))


def main(path: str) -> None:
    prices = build()
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["date", "A", "B", "C"])
        for k, row in enumerate(prices):
            out.writerow([f"day{k:03d}"] + [f"{x:.8f}" for x in row])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data/synthetic_prices.csv")
