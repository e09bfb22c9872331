"""Rank-based dependence fitting for panels of return series.

Prices are read from a comma-separated file (header row of series names,
optional leading ``date`` column), turned into log returns, and each pair
of series gets a one-parameter copula by inverting Kendall's tau.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import kendalltau

from .copulas import Family, make_copula
from .errors import DomainError, IngestionError
from .margins import EmpiricalMargin, Margin
from .risk import RiskQuery, ccte

MIN_OBSERVATIONS = 10
FITTABLE = (Family.FGM, Family.GUMBEL, Family.CLAYTON)
TAU_VARIANTS = ("a", "b")
# daily closes repeat often enough that returns carry ties; tau-b is what
# standard statistical software reports for such panels
PANEL_TAU_VARIANT = "b"


@dataclass(frozen=True)
class ReturnsPanel:
    """Named log-return series, one column per series."""

    names: tuple[str, ...]
    returns: np.ndarray = field(repr=False)

    def __post_init__(self):
        r = np.array(self.returns, dtype=float)
        if r.ndim != 2:
            raise DomainError("returns must be a 2-d array (observations x series)")
        if r.shape[0] < MIN_OBSERVATIONS:
            raise DomainError(f"need at least {MIN_OBSERVATIONS} observations, got {r.shape[0]}")
        if r.shape[1] != len(self.names):
            raise DomainError(f"{len(self.names)} names for {r.shape[1]} series")
        if len(set(self.names)) != len(self.names):
            raise DomainError("series names must be unique")
        if not np.all(np.isfinite(r)):
            raise DomainError("returns contain non-finite values")
        r.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "returns", r)

    @property
    def n_obs(self) -> int:
        return self.returns.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.returns[:, self.names.index(name)]


@dataclass(frozen=True)
class PairMatrix:
    """Symmetric or asymmetric matrix indexed by series names.

    ``family`` is set for fitted-parameter matrices, ``None`` for tau
    and CCTE matrices.
    """

    names: tuple[str, ...]
    values: np.ndarray = field(repr=False)
    family: Family | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, key: tuple[str, str]) -> float:
        i, j = (self.names.index(k) for k in key)
        return float(self.values[i, j])

    def to_dict(self) -> dict:
        # JSON has no inf/nan; diagonals become null
        rows = [[float(x) if math.isfinite(x) else None for x in row] for row in self.values]
        out = {"names": list(self.names), "values": rows}
        if self.family is not None:
            out["family"] = self.family.value
        return out


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


def _parse_rows(lines, source: str) -> tuple[tuple[str, ...], np.ndarray]:
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestionError(f"{source} is empty", line=1) from None
    header = [h.strip() for h in header]
    skip_first = bool(header) and header[0].lower() == "date"
    names = header[1:] if skip_first else header
    if not names or any(not n for n in names):
        raise IngestionError("header must name every series", line=1)
    if len(set(names)) != len(names):
        raise IngestionError("duplicate series names in header", line=1)

    rows = []
    for record in reader:
        line = reader.line_num
        if not record or all(not c.strip() for c in record):
            continue
        if len(record) != len(header):
            raise IngestionError(f"expected {len(header)} fields, found {len(record)}", line=line)
        cells = record[1:] if skip_first else record
        try:
            values = [float(c) for c in cells]
        except ValueError:
            bad = next(c for c in cells if not _is_float(c))
            raise IngestionError(f"not a number: {bad!r}", line=line) from None
        if not all(math.isfinite(x) for x in values):
            raise IngestionError("non-finite value", line=line)
        rows.append(values)
    if not rows:
        raise IngestionError(f"{source} has no data rows", line=2)
    return tuple(names), np.array(rows, dtype=float)


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_series_csv(path: str | Path) -> tuple[tuple[str, ...], np.ndarray]:
    """Read a comma-separated table of numbers with a header row of names.

    A first column named ``date`` (any case) is skipped. Errors carry the
    1-based line number of the offending record.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            return _parse_rows(fh, str(path))
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc


def log_returns(prices, names: Sequence[str]) -> ReturnsPanel:
    """``r[t, j] = ln(p[t+1, j] / p[t, j])``; one row fewer than ``prices``."""
    p = np.asarray(prices, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    bad = np.argwhere(~(p > 0.0))
    if bad.size:
        row, col = bad[0]
        # data rows start on line 2 of a file with a header
        raise IngestionError(
            f"price must be positive in series {names[col]!r} at row {row}, got {p[row, col]!r}",
            line=int(row) + 2,
        )
    if p.shape[0] < MIN_OBSERVATIONS + 1:
        raise IngestionError(f"need at least {MIN_OBSERVATIONS + 1} price rows, got {p.shape[0]}")
    return ReturnsPanel(tuple(names), np.diff(np.log(p), axis=0))


def load_panel(path: str | Path, kind: str = "prices") -> ReturnsPanel:
    """Read a CSV of prices (converted to log returns) or of returns (used as is)."""
    names, data = read_series_csv(path)
    if kind == "prices":
        return log_returns(data, names)
    if kind == "returns":
        try:
            return ReturnsPanel(names, data)
        except DomainError as exc:
            raise IngestionError(str(exc)) from exc
    raise DomainError(f"input kind must be 'prices' or 'returns', got {kind!r}")


# ---------------------------------------------------------------------------
# Kendall's tau and its inversion
# ---------------------------------------------------------------------------


def _tied_pairs(x: np.ndarray) -> int:
    _, counts = np.unique(x, return_counts=True)
    return int(np.sum(counts * (counts - 1) // 2))


def kendall_tau_sample(x, y, variant: str = "a") -> float:
    """Sample Kendall tau.

    ``variant="a"``: ``(concordant - discordant) / (n (n - 1) / 2)``, tied
    pairs counting as neither. ``variant="b"`` divides instead by
    ``sqrt((n0 - ties_x)(n0 - ties_y))``, the convention of R's
    ``cor(method = "kendall")``; the two coincide without ties. Both come
    from SciPy's O(n log n) tau-b.
    """
    if variant not in TAU_VARIANTS:
        raise DomainError(f"tau variant must be one of {TAU_VARIANTS}, got {variant!r}")
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise DomainError(f"series lengths differ: {x.size} vs {y.size}")
    if x.size < 2:
        raise DomainError("need at least two observations")
    n0 = x.size * (x.size - 1) // 2
    nx, ny = _tied_pairs(x), _tied_pairs(y)
    if nx == n0 or ny == n0:
        return 0.0
    tau_b = float(kendalltau(x, y, variant="b").statistic)
    # S = C - D is an integer; rounding removes the sqrt round trip noise
    norm = math.sqrt((n0 - nx) * (n0 - ny))
    s = round(tau_b * norm)
    if variant == "b":
        return s / norm
    return s / n0


_TAU_RANGE = {
    Family.GUMBEL: (0.0, 1.0, True, False),
    Family.CLAYTON: (0.0, 1.0, False, False),
    Family.FGM: (-2.0 / 9.0, 2.0 / 9.0, True, True),
}


def _family(family) -> Family:
    fam = Family(family)
    if fam not in FITTABLE:
        raise DomainError(f"no tau inversion for family {fam.value!r}")
    return fam


def tau_in_range(family, tau: float) -> bool:
    lo, hi, lo_closed, hi_closed = _TAU_RANGE[_family(family)]
    above = tau >= lo if lo_closed else tau > lo
    below = tau <= hi if hi_closed else tau < hi
    return bool(above and below)


def _range_text(family: Family) -> str:
    lo, hi, lo_closed, hi_closed = _TAU_RANGE[family]
    return f"{'[' if lo_closed else '('}{lo:.6g}, {hi:.6g}{']' if hi_closed else ')'}"


def tau_to_theta(family, tau: float) -> float:
    """Copula parameter with the given Kendall tau.

    Gumbel ``1 / (1 - tau)``, Clayton ``2 tau / (1 - tau)``, FGM ``9 tau / 2``.
    """
    fam = _family(family)
    tau = float(tau)
    if not tau_in_range(fam, tau):
        raise DomainError(
            f"Kendall tau {tau:.6g} is outside the {fam.value} range {_range_text(fam)}"
        )
    if fam is Family.GUMBEL:
        return 1.0 / (1.0 - tau)
    if fam is Family.CLAYTON:
        return 2.0 * tau / (1.0 - tau)
    return 4.5 * tau


def theta_to_tau(family, theta: float) -> float:
    fam = _family(family)
    return make_copula(fam, theta).kendall_tau()


# ---------------------------------------------------------------------------
# pairwise matrices
# ---------------------------------------------------------------------------


def _pairs(n: int):
    return list(itertools.combinations(range(n), 2))


def tau_matrix(panel: ReturnsPanel, variant: str = PANEL_TAU_VARIANT) -> PairMatrix:
    k = len(panel.names)
    tau = np.eye(k)
    for i, j in _pairs(k):
        tau[i, j] = tau[j, i] = kendall_tau_sample(panel.returns[:, i], panel.returns[:, j], variant)
    return PairMatrix(panel.names, tau)


def fit_pairwise(
    panel: ReturnsPanel, family, variant: str = PANEL_TAU_VARIANT
) -> tuple[PairMatrix, PairMatrix]:
    """Tau matrix and tau-inverted parameter matrix (diagonal ``inf``).

    Raises ``DomainError`` listing every pair whose tau the family cannot attain.
    """
    fam = _family(family)
    taus = tau_matrix(panel, variant)
    k = len(panel.names)
    bad = [
        f"{panel.names[i]}-{panel.names[j]} (tau={taus.values[i, j]:.4f})"
        for i, j in _pairs(k)
        if not tau_in_range(fam, taus.values[i, j])
    ]
    if bad:
        raise DomainError(
            f"tau outside the {fam.value} range {_range_text(fam)} for: " + ", ".join(bad)
        )
    theta = np.full((k, k), np.inf)
    for i, j in _pairs(k):
        theta[i, j] = theta[j, i] = tau_to_theta(fam, taus.values[i, j])
    return taus, PairMatrix(panel.names, theta, fam)


def ccte_matrix(
    panel: ReturnsPanel,
    thetas: PairMatrix,
    query: RiskQuery,
    margins: Sequence[Margin] | None = None,
    *,
    workers: int = 1,
) -> PairMatrix:
    """CCTE of target ``i`` (row) given associate ``j`` (column) under the fitted pair copula.

    Margins default to the empirical distribution of each series. The
    diagonal is ``nan``.
    """
    if thetas.family is None:
        raise DomainError("parameter matrix carries no family")
    k = len(panel.names)
    if margins is None:
        margins = [EmpiricalMargin(panel.returns[:, i]) for i in range(k)]
    if len(margins) != k:
        raise DomainError(f"{len(margins)} margins for {k} series")

    cells = [(i, j) for i in range(k) for j in range(k) if i != j]

    def one(cell):
        i, j = cell
        cop = make_copula(thetas.family, thetas.values[i, j])
        return ccte(cop, margins[i], query).value

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = list(pool.map(one, cells))
    else:
        values = [one(c) for c in cells]
    out = np.full((k, k), np.nan)
    for (i, j), v in zip(cells, values):
        out[i, j] = v
    return PairMatrix(panel.names, out)


def least_risky_associates(matrix: PairMatrix) -> list[tuple[str, str]]:
    """``(target, associate)`` with the smallest off-diagonal entry in each row."""
    out = []
    for i, name in enumerate(matrix.names):
        row = np.array(matrix.values[i], dtype=float)
        row[i] = np.inf
        out.append((name, matrix.names[int(np.argmin(row))]))
    return out
