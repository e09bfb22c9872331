"""Risk tables over grids of confidence levels.

A table holds the VaR and CTE of a Pareto margin at each target level and,
for every dependence parameter, a block of CCTE values with rows indexed
by the target level ``s`` and columns by the associated level ``t``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .copulas import Family, make_copula
from .errors import DomainError
from .margins import ParetoMargin
from .risk import RiskQuery, ccte

DEFAULT_LEVELS = (0.9, 0.9225, 0.945, 0.9675, 0.99)
DEFAULT_ALPHA = 1.5


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("CCTE_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class TableSpec:
    family: Family
    thetas: tuple[float, ...]
    alpha: float = DEFAULT_ALPHA
    s_grid: tuple[float, ...] = DEFAULT_LEVELS
    t_grid: tuple[float, ...] = DEFAULT_LEVELS

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "thetas", tuple(float(x) for x in self.thetas))
        for name in ("s_grid", "t_grid"):
            grid = tuple(float(x) for x in getattr(self, name))
            if not grid:
                raise DomainError(f"{name} is empty")
            for x in grid:
                if not 0.0 < x < 1.0:
                    raise DomainError(f"{name} level {x!r} is outside (0, 1)")
            object.__setattr__(self, name, grid)
        if self.family is Family.PRODUCT and not self.thetas:
            object.__setattr__(self, "thetas", (0.0,))
        if not self.thetas:
            raise DomainError("at least one theta is required")
        # construct once so range errors surface before any work
        self.margin()
        for th in self.thetas:
            self.copula(th)

    def margin(self) -> ParetoMargin:
        return ParetoMargin(self.alpha)

    def copula(self, theta: float):
        return make_copula(self.family, None if self.family is Family.PRODUCT else theta)


@dataclass(frozen=True)
class RiskTable:
    spec: TableSpec
    var: np.ndarray
    cte: np.ndarray
    blocks: dict[float, np.ndarray] = field(default_factory=dict)

    def to_dict(self) -> dict:
        sp = self.spec
        return {
            "family": sp.family.value,
            "alpha": sp.alpha,
            "s_grid": list(sp.s_grid),
            "t_grid": list(sp.t_grid),
            "var": [float(x) for x in self.var],
            "cte": [float(x) for x in self.cte],
            "ccte": [
                {"theta": th, "rows_s_cols_t": [[float(x) for x in row] for row in block]}
                for th, block in self.blocks.items()
            ],
        }


def _map(fn, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def build_table(spec: TableSpec, workers: int | None = None) -> RiskTable:
    """Evaluate every grid cell; cells are independent and may run in a thread pool."""
    workers = workers or default_workers()
    margin = spec.margin()
    var = np.array([margin.var(s) for s in spec.s_grid])
    cte = np.array([margin.cte(s) for s in spec.s_grid])
    cells = [(th, s, t) for th in spec.thetas for s in spec.s_grid for t in spec.t_grid]
    copulas = {th: spec.copula(th) for th in spec.thetas}

    def one(cell):
        th, s, t = cell
        return ccte(copulas[th], margin, RiskQuery(s, t)).value

    values = iter(_map(one, cells, workers))
    ns, nt = len(spec.s_grid), len(spec.t_grid)
    blocks = {}
    for th in spec.thetas:
        blocks[th] = np.array([[next(values) for _ in range(nt)] for _ in range(ns)])
    return RiskTable(spec, var, cte, blocks)


def diagonal_levels(start: float = 0.9, stop: float = 0.99, step: float = 0.0025) -> list[float]:
    n = int(round((stop - start) / step))
    return [round(start + k * step, 10) for k in range(n + 1)]


def plot_rows(spec: TableSpec, levels: list[float] | None = None, workers: int | None = None) -> list[dict]:
    """Long-format rows ``(s, t, family, theta, measure, value)`` along the diagonal ``s = t``."""
    workers = workers or default_workers()
    levels = diagonal_levels() if levels is None else levels
    margin = spec.margin()
    fam = spec.family.value
    rows = []
    for lv in levels:
        rows.append({"s": lv, "t": lv, "family": fam, "theta": None, "measure": "VaR", "value": float(margin.var(lv))})
        rows.append({"s": lv, "t": lv, "family": fam, "theta": None, "measure": "CTE", "value": float(margin.cte(lv))})
    cells = [(th, lv) for th in spec.thetas for lv in levels]

    def one(cell):
        th, lv = cell
        return ccte(spec.copula(th), margin, RiskQuery(lv, lv)).value

    for (th, lv), value in zip(cells, _map(one, cells, workers)):
        rows.append({"s": lv, "t": lv, "family": fam, "theta": th, "measure": "CCTE", "value": value})
    return rows
