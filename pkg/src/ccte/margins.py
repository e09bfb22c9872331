"""Univariate loss distributions used as the target margin of a CCTE query.

Two conventions coexist for the Pareto margin. Its survival function
``(1 + x)**(-alpha)`` has quantile ``(1 - u)**(-1/alpha) - 1``
(:meth:`ParetoMargin.quantile`), whereas the reference risk tables use the
unit-scale type I form ``(1 - u)**(-1/alpha)``
(:meth:`ParetoMargin.quantile_unit_scale`). The risk measures use
:meth:`var`, which for the Pareto margin is the type I form. The two differ by a constant shift of one, so every tail mean
differs by exactly one as well.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DegenerateTailError, DomainError, TailSampleWarning

MIN_TAIL_SAMPLES = 5


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _levels(u, *, closed: bool) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    bad = (u < 0.0) | (u > 1.0) if closed else (u <= 0.0) | (u >= 1.0)
    if np.any(bad | ~np.isfinite(u)):
        interval = "[0, 1]" if closed else "(0, 1)"
        raise DomainError(f"probability level must lie in {interval}")
    return u


@dataclass(frozen=True)
class ParetoMargin:
    """Pareto (Lomax) loss with survival ``(1 + x)**(-alpha)``, ``alpha > 1``."""

    alpha: float

    def __post_init__(self):
        if not (self.alpha > 1.0 and math.isfinite(self.alpha)):
            raise DomainError(f"Pareto index must exceed 1 for a finite mean, got {self.alpha!r}")

    @property
    def tail_power(self) -> float:
        """Exponent ``p`` of the quantile singularity ``(1 - u)**(-p)``."""
        return 1.0 / self.alpha

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore"):
            return _out(np.where(x < 0.0, 0.0, -np.expm1(-self.alpha * np.log1p(np.maximum(x, 0.0)))))

    def quantile(self, u):
        """Exact inverse of :meth:`cdf`: ``(1 - u)**(-1/alpha) - 1``."""
        u = _levels(u, closed=False)
        return _out(np.expm1(-np.log1p(-u) / self.alpha))

    def quantile_unit_scale(self, u):
        """Type I quantile with unit scale, ``(1 - u)**(-1/alpha)``."""
        u = _levels(u, closed=False)
        return _out((1.0 - u) ** (-1.0 / self.alpha))

    def var(self, u):
        return self.quantile_unit_scale(u)

    def var_tail(self, r):
        """:meth:`var` at ``u = 1 - r``."""
        return np.asarray(r, dtype=float) ** (-1.0 / self.alpha)

    def cte(self, s):
        """Tail mean of :meth:`var` above level ``s``: ``alpha (1-s)^(-1/alpha) / (alpha - 1)``."""
        s = _levels(s, closed=False)
        a = self.alpha
        return _out(a * (1.0 - s) ** (-1.0 / a) / (a - 1.0))

    def mean(self) -> float:
        """``int_0^1 var(u) du = alpha / (alpha - 1)``."""
        return self.alpha / (self.alpha - 1.0)


@dataclass(frozen=True)
class EmpiricalMargin:
    """Empirical distribution of an observed sample (type-1 inverse CDF).

    The quantile is ``inf{x_(i) : i/n >= u}``, a step function taking value
    ``x_(i)`` on ``((i-1)/n, i/n]``.
    """

    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        x = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if x.size < 2:
            raise DomainError("empirical margin needs at least two observations")
        if not np.all(np.isfinite(x)):
            raise DomainError("empirical margin contains non-finite observations")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    def __repr__(self) -> str:
        return f"EmpiricalMargin(n={self.n})"

    def __eq__(self, other) -> bool:
        return isinstance(other, EmpiricalMargin) and np.array_equal(self.samples, other.samples)

    def __hash__(self) -> int:
        return hash(self.samples.tobytes())

    @property
    def n(self) -> int:
        return int(self.samples.size)

    def breakpoints(self) -> np.ndarray:
        """Levels ``0, 1/n, ..., 1`` delimiting the quantile steps."""
        return np.arange(self.n + 1) / self.n

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.searchsorted(self.samples, x, side="right") / self.n)

    def _index(self, u: np.ndarray) -> np.ndarray:
        # smallest i with i/n >= u, as a 0-based index; guard float noise in u*n
        i = np.ceil(u * self.n - 1e-9).astype(int)
        return np.clip(i, 1, self.n) - 1

    def quantile(self, u):
        u = _levels(u, closed=True)
        return _out(self.samples[self._index(u)])

    def var(self, u):
        return self.quantile(u)

    def cte(self, s):
        """``1/(1-s) int_s^1 quantile(u) du``, computed exactly over the steps.

        Raises ``DegenerateTailError`` when no observation exceeds the
        ``s``-quantile and warns when fewer than five do.
        """
        s = float(_levels(s, closed=False))
        threshold = float(self.quantile(s))
        n_above = int(self.n - np.searchsorted(self.samples, threshold, side="right"))
        if n_above == 0:
            raise DegenerateTailError(
                f"no observation exceeds the {s}-quantile {threshold!r} (n={self.n})"
            )
        if n_above < MIN_TAIL_SAMPLES:
            warnings.warn(
                f"empirical CTE at level {s} rests on {n_above} exceedances",
                TailSampleWarning,
                stacklevel=2,
            )
        return self.step_integral(s) / (1.0 - s)

    def step_integral(self, s: float, weight=None) -> float:
        """``int_s^1 quantile(u) w(u) du`` where ``weight(lo, hi)`` integrates ``w`` over a step.

        With ``weight=None`` the weight is one and the integral is exact.
        """
        edges = self.breakpoints()
        first = int(self._index(np.array(s)))  # step containing s (or starting at it)
        lo = np.maximum(edges[first:-1], s)
        hi = edges[first + 1:]
        x = self.samples[first:]
        keep = hi > lo
        lo, hi, x = lo[keep], hi[keep], x[keep]
        if weight is None:
            w = hi - lo
        else:
            w = np.array([weight(a, b) for a, b in zip(lo, hi)])
        return math.fsum(x * w)

    def mean(self) -> float:
        return float(np.mean(self.samples))


Margin = Union[ParetoMargin, EmpiricalMargin]
