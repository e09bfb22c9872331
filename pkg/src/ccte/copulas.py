"""Bivariate copula families and the generic Archimedean construction.

Every model is an immutable object exposing the CDF ``C(u, v)``, the first
partial derivative ``C_u = dC/du``, the survival value
``Cbar(a, b) = a + b - 1 + C(1 - a, 1 - b)``, tail-dependence coefficients
and the model Kendall's tau. All methods accept scalars or numpy arrays
and broadcast.

Methods with a ``_tail`` suffix take ``r = 1 - u`` instead of ``u``. They
exist because the risk integrals concentrate near ``u = 1`` where ``u``
itself cannot resolve ``1 - u`` below machine epsilon.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import DomainError, NumericError
from .quadrature import integrate

ArrayLike = float | np.ndarray

CLAMP_EPS = 1e-12
TAU_QUAD_TOL = 1e-10


class Family(str, Enum):
    PRODUCT = "product"
    FGM = "fgm"
    GUMBEL = "gumbel"
    CLAYTON = "clayton"
    GENERATOR = "generator"


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _unit(name: str, x, *, open_left=False, open_right=False) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    lo_bad = x <= 0.0 if open_left else x < 0.0
    hi_bad = x >= 1.0 if open_right else x > 1.0
    if np.any(lo_bad | hi_bad | ~np.isfinite(x)):
        lo = "(" if open_left else "["
        hi = ")" if open_right else "]"
        raise DomainError(f"{name} must lie in {lo}0, 1{hi}")
    return x


def _clamp_unit(x: np.ndarray, what: str) -> np.ndarray:
    if np.any(x < -CLAMP_EPS) or np.any(x > 1.0 + CLAMP_EPS):
        worst = x[(x < -CLAMP_EPS) | (x > 1.0 + CLAMP_EPS)].ravel()[0]
        raise NumericError(f"{what} left [0, 1] by more than rounding: {worst!r}")
    return np.clip(x, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Archimedean generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArchimedeanGenerator:
    """Generator triple ``(psi, psi', psi^{-1})`` of an Archimedean copula.

    The optional ``*_tail`` callables evaluate the same functions in terms of
    the distance to one: ``psi_tail(r) = psi(1 - r)``,
    ``psi_prime_tail(r) = psi'(1 - r)`` and
    ``psi_inverse_tail(x) = 1 - psi^{-1}(x)``. When omitted they fall back to
    the plain functions, which is accurate unless ``r`` is near epsilon.
    """

    psi: Callable[[np.ndarray], np.ndarray]
    psi_prime: Callable[[np.ndarray], np.ndarray]
    psi_inverse: Callable[[np.ndarray], np.ndarray]
    strict: bool = True
    name: str = "custom"
    psi_tail: Callable | None = field(default=None, repr=False)
    psi_prime_tail: Callable | None = field(default=None, repr=False)
    psi_inverse_tail: Callable | None = field(default=None, repr=False)

    def at_tail(self, r):
        if self.psi_tail is not None:
            return self.psi_tail(r)
        return self.psi(1.0 - r)

    def prime_at_tail(self, r):
        if self.psi_prime_tail is not None:
            return self.psi_prime_tail(r)
        return self.psi_prime(1.0 - r)

    def inverse_tail(self, x):
        if self.psi_inverse_tail is not None:
            return self.psi_inverse_tail(x)
        return 1.0 - self.psi_inverse(x)

    def pseudo_inverse(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            if self.strict:
                return self.psi_inverse(x)
            psi0 = float(self.psi(np.array(0.0)))
            return np.where(x >= psi0, 0.0, self.psi_inverse(np.minimum(x, psi0)))

    def validate(self, n_grid: int = 99) -> None:
        """Check the generator axioms on a grid; raise ``DomainError`` on failure."""
        t = np.linspace(0.01, 0.99, n_grid)
        with np.errstate(all="ignore"):
            psi = np.asarray(self.psi(t), dtype=float)
            one = float(self.psi(np.array(1.0)))
            back = np.asarray(self.psi_inverse(psi), dtype=float)
            psi0 = float(self.psi(np.array(0.0)))
        if abs(one) > 1e-14:
            raise DomainError(f"generator {self.name}: psi(1) = {one!r}, expected 0")
        if np.any(np.diff(psi) >= 0):
            raise DomainError(f"generator {self.name}: psi is not strictly decreasing")
        second = psi[:-2] - 2.0 * psi[1:-1] + psi[2:]
        if np.any(second < -1e-12 * np.maximum(1.0, np.abs(psi[1:-1]))):
            raise DomainError(f"generator {self.name}: psi is not convex")
        if np.max(np.abs(back - t)) > 1e-12:
            raise DomainError(f"generator {self.name}: psi^-1(psi(t)) != t")
        if self.strict != (psi0 == math.inf):
            raise DomainError(
                f"generator {self.name}: strict={self.strict} but psi(0)={psi0!r}"
            )


def gumbel_generator(theta: float) -> ArchimedeanGenerator:
    """``psi(t) = (-ln t)**theta``."""
    th = float(theta)

    def psi(t):
        return (-np.log(t)) ** th

    def psi_prime(t):
        return -th * (-np.log(t)) ** (th - 1.0) / t

    def psi_inverse(x):
        return np.exp(-(x ** (1.0 / th)))

    def psi_tail(r):
        return (-np.log1p(-r)) ** th

    def psi_prime_tail(r):
        return -th * (-np.log1p(-r)) ** (th - 1.0) / (1.0 - r)

    def psi_inverse_tail(x):
        return -np.expm1(-(x ** (1.0 / th)))

    return ArchimedeanGenerator(
        psi, psi_prime, psi_inverse, strict=True, name=f"gumbel({th:g})",
        psi_tail=psi_tail, psi_prime_tail=psi_prime_tail, psi_inverse_tail=psi_inverse_tail,
    )


def clayton_generator(theta: float) -> ArchimedeanGenerator:
    """``psi(t) = (t**(-theta) - 1) / theta`` for ``theta > 0``."""
    th = float(theta)

    def psi(t):
        return (t ** (-th) - 1.0) / th

    def psi_prime(t):
        return -(t ** (-th - 1.0))

    def psi_inverse(x):
        return (1.0 + th * x) ** (-1.0 / th)

    def psi_tail(r):
        return np.expm1(-th * np.log1p(-r)) / th

    def psi_prime_tail(r):
        return -np.exp(-(th + 1.0) * np.log1p(-r))

    def psi_inverse_tail(x):
        return -np.expm1(-np.log1p(th * x) / th)

    return ArchimedeanGenerator(
        psi, psi_prime, psi_inverse, strict=True, name=f"clayton({th:g})",
        psi_tail=psi_tail, psi_prime_tail=psi_prime_tail, psi_inverse_tail=psi_inverse_tail,
    )


# ---------------------------------------------------------------------------
# Copula models
# ---------------------------------------------------------------------------


class CopulaModel(ABC):
    """Parametric bivariate copula. Instances are immutable."""

    family: Family
    theta: float | None = None
    # families whose C_u is singular or undefined at u in {0, 1}
    _open_du = False

    def __setattr__(self, name, value):
        if getattr(self, "_frozen", False):
            raise AttributeError(f"{type(self).__name__} is immutable")
        object.__setattr__(self, name, value)

    def _freeze(self):
        object.__setattr__(self, "_frozen", True)

    def __repr__(self) -> str:
        if self.theta is None:
            return f"{type(self).__name__}()"
        return f"{type(self).__name__}(theta={self.theta!r})"

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.theta == other.theta

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.theta))

    @property
    def generator(self) -> ArchimedeanGenerator | None:
        return None

    @property
    def is_pqd(self) -> bool:
        """Whether ``C(u, v) >= uv`` everywhere."""
        return False

    # -- public API ---------------------------------------------------------

    def cdf(self, u: ArrayLike, v: ArrayLike) -> ArrayLike:
        """Copula value ``C(u, v)``."""
        u = _unit("u", u)
        v = _unit("v", v)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            c = self._cdf(u, v)
        return _out(c)

    def du(self, u: ArrayLike, v: ArrayLike) -> ArrayLike:
        """Partial derivative ``dC/du`` at ``(u, v)``."""
        u = _unit("u", u, open_left=self._open_du, open_right=self._open_du)
        v = _unit("v", v)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            d = self._du(u, v)
        return _out(_clamp_unit(np.asarray(d, dtype=float), "C_u"))

    def du_tail(self, r: ArrayLike, v: ArrayLike) -> ArrayLike:
        """``dC/du`` evaluated at ``u = 1 - r``, accurate for tiny ``r``."""
        r = _unit("r", r, open_left=self._open_du, open_right=self._open_du)
        v = _unit("v", v)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            d = self._du_tail(r, v)
        return _out(_clamp_unit(np.asarray(d, dtype=float), "C_u"))

    def survival(self, a: ArrayLike, b: ArrayLike) -> ArrayLike:
        """Survival copula ``Cbar(a, b) = a + b - 1 + C(1 - a, 1 - b)``.

        With ``a = 1 - s`` and ``b = 1 - t`` this is the joint exceedance
        probability ``P(U > s, V > t)``.
        """
        a = _unit("a", a)
        b = _unit("b", b)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            val = self._survival(a, b)
        return _out(val)

    def joint_exceedance(self, s: ArrayLike, t: ArrayLike) -> ArrayLike:
        """``P(U > s, V > t) = 1 - s - t + C(s, t)``."""
        s = _unit("s", s)
        t = _unit("t", t)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            val = self._survival(1.0 - s, 1.0 - t)
        return _out(val)

    @abstractmethod
    def tail_dependence_upper(self) -> float: ...

    @abstractmethod
    def tail_dependence_lower(self) -> float: ...

    @abstractmethod
    def kendall_tau(self) -> float: ...

    # -- family hooks -------------------------------------------------------

    @abstractmethod
    def _cdf(self, u, v): ...

    @abstractmethod
    def _du(self, u, v): ...

    def _du_tail(self, r, v):
        return self._du(1.0 - r, v)

    def _survival(self, a, b):
        # families override this where a + b - 1 + C cancels badly near (1, 1)
        return a + b - 1.0 + self._cdf(1.0 - a, 1.0 - b)


class ProductCopula(CopulaModel):
    """Independence copula ``C(u, v) = uv``."""

    family = Family.PRODUCT

    def __init__(self):
        self._freeze()

    def _cdf(self, u, v):
        return u * v

    def _du(self, u, v):
        return np.broadcast_arrays(u, v)[1] * 1.0

    def _survival(self, a, b):
        return a * b

    def tail_dependence_upper(self) -> float:
        return 0.0

    def tail_dependence_lower(self) -> float:
        return 0.0

    def kendall_tau(self) -> float:
        return 0.0


class FGMCopula(CopulaModel):
    """Farlie-Gumbel-Morgenstern copula ``uv + theta uv(1-u)(1-v)``, ``theta in [-1, 1]``."""

    family = Family.FGM

    def __init__(self, theta: float):
        theta = float(theta)
        if not -1.0 <= theta <= 1.0:
            raise DomainError(f"FGM theta must lie in [-1, 1], got {theta!r}")
        self.theta = theta
        self._freeze()

    @property
    def is_pqd(self) -> bool:
        return self.theta >= 0.0

    def _cdf(self, u, v):
        return u * v * (1.0 + self.theta * (1.0 - u) * (1.0 - v))

    def _du(self, u, v):
        return v + self.theta * v * (1.0 - v) * (1.0 - 2.0 * u)

    def _du_tail(self, r, v):
        return v + self.theta * v * (1.0 - v) * (2.0 * r - 1.0)

    def _survival(self, a, b):
        return a * b * (1.0 + self.theta * (1.0 - a) * (1.0 - b))

    def tail_dependence_upper(self) -> float:
        return 0.0

    def tail_dependence_lower(self) -> float:
        return 0.0

    def kendall_tau(self) -> float:
        return 2.0 * self.theta / 9.0


class GumbelCopula(CopulaModel):
    """Gumbel-Hougaard copula ``exp(-[(-ln u)^theta + (-ln v)^theta]^(1/theta))``, ``theta >= 1``.

    ``C(u, 0) = C(0, v) = 0`` by continuity.
    """

    family = Family.GUMBEL
    _open_du = True

    def __init__(self, theta: float):
        theta = float(theta)
        if not (theta >= 1.0 and math.isfinite(theta)):
            raise DomainError(f"Gumbel theta must lie in [1, inf), got {theta!r}")
        self.theta = theta
        self._freeze()

    @property
    def generator(self) -> ArchimedeanGenerator:
        return gumbel_generator(self.theta)

    @property
    def is_pqd(self) -> bool:
        return True

    def _z(self, x, y):
        # (x^th + y^th)^(1/th) without overflow for large x, y
        th = self.theta
        hi = np.maximum(x, y)
        lo = np.minimum(x, y)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(hi > 0, lo / np.where(hi > 0, hi, 1.0), 0.0)
            z = hi * (1.0 + ratio**th) ** (1.0 / th)
        return np.where(np.isinf(hi), np.inf, z)

    def _cdf(self, u, v):
        x = -np.log(u)
        y = -np.log(v)
        return np.exp(-self._z(x, y))

    def _survival(self, a, b):
        return a + b + np.expm1(-self._z(-np.log1p(-a), -np.log1p(-b)))

    def _du_from_x(self, x, v):
        # C_u = exp(x - z) * (x / z)^(th - 1), with x = -ln u
        th = self.theta
        y = -np.log(v)
        x, y = np.broadcast_arrays(x, y)
        z = self._z(x, y)
        if th == 1.0:
            return np.exp(-y) * np.ones_like(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_ratio = np.log(x) - np.log(z)
            d = np.exp(x - z + (th - 1.0) * log_ratio)
        d = np.where(np.isinf(y), 0.0, d)   # v = 0
        d = np.where(y == 0.0, 1.0, d)      # v = 1
        return d

    def _du(self, u, v):
        return self._du_from_x(-np.log(u), v)

    def _du_tail(self, r, v):
        return self._du_from_x(-np.log1p(-r), v)

    def tail_dependence_upper(self) -> float:
        return 2.0 - 2.0 ** (1.0 / self.theta)

    def tail_dependence_lower(self) -> float:
        return 0.0

    def kendall_tau(self) -> float:
        return (self.theta - 1.0) / self.theta


class ClaytonCopula(CopulaModel):
    """Clayton copula ``(u^-theta + v^-theta - 1)^(-1/theta)`` for ``theta > 0``."""

    family = Family.CLAYTON
    _open_du = True

    def __init__(self, theta: float):
        theta = float(theta)
        if not (theta > 0.0 and math.isfinite(theta)):
            raise DomainError(f"Clayton theta must lie in (0, inf), got {theta!r}")
        self.theta = theta
        self._freeze()

    @property
    def generator(self) -> ArchimedeanGenerator:
        return clayton_generator(self.theta)

    @property
    def is_pqd(self) -> bool:
        return True

    @staticmethod
    def _log_sum(a, b):
        # log(e^a + e^b - 1) for a, b >= 0 without overflow at large theta
        hi, lo = np.maximum(a, b), np.minimum(a, b)
        with np.errstate(invalid="ignore"):
            out = hi + np.log1p(-np.expm1(-lo) * np.exp(lo - hi))
        return np.where(np.isinf(hi), np.inf, out)

    def _cdf(self, u, v):
        th = self.theta
        return np.exp(-self._log_sum(-th * np.log(u), -th * np.log(v)) / th)

    def _du_log(self, log_u, v):
        th = self.theta
        log_s = self._log_sum(-th * log_u, -th * np.log(v))
        return np.exp(-(th + 1.0) * log_u - (1.0 / th + 1.0) * log_s)

    def _survival(self, a, b):
        th = self.theta
        return a + b + np.expm1(-self._log_sum(-th * np.log1p(-a), -th * np.log1p(-b)) / th)

    def _du(self, u, v):
        return self._du_log(np.log(u), v)

    def _du_tail(self, r, v):
        return self._du_log(np.log1p(-r), v)

    def tail_dependence_upper(self) -> float:
        return 0.0

    def tail_dependence_lower(self) -> float:
        return 2.0 ** (-1.0 / self.theta)

    def kendall_tau(self) -> float:
        return self.theta / (self.theta + 2.0)


class ArchimedeanCopula(CopulaModel):
    """Copula defined by a generator: ``C(u, v) = psi^[-1](psi(u) + psi(v))``."""

    family = Family.GENERATOR
    _open_du = True

    def __init__(self, generator: ArchimedeanGenerator, *, validate: bool = True):
        if validate:
            generator.validate()
        self._generator = generator
        self._freeze()

    def __repr__(self) -> str:
        return f"ArchimedeanCopula({self._generator.name})"

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self._generator is other._generator

    def __hash__(self) -> int:
        return id(self._generator)

    @property
    def generator(self) -> ArchimedeanGenerator:
        return self._generator

    def _cdf(self, u, v):
        g = self._generator
        return g.pseudo_inverse(g.psi(u) + g.psi(v))

    def _survival(self, a, b):
        g = self._generator
        x = g.at_tail(a) + g.at_tail(b)
        one_minus_c = g.inverse_tail(x)
        if not g.strict:
            one_minus_c = np.where(x >= float(g.psi(np.array(0.0))), 1.0, one_minus_c)
        return a + b - one_minus_c

    def _du(self, u, v):
        g = self._generator
        x = g.psi(u) + g.psi(v)
        d = _generator_ratio(g.psi_prime(u), g.psi_prime(g.pseudo_inverse(x)), v)
        return self._zero_set(x, d)

    def _du_tail(self, r, v):
        g = self._generator
        x = g.at_tail(r) + g.psi(v)
        d = _generator_ratio(g.prime_at_tail(r), g.psi_prime(g.pseudo_inverse(x)), v)
        return self._zero_set(x, d)

    def _zero_set(self, x, d):
        # a non-strict generator has C = 0 wherever psi(u) + psi(v) >= psi(0)
        g = self._generator
        if g.strict:
            return d
        psi0 = float(g.psi(np.array(0.0)))
        return np.where(x >= psi0, 0.0, d)

    def tail_dependence_upper(self) -> float:
        # 2 - 2 lim_{s->0+} (psi^-1)'(2s) / (psi^-1)'(s)
        ratio = _generator_limit(self._generator, np.logspace(-2, -300, 1500))
        return float(min(max(2.0 - 2.0 * ratio, 0.0), 1.0))

    def tail_dependence_lower(self) -> float:
        # 2 lim_{s->inf} (psi^-1)'(2s) / (psi^-1)'(s); zero for non-strict generators
        if not self._generator.strict:
            return 0.0
        ratio = _generator_limit(self._generator, np.logspace(2, 300, 1500))
        return float(min(max(2.0 * ratio, 0.0), 1.0))

    def kendall_tau(self) -> float:
        return generator_kendall_tau(self._generator)


def _generator_ratio(num, den, v):
    num, den, v = np.broadcast_arrays(num, den, v)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = num / den
    d = np.where(v == 0.0, 0.0, d)
    d = np.where(v == 1.0, 1.0, d)
    return d


def _generator_limit(g: ArchimedeanGenerator, s_values: np.ndarray) -> float:
    """Limit of ``(psi^-1)'(2s) / (psi^-1)'(s)`` along ``s_values``.

    ``(psi^-1)'(x) = 1 / psi'(psi^-1(x))`` so the ratio equals
    ``psi'(psi^-1(s)) / psi'(psi^-1(2s))``. Evaluation stops when successive
    ratios agree to 1e-12, or when the inverse loses resolution (tail
    distance underflows, or drops below 1e-6 for generators without
    tail-accurate functions), or on non-finite values; the last good ratio
    is returned.
    """
    ratio = math.nan
    precise_tail = g.psi_inverse_tail is not None and g.psi_prime_tail is not None
    with np.errstate(all="ignore"):
        for s in s_values:
            if s < 1.0:
                r1, r2 = g.inverse_tail(np.array(s)), g.inverse_tail(np.array(2.0 * s))
                if not (r1 > 0.0 and r2 > 0.0) or (not precise_tail and r1 < 1e-6):
                    break
                d1, d2 = g.prime_at_tail(r1), g.prime_at_tail(r2)
            else:
                u1, u2 = g.psi_inverse(np.array(s)), g.psi_inverse(np.array(2.0 * s))
                if not (u1 > 0.0 and u2 > 0.0):
                    break
                d1, d2 = g.psi_prime(u1), g.psi_prime(u2)
            d1, d2 = float(d1), float(d2)
            if not (math.isfinite(d1) and math.isfinite(d2)) or d1 == 0.0 or d2 == 0.0:
                break
            val = d1 / d2
            if not math.isfinite(val):
                break
            converged = abs(val - ratio) <= 1e-12 * abs(val)
            ratio = val
            if converged:
                break
    if math.isnan(ratio):
        raise NumericError(f"tail limit of generator {g.name} could not be evaluated")
    return ratio


def generator_kendall_tau(g: ArchimedeanGenerator, tol: float = TAU_QUAD_TOL) -> float:
    """Kendall's tau of an Archimedean copula: ``4 int_0^1 psi/psi' du + 1``."""

    def integrand(u):
        with np.errstate(all="ignore"):
            return g.psi(u) / g.psi_prime(u)

    return 4.0 * integrate(integrand, 0.0, 1.0, tol / 4.0).value + 1.0


def finite_tail_ratio_upper(c: CopulaModel, u: ArrayLike, v: ArrayLike) -> ArrayLike:
    """``(1 - u - v + C(u, v)) / (1 - v)``; tends to the upper tail coefficient."""
    v_arr = _unit("v", v, open_right=True)
    return _out(np.asarray(c.joint_exceedance(u, v_arr)) / (1.0 - v_arr))


def finite_tail_ratio_lower(c: CopulaModel, u: ArrayLike, v: ArrayLike) -> ArrayLike:
    """``C(u, v) / v``; tends to the lower tail coefficient."""
    v_arr = _unit("v", v, open_left=True)
    return _out(np.asarray(c.cdf(u, v_arr)) / v_arr)


def make_copula(family: Family | str, theta: float | None = None) -> CopulaModel:
    """Build a copula from a family name and parameter."""
    family = Family(family)
    if family is Family.PRODUCT:
        return ProductCopula()
    if theta is None:
        raise DomainError(f"family {family.value} requires a parameter")
    if family is Family.FGM:
        return FGMCopula(theta)
    if family is Family.GUMBEL:
        return GumbelCopula(theta)
    if family is Family.CLAYTON:
        return ClaytonCopula(theta)
    raise DomainError("generator-defined copulas are built with ArchimedeanCopula(generator)")
