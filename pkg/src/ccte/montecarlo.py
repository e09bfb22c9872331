"""Monte Carlo oracle for CCTE by conditional-inversion sampling.

A pair ``(U, V)`` is drawn by taking ``U`` uniform and solving
``C_u(U, V) = P`` for ``V`` with ``P`` uniform; ``C_u(u, .)`` is the
conditional distribution of ``V`` given ``U = u``. CCTE is then estimated by
rejection: average ``Q(U)`` over the draws with ``U > s`` and ``V > t``.

Sampling runs in chunks whose generators are spawned from one
``numpy.random.SeedSequence``; chunks are merged by pooling sums and sums of
squares, so results do not depend on the number of worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import lambertw

from .copulas import (
    ArchimedeanCopula,
    ClaytonCopula,
    CopulaModel,
    FGMCopula,
    GumbelCopula,
    ProductCopula,
)
from .errors import DomainError, InsufficientTailMassError, SamplerError
from .margins import Margin
from .risk import RiskQuery

MIN_ACCEPTED = 100
DEFAULT_CHUNK = 1_000_000
BISECTION_BRACKET = (1e-15, 1.0 - 1e-15)
BISECTION_TOL = 1e-12
_TWO53 = float(2**53)


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n_accepted: int
    n_total: int

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_total

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "n_accepted": self.n_accepted,
            "n_total": self.n_total,
        }


def open_uniform(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform draws on the open interval (0, 1) with 53-bit resolution."""
    return (rng.integers(0, 2**53, size=n, dtype=np.int64) + 0.5) / _TWO53


# ---------------------------------------------------------------------------
# conditional inverses: solve C_u(u, v) = p for v
# ---------------------------------------------------------------------------


def _fgm_inverse(theta: float, u, p):
    # C_u = v + a v (1 - v), a = theta (1 - 2u): root of a v^2 - (1 + a) v + p = 0 in [0, 1]
    a = theta * (1.0 - 2.0 * u)
    disc = (1.0 + a) ** 2 - 4.0 * a * p
    return 2.0 * p / ((1.0 + a) + np.sqrt(np.maximum(disc, 0.0)))


def _clayton_inverse(theta: float, u, p):
    # v = ((p^(-theta/(1+theta)) - 1) u^(-theta) + 1)^(-1/theta)
    with np.errstate(over="ignore"):
        k = np.expm1(-theta / (1.0 + theta) * np.log(p)) * u ** (-theta)
        return np.exp(-np.log1p(k) / theta)


def _solve_w_plus_log_w(level):
    """Solve ``W + ln W = level`` for ``W > 0`` (the Lambert W of ``exp(level)``)."""
    level = np.asarray(level, dtype=float)
    w = np.empty_like(level)
    big = level > 700.0
    with np.errstate(all="ignore"):
        w[~big] = lambertw(np.exp(level[~big])).real
        w[big] = level[big] - np.log(level[big])
        for _ in range(50):
            step = (w + np.log(w) - level) / (1.0 + 1.0 / w)
            w_new = np.maximum(w - step, 0.5 * w)
            done = np.abs(w_new - w) <= 1e-14 * w_new
            w = w_new
            if np.all(done):
                break
        else:
            raise SamplerError("Gumbel conditional inverse did not converge")
    return w


def _gumbel_inverse(theta: float, u, p):
    # With x = -ln u and z = (x^th + y^th)^(1/th), C_u = p becomes
    # z + (th - 1) ln z = x + (th - 1) ln x - ln p, solved through Lambert W.
    x = -np.log(u)
    if theta == 1.0:
        return np.asarray(p, dtype=float)
    c = theta - 1.0
    level = (x + c * np.log(x) - np.log(p)) / c - np.log(c)
    w = _solve_w_plus_log_w(level)
    log_zx = np.log(c) + np.log(w) - np.log(x)  # ln(z / x) >= 0
    with np.errstate(over="ignore"):
        y = x * np.expm1(theta * np.maximum(log_zx, 0.0)) ** (1.0 / theta)
    return np.exp(-y)


def bisect_conditional_inverse(copula: CopulaModel, u, p, tol: float = BISECTION_TOL):
    """Solve ``C_u(u, v) = p`` by vectorised bisection on the bracket ``[1e-15, 1 - 1e-15]``."""
    u, p = np.broadcast_arrays(np.asarray(u, float), np.asarray(p, float))
    lo = np.full(u.shape, BISECTION_BRACKET[0])
    hi = np.full(u.shape, BISECTION_BRACKET[1])
    n_iter = int(math.ceil(math.log2((hi.flat[0] - lo.flat[0]) / tol))) + 1 if u.size else 0
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        below = np.asarray(copula.du(u, mid)) < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    v = 0.5 * (lo + hi)
    if np.any(hi - lo > tol):
        raise SamplerError("bisection did not reach the tolerance")
    return v


def conditional_inverse(copula: CopulaModel, u, p):
    """``v`` such that ``C_u(u, v) = p``; closed forms where available."""
    if isinstance(copula, ProductCopula):
        return np.broadcast_arrays(np.asarray(u, float), np.asarray(p, float))[1].copy()
    if isinstance(copula, FGMCopula):
        return _fgm_inverse(copula.theta, u, p)
    if isinstance(copula, ClaytonCopula):
        return _clayton_inverse(copula.theta, u, p)
    if isinstance(copula, GumbelCopula):
        return _gumbel_inverse(copula.theta, u, p)
    if isinstance(copula, ArchimedeanCopula):
        return bisect_conditional_inverse(copula, u, p)
    raise DomainError(f"no conditional sampler for {copula!r}")


def sample_pairs(copula: CopulaModel, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` pairs from ``copula``; both coordinates lie in (0, 1)."""
    u = open_uniform(rng, n)
    p = open_uniform(rng, n)
    v = conditional_inverse(copula, u, p)
    return u, np.clip(v, BISECTION_BRACKET[0], BISECTION_BRACKET[1])


def sample_pair(copula: CopulaModel, rng: np.random.Generator) -> tuple[float, float]:
    u, v = sample_pairs(copula, 1, rng)
    return float(u[0]), float(v[0])


# ---------------------------------------------------------------------------
# rejection estimator
# ---------------------------------------------------------------------------


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CCTE_THREADS", "1")))
    except ValueError:
        return 1


def _chunk_sizes(n: int, chunk: int) -> list[int]:
    sizes = [chunk] * (n // chunk)
    if n % chunk:
        sizes.append(n % chunk)
    return sizes


def _tail_sums(copula, margin, levels, size, seed_seq):
    rng = np.random.default_rng(seed_seq)
    u, v = sample_pairs(copula, size, rng)
    out = []
    for s, t in levels:
        keep = (u > s) & (v > t)
        x = np.asarray(margin.var(u[keep]), dtype=float)
        out.append((int(keep.sum()), math.fsum(x), math.fsum(x * x)))
    return out


def _pool(chunks, k):
    n = sum(c[k][0] for c in chunks)
    total = math.fsum(c[k][1] for c in chunks)
    total_sq = math.fsum(c[k][2] for c in chunks)
    return n, total, total_sq


def ccte_empirical_grid(
    copula: CopulaModel,
    margin: Margin,
    levels: list[tuple[float, float]],
    n: int,
    seed: int | None,
    *,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int | None = None,
) -> list[McEstimate]:
    """Rejection estimates of CCTE for several ``(s, t)`` pairs from one sample.

    Raises ``InsufficientTailMassError`` if any pair keeps fewer than 100 draws.
    """
    if n < 1:
        raise DomainError("sample size must be positive")
    for s, t in levels:
        RiskQuery(s, t)
    sizes = _chunk_sizes(int(n), int(chunk_size))
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    workers = workers or _threads()
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(workers) as pool:
            chunks = list(pool.map(lambda a: _tail_sums(copula, margin, levels, *a), zip(sizes, seeds)))
    else:
        chunks = [_tail_sums(copula, margin, levels, size, ss) for size, ss in zip(sizes, seeds)]

    estimates = []
    for k, (s, t) in enumerate(levels):
        kept, total, total_sq = _pool(chunks, k)
        if kept < MIN_ACCEPTED:
            raise InsufficientTailMassError(
                f"only {kept} of {n} draws fell in the joint tail at s={s}, t={t}; "
                "increase n or lower the levels"
            )
        mean = total / kept
        var = max(total_sq / kept - mean * mean, 0.0) * kept / (kept - 1)
        estimates.append(McEstimate(mean, math.sqrt(var / kept), kept, int(n)))
    return estimates


def ccte_empirical(
    copula: CopulaModel,
    margin: Margin,
    query: RiskQuery,
    n: int,
    seed: int | None = None,
    **kwargs,
) -> McEstimate:
    """Rejection estimate of ``E[Q(U) | U > s, V > t]`` from ``n`` copula draws."""
    return ccte_empirical_grid(copula, margin, [(query.s, query.t)], n, seed, **kwargs)[0]


def agrees(analytic: float, estimate: McEstimate, n_se: float = 3.0) -> bool:
    """Whether ``analytic`` lies within ``n_se`` standard errors of the estimate."""
    return abs(analytic - estimate.value) <= n_se * estimate.std_error
