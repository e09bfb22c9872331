"""Adaptive Gauss-Kronrod integration, including an endpoint-singular variant.

All risk-measure integrals in this package have the form

    int_s^1 g(u) * (1 - u)**(-p) du,   0 < p < 1,

with ``g`` bounded, i.e. an integrable singularity at the upper endpoint.
:func:`integrate_upper_singular` removes the singularity by the substitution
``w = (1 - u)**(1 - p)`` before handing the smooth integrand to
:func:`integrate`.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, IntegrationError

DEFAULT_TOL = 1e-9
MAX_DEPTH = 60
MAX_PANELS = 20_000

# 15-point Kronrod nodes on [-1, 1] (non-negative half) and their weights;
# the 7-point Gauss rule uses the odd-indexed nodes.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # ascending, 15 points
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
_GAUSS_W[[1, 3, 5]] = _WG[:3]
_GAUSS_W[[13, 11, 9]] = _WG[:3]
_GAUSS_W[7] = _WG[3]


@dataclass(frozen=True)
class IntegrationResult:
    """Value of a definite integral with its error estimate."""

    value: float
    abs_error_estimate: float
    evaluations: int


def _panel_nodes(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    return mid[:, None] + half[:, None] * _NODES[None, :]


def _evaluate_panels(f, a: np.ndarray, b: np.ndarray):
    x = _panel_nodes(a, b)
    # nodes may round onto a singular endpoint; that is detected below
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(fx)):
        bad = x[~np.isfinite(fx)][0]
        raise IntegrationError(f"integrand is not finite at x={bad!r}", math.nan, math.inf)
    half = 0.5 * (b - a)
    kronrod = half * (fx @ _KRONROD_W)
    gauss = half * (fx @ _GAUSS_W)
    return kronrod, np.abs(kronrod - gauss)


class _EndpointTrouble(IntegrationError):
    """Adaptive refinement stalled against one endpoint (``side`` is -1 or +1)."""

    def __init__(self, message, best_estimate, abs_error_estimate, side):
        super().__init__(message, best_estimate, abs_error_estimate)
        self.side = side


def _side(left, right, a, b) -> int:
    if right == b and left != a:
        return 1
    if left == a and right != b:
        return -1
    return 0


def _adaptive(f, a, b, tol, max_depth, max_panels) -> IntegrationResult:
    value, error = _evaluate_panels(f, np.array([a]), np.array([b]))
    evaluations = 15
    # heap entries: (-error, order, left, right, value, depth)
    heap = [(-float(error[0]), 0, a, b, float(value[0]), 0)]
    order = 1
    total_value = float(value[0])
    total_error = float(error[0])

    def fail(message, left, right, best):
        side = _side(left, right, a, b)
        if side:
            raise _EndpointTrouble(message, best, total_error, side)
        raise IntegrationError(message, best, total_error)

    while True:
        floor = 50.0 * np.finfo(float).eps * abs(total_value)
        if total_error <= max(tol, floor):
            break
        neg_err, _, left, right, panel_value, depth = heap[0]
        if depth >= max_depth or len(heap) >= max_panels:
            fail(
                f"no convergence on [{a}, {b}] (depth {depth}, {len(heap)} panels, "
                f"error estimate {total_error:.3e} > tol {tol:.3e})",
                left,
                right,
                math.fsum(p[4] for p in heap),
            )
        heapq.heappop(heap)
        mid = 0.5 * (left + right)
        best = math.fsum(p[4] for p in heap) + panel_value
        if not left < mid < right:
            fail(f"panel [{left}, {right}] cannot be bisected further", left, right, best)
        try:
            vals, errs = _evaluate_panels(f, np.array([left, mid]), np.array([mid, right]))
        except IntegrationError as exc:
            fail(str(exc), left, right, best)
        evaluations += 30
        for lo, hi, v, e in ((left, mid, vals[0], errs[0]), (mid, right, vals[1], errs[1])):
            heapq.heappush(heap, (-float(e), order, lo, hi, float(v), depth + 1))
            order += 1
        total_value += float(vals[0] + vals[1]) - panel_value
        total_error += float(errs[0] + errs[1]) + neg_err

    # sum left to right so the result does not depend on heap layout
    panels = sorted(heap, key=lambda p: p[2])
    total_value = math.fsum(p[4] for p in panels)
    total_error = math.fsum(-p[0] for p in panels)
    return IntegrationResult(total_value, total_error, evaluations)


def _wynn_epsilon(seq: list[float]) -> tuple[float, float]:
    """Wynn epsilon extrapolation of a sequence of partial sums.

    Returns the deepest even-column estimate and an error estimate from the
    spread of its neighbours in the table.
    """
    seq = seq[-_WYNN_TERMS:]
    cols = [[0.0] * (len(seq) + 1), list(seq)]  # eps_{-1}, eps_0
    while len(cols[-1]) > 1:
        prev, cur = cols[-2], cols[-1]
        nxt = []
        for k in range(len(cur) - 1):
            diff = cur[k + 1] - cur[k]
            if diff == 0.0:
                break
            nxt.append(prev[k + 1] + 1.0 / diff)
        if len(nxt) < len(cur) - 1 or not nxt:
            break
        cols.append(nxt)
    even = [c for i, c in enumerate(cols[1:]) if i % 2 == 0 and len(c) > 1]
    if not even:
        return seq[-1], math.inf
    last = even[-1]
    est = last[-1]
    err = abs(last[-1] - last[-2])
    if len(even) > 1:
        err += abs(est - even[-2][-1])
    return est, err


_WYNN_TERMS = 16


def _extrapolate_to_endpoint(f, a, b, tol, max_depth, max_panels, side) -> IntegrationResult:
    # integrate over [a, b - h_k] with h_k halving and extrapolate the partial sums
    if side < 0:
        g = lambda x: f(a + b - x)
    else:
        g = f
    h = 0.5 * (b - a)
    first = _adaptive(g, a, b - h, 0.5 * tol, max_depth, max_panels)
    partial = [first.value]
    evaluations = first.evaluations
    best, best_err = first.value, math.inf
    while True:
        lo = b - h
        h *= 0.5
        hi = b - h
        if not lo < hi < b:
            break
        piece = _adaptive(g, lo, hi, 0.01 * tol, max_depth, max_panels)
        evaluations += piece.evaluations
        partial.append(partial[-1] + piece.value)
        if len(partial) < 4:
            continue
        est, err = _wynn_epsilon(partial)
        if math.isfinite(est) and err < best_err:
            best, best_err = est, err
        floor = 50.0 * np.finfo(float).eps * abs(best)
        if best_err <= max(tol, floor) and len(partial) >= 6:
            return IntegrationResult(best, best_err, evaluations)
    raise IntegrationError(
        f"endpoint extrapolation on [{a}, {b}] did not converge "
        f"(error estimate {best_err:.3e} > tol {tol:.3e})",
        best,
        best_err,
    )


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
    *,
    max_depth: int = MAX_DEPTH,
    max_panels: int = MAX_PANELS,
) -> IntegrationResult:
    """Integrate ``f`` over ``[a, b]`` by globally adaptive G7/K15 bisection.

    If refinement stalls against an endpoint, typically an integrable
    singularity there, the integral is recomputed over ``[a, b - h]`` for
    ``h`` halving towards zero and the partial sums are extrapolated with
    Wynn's epsilon algorithm.

    Parameters
    ----------
    f : callable
        Vectorised integrand; receives a 1-d array of abscissae and must
        return an array of the same shape. It is never evaluated at the
        endpoints.
    a, b : float
        Integration limits, ``a < b``.
    tol : float
        Absolute tolerance on the integral. The floor ``50 * eps * |value|``
        applies when ``tol`` is below what double precision can deliver.
    max_depth : int
        Maximum number of bisections of any single panel.
    max_panels : int
        Maximum number of live panels.

    Returns
    -------
    IntegrationResult

    Raises
    ------
    IntegrationError
        When the tolerance is not reached; carries the best estimate.
    """
    if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
        raise DomainError(f"need finite a < b, got a={a!r}, b={b!r}")
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol!r}")
    try:
        return _adaptive(f, a, b, tol, max_depth, max_panels)
    except _EndpointTrouble as trouble:
        try:
            return _extrapolate_to_endpoint(f, a, b, tol, max_depth, max_panels, trouble.side)
        except IntegrationError as exc:
            # report whichever attempt got closer
            if exc.abs_error_estimate < trouble.abs_error_estimate:
                raise IntegrationError(str(exc), exc.best_estimate, exc.abs_error_estimate) from None
            raise IntegrationError(str(trouble), trouble.best_estimate, trouble.abs_error_estimate) from None


def integrate_upper_singular(
    tail_factor: Callable[[np.ndarray], np.ndarray],
    a: float,
    power: float,
    tol: float = DEFAULT_TOL,
    **kwargs,
) -> IntegrationResult:
    """Integrate ``g(u) * (1 - u)**(-power)`` over ``[a, 1]``.

    The bounded factor is passed as ``tail_factor`` and is called with the
    distance to the upper endpoint, ``r = 1 - u``, rather than with ``u``
    itself. Working in ``r`` keeps full relative precision as ``u -> 1``,
    where ``1 - u`` computed in floating point would collapse to zero.

    After substituting ``w = r**(1 - power)`` the integral becomes
    ``1/(1 - power) * int_0^{(1-a)**(1-power)} g(w**(1/(1-power))) dw``,
    which has a bounded integrand.
    """
    if not 0.0 < power < 1.0:
        raise DomainError(f"singularity power must lie in (0, 1), got {power!r}")
    if not a < 1.0:
        raise DomainError(f"lower limit must be below 1, got {a!r}")
    keep = 1.0 - power
    upper = (1.0 - a) ** keep
    inv_keep = 1.0 / keep

    def smooth(w: np.ndarray) -> np.ndarray:
        return tail_factor(w**inv_keep)

    res = integrate(smooth, 0.0, upper, tol * keep, **kwargs)
    return IntegrationResult(res.value * inv_keep, res.abs_error_estimate * inv_keep, res.evaluations)
