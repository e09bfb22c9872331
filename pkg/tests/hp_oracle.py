"""Independent high-precision CCTE for Pareto margins, written against mpmath only.

Uses the defining ratio int_s^1 q(u)(1 - C_u(u, t)) du / (1 - s - t + C(s, t))
with q(u) = (1 - u)^(-1/alpha). The integral is taken in r = 1 - u after
the substitution r = w^(alpha / (alpha - 1)), which leaves a smooth integrand.
"""

import mpmath as mp


def _gumbel(th):
    def cdf(u, v):
        return mp.exp(-((-mp.log(u)) ** th + (-mp.log(v)) ** th) ** (1 / th))

    def du_tail(r, v):
        x = -mp.log1p(-r)
        y = -mp.log(v)
        z = (x**th + y**th) ** (1 / th)
        return mp.exp(x - z) * (x / z) ** (th - 1)

    return cdf, du_tail


def _clayton(th):
    def cdf(u, v):
        return (u ** (-th) + v ** (-th) - 1) ** (-1 / th)

    def du_tail(r, v):
        u = 1 - r
        return u ** (-th - 1) * (u ** (-th) + v ** (-th) - 1) ** (-1 / th - 1)

    return cdf, du_tail


def _fgm(th):
    def cdf(u, v):
        return u * v * (1 + th * (1 - u) * (1 - v))

    def du_tail(r, v):
        return v + th * v * (1 - v) * (2 * r - 1)

    return cdf, du_tail


FAMILIES = {"gumbel": _gumbel, "clayton": _clayton, "fgm": _fgm}


def ccte_pareto(family, theta, s, t, alpha=1.5, dps=30):
    with mp.workdps(dps):
        th, s, t, a = (mp.mpf(x) for x in (theta, s, t, alpha))
        cdf, du_tail = FAMILIES[family](th)
        k = a / (a - 1)  # r = w^k turns r^(-1/a) dr into k dw

        def f(w):
            return k * (1 - du_tail(w**k, t))

        top = (1 - s) ** (1 / k)
        pts = [mp.mpf(0)] + [top * mp.mpf(10) ** (-j) for j in range(12, 0, -1)] + [top]
        num = mp.quad(f, pts)
        den = 1 - s - t + cdf(s, t)
        return float(num / den)
