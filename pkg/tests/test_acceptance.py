"""Acceptance criteria, one test each.

Every test records a PASS/FAIL/SKIP line through ``acceptance_report``
before asserting, so the summary at the end of the run lists all ten
criteria even when some fail.
"""

import importlib.util
import itertools
import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from ccte.copulas import ClaytonCopula, FGMCopula, GumbelCopula, ProductCopula
from ccte.fitting import ccte_matrix, fit_pairwise, least_risky_associates, load_panel
from ccte.margins import ParetoMargin
from ccte.montecarlo import agrees, ccte_empirical_grid, sample_pairs
from ccte.quadrature import integrate_upper_singular
from ccte.risk import (
    RiskQuery,
    ccte,
    ccte_archimedean,
    ccte_fgm_closed,
    ccte_generic,
    ccte_upper_bound,
)

from reference_tables import (
    CLAYTON,
    CLAYTON_PARAMS,
    CTE_ROW,
    EU_GUMBEL_THETA,
    EU_LEAST_RISKY,
    EU_TAU,
    FGM,
    GUMBEL,
    GUMBEL_PARAMS,
    LEVELS,
    VAR_ROW,
)

PARETO = ParetoMargin(1.5)
LATTICE = list(itertools.product((0.9, 0.95, 0.99), repeat=2))
ARBITRATION_N = 10_000_000
ARBITRATION_SEED = 2024  # fixed before the first arbitration run


def _grid_cells():
    return [(i, j, s, t) for i, s in enumerate(LEVELS) for j, t in enumerate(LEVELS)]


def _golden_with_arbitration(cls, table):
    """Compare to printed values at 1%; send misses to the Monte Carlo oracle."""
    misses, arbitrated, lost = 0, 0, []
    for theta, block in table.items():
        copula = cls(theta)
        failing = []
        for i, j, s, t in _grid_cells():
            value = ccte_archimedean(copula, PARETO, RiskQuery(s, t)).value
            printed = block[i][j]
            if abs(value - printed) > 0.01 * abs(printed):
                failing.append((s, t, value, printed))
        if not failing:
            continue
        misses += len(failing)
        levels = [(s, t) for s, t, _, _ in failing]
        for (s, t, value, printed), est in zip(
            failing, ccte_empirical_grid(copula, PARETO, levels, ARBITRATION_N, ARBITRATION_SEED)
        ):
            if agrees(value, est):
                arbitrated += 1
            else:
                z = (value - est.value) / est.std_error
                lost.append(f"theta={theta:g} (s={s}, t={t}): ours {value:.3f}, printed {printed}, "
                            f"MC {est.value:.3f}+/-{est.std_error:.3f} (z={z:.2f})")
    return misses, arbitrated, lost


def test_criterion_1_fgm_table(acceptance_report):
    start = time.perf_counter()
    worst = 0.0
    for theta, block in FGM.items():
        for i, j, s, t in _grid_cells():
            worst = max(worst, abs(ccte_fgm_closed(theta, 1.5, RiskQuery(s, t)).value - block[i][j]))
    worst_var = max(abs(PARETO.var(s) - v) for s, v in zip(LEVELS, VAR_ROW))
    worst_cte = max(abs(PARETO.cte(s) - v) for s, v in zip(LEVELS, CTE_ROW))
    elapsed = time.perf_counter() - start
    ok = worst <= 5e-4 and worst_var <= 1e-4 and worst_cte <= 1e-4 and elapsed < 1.0
    acceptance_report(1, "FGM table", "PASS" if ok else "FAIL",
                      f"max |CCTE diff| {worst:.2e}, VaR {worst_var:.2e}, CTE {worst_cte:.2e}, {elapsed:.3f}s")
    assert ok


def test_criterion_2_gumbel_table(acceptance_report):
    start = time.perf_counter()
    misses, arbitrated, lost = _golden_with_arbitration(GumbelCopula, GUMBEL)
    elapsed = time.perf_counter() - start
    ok = not lost and elapsed < 120.0
    detail = (f"{75 - misses}/75 within 1%, {arbitrated}/{misses} misses agree with MC "
              f"(n=1e7, seed {ARBITRATION_SEED}), {elapsed:.1f}s")
    if lost:
        detail += "; unresolved: " + "; ".join(lost)
    acceptance_report(2, "Gumbel table", "PASS" if ok else "FAIL", detail)
    assert ok, detail


def test_criterion_3_clayton_table(acceptance_report):
    start = time.perf_counter()
    misses, arbitrated, lost = _golden_with_arbitration(ClaytonCopula, CLAYTON)
    spot = ccte(ClaytonCopula(12.0), PARETO, RiskQuery(0.99, 0.99)).value
    elapsed = time.perf_counter() - start
    ok = not lost and abs(spot - 66.380) <= 0.01 * 66.380 and elapsed < 120.0
    detail = (f"{75 - misses}/75 within 1%, {arbitrated}/{misses} misses agree with MC, "
              f"theta=12 corner {spot:.4f}, {elapsed:.1f}s")
    if lost:
        detail += "; unresolved: " + "; ".join(lost)
    acceptance_report(3, "Clayton table", "PASS" if ok else "FAIL", detail)
    assert ok, detail


def test_criterion_4_parameter_tables(acceptance_report):
    worst = 0.0
    for theta, (lam, tau) in GUMBEL_PARAMS.items():
        c = GumbelCopula(theta)
        worst = max(worst, abs(c.tail_dependence_upper() - lam), abs(c.kendall_tau() - tau))
    for theta, (lam, tau) in CLAYTON_PARAMS.items():
        c = ClaytonCopula(theta)
        worst = max(worst, abs(c.tail_dependence_lower() - lam), abs(c.kendall_tau() - tau))
    ok = worst <= 1e-3
    acceptance_report(4, "tail coefficients and tau", "PASS" if ok else "FAIL", f"max diff {worst:.2e}")
    assert ok


def test_criterion_5_cross_path(acceptance_report):
    worst = 0.0
    cases = [(FGMCopula(th), lambda c, q: ccte_fgm_closed(c.theta, 1.5, q)) for th in (0.01, 0.5, 1.0)]
    cases += [(GumbelCopula(th), lambda c, q: ccte_archimedean(c, PARETO, q)) for th in (1.01, 2.0, 10.0)]
    cases += [(ClaytonCopula(th), lambda c, q: ccte_archimedean(c, PARETO, q)) for th in (0.5, 2.0, 12.0)]
    for copula, special in cases:
        for s, t in LATTICE:
            q = RiskQuery(s, t)
            worst = max(worst, abs(ccte_generic(copula, PARETO, q).value - special(copula, q).value))
    ok = worst <= 1e-6
    acceptance_report(5, "generic vs specialised routes", "PASS" if ok else "FAIL",
                      f"max diff {worst:.2e} over {len(cases) * len(LATTICE)} cells")
    assert ok


def test_criterion_6_independence(acceptance_report):
    worst = 0.0
    for s, t in LATTICE + [(s, t) for s in LEVELS for t in LEVELS]:
        worst = max(worst, abs(ccte_generic(ProductCopula(), PARETO, RiskQuery(s, t)).value - PARETO.cte(s)))
    ok = worst <= 1e-8
    acceptance_report(6, "independence collapse", "PASS" if ok else "FAIL", f"max diff {worst:.2e}")
    assert ok


def test_criterion_7_oracle_suite(acceptance_report):
    n = 100_000
    crit = stats.kstwo.ppf(0.99, n)
    notes, ok = [], True
    for copula, tau in [(GumbelCopula(2.0), 0.5), (ClaytonCopula(0.5), 0.2), (FGMCopula(1.0), 2 / 9)]:
        u, v = sample_pairs(copula, n, np.random.default_rng(2024))
        ks = max(stats.kstest(u, "uniform").statistic, stats.kstest(v, "uniform").statistic)
        grid = np.arange(1, 11) / 11
        sup = max(abs(np.mean((u <= a) & (v <= b)) - float(copula.cdf(a, b))) for a in grid for b in grid)
        tau_err = abs(stats.kendalltau(u, v)[0] - tau)
        good = ks < crit and sup < 0.01 and tau_err <= 0.01
        ok &= good
        notes.append(f"{copula!r}: KS {ks:.4f} (crit {crit:.4f}), sup {sup:.4f}, tau err {tau_err:.4f}")
    acceptance_report(7, "sampler oracle", "PASS" if ok else "FAIL", "; ".join(notes))
    assert ok


def _eustock_csv(tmp_path):
    path = os.environ.get("CCTE_EUSTOCK_CSV")
    if path:
        return Path(path)
    if importlib.util.find_spec("rdatasets") is None:
        return None
    script = Path(__file__).parent.parent / "scripts" / "fetch_eustock.py"
    spec = importlib.util.spec_from_file_location("fetch_eustock", script)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    out = tmp_path / "eustock.csv"
    mod.main([str(out)])
    return out


def test_criterion_8_index_pipeline(acceptance_report, tmp_path):
    path = _eustock_csv(tmp_path)
    if path is None:
        acceptance_report(8, "index pipeline", "SKIP", "set CCTE_EUSTOCK_CSV or install rdatasets")
        pytest.skip("index dataset not available")
    panel = load_panel(path)
    taus, thetas = fit_pairwise(panel, "gumbel")
    tau_err = max(abs(taus[pair] - ref) for pair, ref in EU_TAU.items())
    theta_err = max(abs(thetas[pair] - ref) for pair, ref in EU_GUMBEL_THETA.items())
    order = least_risky_associates(ccte_matrix(panel, thetas, RiskQuery(0.95, 0.95)))
    same = order == EU_LEAST_RISKY
    ok = panel.n_obs == 500 and tau_err <= 1e-3 and theta_err <= 2e-3
    acceptance_report(
        8, "index pipeline", "PASS" if ok else "FAIL",
        f"tau err {tau_err:.1e}, theta err {theta_err:.1e}; least risky at 0.95/0.95 "
        f"{'matches' if same else 'differs from'} the reference list: "
        + ", ".join(f"({a},{b})" for a, b in order),
    )
    assert ok


def test_criterion_9_bound_compliance(acceptance_report):
    checked, violations = 0, []
    families = [(FGMCopula, FGM), (GumbelCopula, GUMBEL), (ClaytonCopula, CLAYTON)]
    for cls, table in families:
        for theta in table:
            copula = cls(theta)
            points = {(s, t) for _, _, s, t in _grid_cells()} | set(LATTICE)
            for s, t in sorted(points):
                q = RiskQuery(s, t)
                bound = ccte_upper_bound(copula, PARETO, q)
                for value in (ccte(copula, PARETO, q).value, ccte_generic(copula, PARETO, q).value):
                    checked += 1
                    if value > bound + 1e-9:
                        violations.append(f"{copula!r} ({s}, {t})")
    ok = not violations
    acceptance_report(9, "upper bound", "PASS" if ok else "FAIL",
                      f"{len(violations)} violations in {checked} values")
    assert ok, violations


def test_criterion_10_singular_integral(acceptance_report):
    res = integrate_upper_singular(lambda r: np.ones_like(r), 0.9, 2 / 3, 1e-12)
    err = abs(res.value - 3 * 0.1 ** (1 / 3))
    ok = err <= 1e-9
    acceptance_report(10, "singular quadrature", "PASS" if ok else "FAIL", f"error {err:.1e}")
    assert ok
