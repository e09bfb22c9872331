import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ccte.copulas import GumbelCopula, ProductCopula
from ccte.errors import DomainError, IngestionError
from ccte.fitting import (
    PairMatrix,
    ReturnsPanel,
    ccte_matrix,
    fit_pairwise,
    kendall_tau_sample,
    least_risky_associates,
    load_panel,
    log_returns,
    read_series_csv,
    tau_in_range,
    tau_matrix,
    tau_to_theta,
    theta_to_tau,
)
from ccte.margins import ParetoMargin
from ccte.montecarlo import sample_pairs
from ccte.risk import RiskQuery

DATA = Path(__file__).parent / "data"
SYNTHETIC = DATA / "synthetic_prices.csv"


def brute_tau(x, y):
    """Quadratic-time Kendall tau straight from pair signs: (tau_a, tau_b)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(len(x), 1)
    s = float(np.sum((sx * sy)[iu]))
    n0 = len(x) * (len(x) - 1) / 2
    nx = n0 - np.count_nonzero(sx[iu] == 0)
    ny = n0 - np.count_nonzero(sy[iu] == 0)
    return s / n0, s / math.sqrt(nx * ny)


def write(tmp_path, text, name="in.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- ingestion -----------------------------------------------------------------------


def test_read_csv_skips_date_column(tmp_path):
    p = write(tmp_path, "Date,a,b\n2020-01-01,1,2\n2020-01-02,3,4\n")
    names, data = read_series_csv(p)
    assert names == ("a", "b")
    assert data.tolist() == [[1, 2], [3, 4]]


def test_read_csv_without_date(tmp_path):
    names, data = read_series_csv(write(tmp_path, "x,y\n1.5,2\n\n3,4e-1\n"))
    assert names == ("x", "y") and data.tolist() == [[1.5, 2], [3, 0.4]]


@pytest.mark.parametrize(
    "text, line, msg",
    [
        ("a,b\n1,2\n3\n", 3, "expected 2 fields"),
        ("a,b\n1,2\n3,4\n5,oops\n", 4, "not a number"),
        ("a,b\n1,nan\n", 2, "non-finite"),
        ("a,b\n1,inf\n", 2, "non-finite"),
        ("a,a\n1,2\n", 1, "duplicate"),
        ("a,\n1,2\n", 1, "header"),
        ("a,b\n", 2, "no data rows"),
        ("", 1, "empty"),
    ],
)
def test_read_csv_errors_carry_line(tmp_path, text, line, msg):
    with pytest.raises(IngestionError, match=msg) as info:
        read_series_csv(write(tmp_path, text))
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_missing_file(tmp_path):
    with pytest.raises(IngestionError, match="cannot read"):
        read_series_csv(tmp_path / "nope.csv")


def test_log_returns_telescoping():
    prices = np.column_stack([np.exp(np.arange(12.0)), np.full(12, 5.0)])
    panel = log_returns(prices, ["e", "flat"])
    assert panel.n_obs == 11
    assert np.allclose(panel.column("e"), 1.0, atol=1e-12)
    assert np.all(panel.column("flat") == 0.0)


def test_log_returns_row_count():
    prices = np.exp(np.random.default_rng(0).normal(size=(501, 2)).cumsum(axis=0))
    assert log_returns(prices, ["a", "b"]).n_obs == 500


def test_log_returns_rejects_nonpositive():
    prices = np.ones((20, 2))
    prices[7, 1] = 0.0
    with pytest.raises(IngestionError, match="'b' at row 7") as info:
        log_returns(prices, ["a", "b"])
    assert info.value.line == 9
    with pytest.raises(IngestionError, match="at least 11"):
        log_returns(np.ones((10, 1)), ["a"])


def test_returns_panel_validation():
    with pytest.raises(DomainError):
        ReturnsPanel(("a",), np.zeros((9, 1)))
    with pytest.raises(DomainError):
        ReturnsPanel(("a", "a"), np.zeros((20, 2)))
    with pytest.raises(DomainError):
        ReturnsPanel(("a",), np.full((20, 1), np.nan))
    with pytest.raises(DomainError):
        ReturnsPanel(("a", "b"), np.zeros((20, 1)))
    panel = ReturnsPanel(("a",), np.zeros((20, 1)))
    with pytest.raises(ValueError):
        panel.returns[0, 0] = 1.0


def test_load_panel_kinds(tmp_path):
    panel = load_panel(SYNTHETIC)
    assert panel.names == ("A", "B", "C") and panel.n_obs == 500
    rets = write(tmp_path, "a,b\n" + "".join(f"{k * 0.01},{-k * 0.02}\n" for k in range(12)))
    assert load_panel(rets, kind="returns").n_obs == 12
    short = write(tmp_path, "a\n0.1\n0.2\n", "short.csv")
    with pytest.raises(IngestionError):
        load_panel(short, kind="returns")
    with pytest.raises(DomainError):
        load_panel(rets, kind="levels")


# -- Kendall tau ---------------------------------------------------------------------


def test_tau_examples():
    assert kendall_tau_sample([1, 2, 3], [1, 2, 3]) == 1.0
    assert kendall_tau_sample([1, 2, 3], [3, 2, 1]) == -1.0
    assert kendall_tau_sample([1, 1, 1], [1, 2, 3]) == 0.0


def test_tau_errors():
    with pytest.raises(DomainError, match="lengths"):
        kendall_tau_sample([1, 2, 3], [1, 2])
    with pytest.raises(DomainError):
        kendall_tau_sample([1], [1])
    with pytest.raises(DomainError):
        kendall_tau_sample([1, 2], [1, 2], variant="c")


@pytest.mark.parametrize("seed", range(4))
def test_tau_against_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = 300
    x = rng.normal(size=n)
    y = 0.6 * x + rng.normal(size=n)
    if seed % 2:
        # heavy ties, like zero returns from repeated closes
        x, y = np.round(x, 1), np.round(y, 1)
    a, b = brute_tau(x, y)
    assert kendall_tau_sample(x, y) == pytest.approx(a, abs=1e-14)
    assert kendall_tau_sample(x, y, variant="b") == pytest.approx(b, abs=1e-12)


def test_synthetic_fixture_taus():
    panel = load_panel(SYNTHETIC)
    taus = tau_matrix(panel, "a")
    for i in range(3):
        for j in range(3):
            if i != j:
                a, _ = brute_tau(panel.returns[:, i], panel.returns[:, j])
                assert taus.values[i, j] == pytest.approx(a, abs=1e-14)
    # pinned: the fixture was drawn from Gumbel(2) for A-B, independence for C
    assert taus["A", "B"] == pytest.approx(0.48083, abs=1e-5)
    assert taus["A", "C"] == pytest.approx(0.03024, abs=1e-5)
    _, thetas = fit_pairwise(panel, "gumbel")
    assert thetas["A", "B"] == pytest.approx(1.92616, abs=1e-5)
    assert math.isinf(thetas["A", "A"])
    assert np.array_equal(thetas.values, thetas.values.T)
    assert np.array_equal(taus.values, taus.values.T)


@given(
    # integers keep the transforms strictly increasing in floating point
    st.lists(st.integers(-10**6, 10**6), min_size=3, max_size=40, unique=True),
    st.integers(0, 2**31),
)
def test_tau_rank_invariance(xs, seed):
    x = np.array(xs, dtype=float)
    y = x + np.random.default_rng(seed).normal(scale=np.std(x) + 1, size=x.size)
    base = kendall_tau_sample(x, y)
    assert kendall_tau_sample(np.arctan(x / 1e5), y) == pytest.approx(base, abs=1e-12)
    assert kendall_tau_sample(x**3, np.exp(y / (np.abs(y).max() + 1))) == pytest.approx(base, abs=1e-12)
    assert kendall_tau_sample(x, 3 * y + 7) == pytest.approx(base, abs=1e-12)
    assert kendall_tau_sample(x, x) == 1.0


# -- inversion ----------------------------------------------------------------------


def test_inversion_examples():
    assert tau_to_theta("gumbel", 0.4052) == pytest.approx(1.68124, abs=1e-5)
    assert tau_to_theta("clayton", 0.5) == 2.0
    assert tau_to_theta("fgm", 2 / 9) == pytest.approx(1.0, abs=1e-15)
    assert tau_to_theta("gumbel", 0.0) == 1.0


@pytest.mark.parametrize(
    "family, grid",
    [
        ("gumbel", np.linspace(0, 0.98, 50)),
        ("clayton", np.linspace(0.01, 0.98, 50)),
        ("fgm", np.linspace(-2 / 9, 2 / 9, 50)),
    ],
)
def test_round_trip(family, grid):
    for tau in grid:
        assert theta_to_tau(family, tau_to_theta(family, tau)) == pytest.approx(tau, abs=1e-12)


@pytest.mark.parametrize(
    "family, tau", [("gumbel", -0.1), ("gumbel", 1.0), ("clayton", 0.0), ("clayton", -0.3), ("fgm", 0.23)]
)
def test_out_of_range_names_family(family, tau):
    assert not tau_in_range(family, tau)
    with pytest.raises(DomainError, match=family):
        tau_to_theta(family, tau)


def test_no_inversion_for_product():
    with pytest.raises(DomainError, match="product"):
        tau_to_theta("product", 0.1)


def test_identical_series_rejected_for_gumbel():
    x = np.random.default_rng(4).normal(size=50)
    panel = ReturnsPanel(("x", "y", "z"), np.column_stack([x, x, -x]))
    with pytest.raises(DomainError) as info:
        fit_pairwise(panel, "gumbel")
    text = str(info.value)
    assert "gumbel" in text and "x-y" in text and "x-z" in text and "y-z" in text


def test_independent_series_fit_near_one():
    rng = np.random.default_rng(12)
    panel = ReturnsPanel(("a", "b"), rng.normal(size=(10_000, 2)))
    taus = tau_matrix(panel, "a")
    if taus["a", "b"] >= 0:
        _, th = fit_pairwise(panel, "gumbel")
        assert 1.0 <= th["a", "b"] <= 1.05
    assert abs(taus["a", "b"]) < 2 * 2 / math.sqrt(10_000)


def test_simulated_gumbel_recovered():
    u, v = sample_pairs(GumbelCopula(2.0), 5000, np.random.default_rng(8))
    panel = ReturnsPanel(("u", "v"), np.column_stack([u, v]))
    _, th = fit_pairwise(panel, "gumbel", variant="a")
    assert 1.9 <= th["u", "v"] <= 2.1


# -- CCTE matrix ----------------------------------------------------------------------


def test_ccte_matrix_diagonal_blank_and_asymmetric():
    panel = load_panel(SYNTHETIC)
    _, th = fit_pairwise(panel, "gumbel")
    m = ccte_matrix(panel, th, RiskQuery(0.95, 0.95))
    assert all(math.isnan(m.values[i, i]) for i in range(3))
    assert m["A", "B"] != m["B", "A"]
    assert m.to_dict()["values"][0][0] is None
    parallel = ccte_matrix(panel, th, RiskQuery(0.95, 0.95), workers=3)
    assert np.array_equal(np.nan_to_num(parallel.values), np.nan_to_num(m.values))
    # the weakest-dependence partner gives the smallest conditional tail mean
    assert least_risky_associates(m) == [("A", "C"), ("B", "C"), ("C", "B")]


def test_ccte_matrix_independence_collapse_pareto():
    u, v = sample_pairs(ProductCopula(), 20_000, np.random.default_rng(2))
    margin = ParetoMargin(3.0)
    panel = ReturnsPanel(("x", "y"), np.column_stack([margin.var(u), margin.var(v)]))
    _, th = fit_pairwise(panel, "fgm", variant="a")
    q = RiskQuery(0.9, 0.9)
    m = ccte_matrix(panel, th, q, margins=[margin, margin])
    # theta is sampling noise around 0; CCTE moves by a few percent at most
    assert m["x", "y"] == pytest.approx(margin.cte(0.9), rel=0.03)
    assert m["y", "x"] == pytest.approx(margin.cte(0.9), rel=0.03)


def test_ccte_matrix_argument_errors():
    panel = load_panel(SYNTHETIC)
    taus = tau_matrix(panel)
    with pytest.raises(DomainError, match="family"):
        ccte_matrix(panel, taus, RiskQuery(0.9, 0.9))
    _, th = fit_pairwise(panel, "gumbel")
    with pytest.raises(DomainError, match="margins"):
        ccte_matrix(panel, th, RiskQuery(0.9, 0.9), margins=[ParetoMargin(2.0)])


def test_least_risky_picks_row_minimum():
    m = PairMatrix(("a", "b", "c"), [[np.nan, 2, 1], [5, np.nan, 6], [3, 4, np.nan]])
    assert least_risky_associates(m) == [("a", "c"), ("b", "a"), ("c", "a")]
