import itertools

import numpy as np
import pytest

from lw_lab.core.config import settings
from lw_lab.core.exceptions import DegenerateEquilibriumError, InputError, SizeLimitError, UnsupportedValuationError
from lw_lab.schemas.auction import BidProfile, Outcome, TieBreakRule, WeightedOutcome
from lw_lab.schemas.game import ShareBundle
from lw_lab.services.instances import gen_rand_tiebreak_lb
from lw_lab.services.mechanisms import run_first_price, run_second_price
from lw_lab.services.welfare import (
    expected_liquid_welfare,
    liquid_welfare,
    lpoa,
    opt_exact,
    revenue,
    solve_llp,
    welfare_report,
)

LEX = TieBreakRule.lexicographic()
TIGHT_BIDS = BidProfile(bids=[[[0.0], [0.0]], [[9.95], [0.05]]])


def _outcome(counts, payments=None):
    n = len(counts)
    return Outcome(
        winners=[[-1]] * len(counts[0]),
        payments=payments or [0.0] * n,
        bundles=[ShareBundle(counts=c) for c in counts],
    )


def test_liquid_welfare_caps_at_budget(tightness_game):
    o = run_second_price(tightness_game, TIGHT_BIDS, LEX)
    assert liquid_welfare(tightness_game, o) == pytest.approx(10.0)


def test_liquid_welfare_of_the_optimal_split(tightness_game):
    assert liquid_welfare(tightness_game, _outcome([[1, 0], [0, 1]])) == pytest.approx(19.9)
    assert liquid_welfare(tightness_game, _outcome([[0, 0], [0, 0]])) == 0.0


def test_expected_liquid_welfare_is_linear(tightness_game):
    dist = [
        WeightedOutcome(probability=0.5, outcome=_outcome([[0, 0], [1, 1]])),
        WeightedOutcome(probability=0.5, outcome=_outcome([[1, 0], [0, 1]])),
    ]
    assert expected_liquid_welfare(tightness_game, dist) == pytest.approx(14.95)
    point = [(1.0, _outcome([[1, 0], [0, 1]]))]
    assert expected_liquid_welfare(tightness_game, point) == pytest.approx(19.9)


def test_expected_liquid_welfare_needs_a_distribution(tightness_game):
    with pytest.raises(InputError):
        expected_liquid_welfare(tightness_game, [(0.7, _outcome([[1, 0], [0, 1]]))])


def test_revenue(tightness_game):
    assert revenue(run_first_price(tightness_game, TIGHT_BIDS, LEX)) == pytest.approx(10.0)
    assert revenue(run_second_price(tightness_game, TIGHT_BIDS, LEX)) == pytest.approx(0.0)
    assert revenue(_outcome([[0, 0], [0, 0]])) == 0.0


def test_welfare_report_orders_the_measures(tightness_game):
    report = welfare_report(tightness_game, run_first_price(tightness_game, TIGHT_BIDS, LEX))
    assert report.liquid_welfare == pytest.approx(10.0)
    assert report.social_welfare == pytest.approx(20.0)
    assert report.liquid_welfare <= min(report.social_welfare, sum(tightness_game.budgets))


def test_opt_exact_tightness(tightness_game):
    result = opt_exact(tightness_game)
    assert result.value == pytest.approx(19.9)
    assert result.allocation == [[0], [1]]


def test_opt_exact_rand_tiebreak():
    assert opt_exact(gen_rand_tiebreak_lb(4).game).value == pytest.approx(4.0)


def test_opt_exact_budget_cap(make_game):
    assert opt_exact(make_game([[5.0]], [3.0])).value == pytest.approx(3.0)


def test_opt_exact_xos(make_game):
    g = make_game([[[2.0, 0.0], [0.0, 2.0]], [[2.0, 0.0], [0.0, 2.0]]], [10.0, 10.0])
    assert opt_exact(g).value == pytest.approx(4.0)
    g = make_game([[[2.0, 0.0], [0.0, 2.0]]], [10.0])
    assert opt_exact(g).value == pytest.approx(2.0)


def test_opt_exact_splits_shares(make_game):
    # two budget-capped bidders share one item of h=2
    g = make_game([[4.0], [4.0]], [2.0, 2.0], h=2)
    result = opt_exact(g)
    assert result.value == pytest.approx(4.0)
    assert sorted(result.allocation[0]) == [0, 1]


def test_opt_exact_refuses_large_instances(make_game, monkeypatch):
    monkeypatch.setattr(settings, "OPT_MAX_SHARES", 2)
    with pytest.raises(SizeLimitError, match="OPT_MAX_SHARES"):
        opt_exact(make_game([[1.0, 1.0, 1.0]], [3.0]))


def test_opt_exact_share_cap_defaults_to_sixteen(make_game):
    assert settings.OPT_MAX_SHARES == 16
    assert opt_exact(make_game([[1.0] * 16], [20.0])).value == pytest.approx(16.0)
    with pytest.raises(SizeLimitError, match="OPT_MAX_SHARES"):
        opt_exact(make_game([[1.0] * 17], [20.0]))


def test_llp_budget_binds(make_game):
    sol = solve_llp(make_game([[5.0]], [3.0]))
    assert sol.objective == pytest.approx(3.0)
    assert sol.y[0][0] == pytest.approx(0.6)


def test_llp_two_bidders_one_item(make_game):
    sol = solve_llp(make_game([[4.0], [3.0]], [2.0, 10.0]))
    assert sol.objective == pytest.approx(3.5)
    assert sol.y[0][0] == pytest.approx(0.5)
    assert sol.y[1][0] == pytest.approx(0.5)


def test_llp_tightness(tightness_game):
    assert solve_llp(tightness_game).objective == pytest.approx(19.9)


def test_llp_rejects_xos(make_game):
    with pytest.raises(UnsupportedValuationError):
        solve_llp(make_game([[[1.0], [2.0]]], [1.0]))


def test_lpoa():
    assert lpoa(19.9, 10.0) == pytest.approx(1.99)
    assert lpoa(4.0, 1.0) == 4.0
    assert lpoa(2.5, 2.5) == 1.0
    with pytest.raises(DegenerateEquilibriumError):
        lpoa(1.0, 0.0)


# ── LLP against independent oracles ───────────────────────────

def _vertex_oracle(values: np.ndarray, budgets: np.ndarray) -> float:
    """Best basic feasible point: every vertex is fixed by d tight constraints."""
    n, m = values.shape
    d = n * m
    rows, rhs = [], []
    for i in range(n):
        row = np.zeros(d)
        row[i * m:(i + 1) * m] = values[i]
        rows.append(row)
        rhs.append(budgets[i])
    for j in range(m):
        row = np.zeros(d)
        row[j::m] = 1.0
        rows.append(row)
        rhs.append(1.0)
    for k in range(d):
        upper, lower = np.zeros(d), np.zeros(d)
        upper[k], lower[k] = 1.0, -1.0
        rows += [upper, lower]
        rhs += [1.0, 0.0]
    G, h0 = np.array(rows), np.array(rhs)

    best = 0.0
    c = values.reshape(-1)
    for basis in itertools.combinations(range(len(rows)), d):
        sub = G[list(basis)]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        x = np.linalg.solve(sub, h0[list(basis)])
        if np.all(G @ x <= h0 + 1e-9):
            best = max(best, float(c @ x))
    return best


def _grid_oracle(values: np.ndarray, budgets: np.ndarray, step: float = 0.01) -> float:
    n, m = values.shape
    axis = np.round(np.arange(0.0, 1.0 + step / 2, step), 10)
    mesh = np.meshgrid(*([axis] * (n * m)), indexing="ij")
    points = np.stack([x.reshape(-1) for x in mesh], axis=1).reshape(-1, n, m)
    feasible = np.all(points.sum(axis=1) <= 1 + 1e-9, axis=1)
    feasible &= np.all((points * values[None]).sum(axis=2) <= budgets[None] + 1e-9, axis=1)
    return float((points[feasible] * values[None]).sum(axis=(1, 2)).max())


SHAPES = [(1, 1), (1, 2), (2, 1), (1, 3), (3, 1), (2, 2), (2, 3), (3, 2), (1, 6), (6, 1)]


@pytest.mark.parametrize("seed", range(20))
def test_llp_matches_vertex_oracle_and_dominates_opt(seed, make_game):
    rng = np.random.default_rng(seed)
    n, m = SHAPES[seed % len(SHAPES)]
    values = rng.integers(0, 21, size=(n, m)) * 0.5
    budgets = rng.integers(1, 21, size=n) * 0.5
    g = make_game(values.tolist(), budgets.tolist())

    sol = solve_llp(g)
    assert sol.objective == pytest.approx(_vertex_oracle(values, budgets), abs=1e-6)
    assert sol.objective >= opt_exact(g).value - 1e-6

    y = np.array(sol.y)
    assert np.all(y.sum(axis=0) <= 1 + 1e-9)
    assert np.all((y * values).sum(axis=1) <= budgets + 1e-9)


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("shape", [s for s in SHAPES if s[0] * s[1] <= 3])
def test_llp_matches_fine_grid_on_instances_with_at_most_three_variables(shape, seed, make_game):
    rng = np.random.default_rng(100 + seed)
    n, m = shape
    values = rng.integers(0, 21, size=(n, m)) * 0.5
    budgets = rng.integers(1, 21, size=n) * 0.5
    g = make_game(values.tolist(), budgets.tolist())

    sol = solve_llp(g)
    grid = _grid_oracle(values, budgets)
    assert grid <= sol.objective + 1e-6
    assert sol.objective <= grid + max(n, 2) * m * values.max() * 0.01 + 1e-9
