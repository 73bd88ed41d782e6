import pytest

from lw_lab.core.exceptions import InputError
from lw_lab.enums import MechanismEnum
from lw_lab.schemas.auction import BidProfile, HouseDemand, TieBreakRule
from lw_lab.services.mechanisms import (
    NEG_INFINITY,
    check_no_overbidding,
    check_no_overbudget,
    outcome_distribution,
    run_first_price,
    run_house_clearing,
    run_second_price,
    utility,
)

LEX = TieBreakRule.lexicographic()
TIGHT_BIDS = BidProfile(bids=[[[0.0], [0.0]], [[9.95], [0.05]]])


def test_first_price_winner_pays_own_bids(tightness_game):
    o = run_first_price(tightness_game, TIGHT_BIDS, LEX)
    assert o.winners == [[1], [1]]
    assert o.payments == pytest.approx([0.0, 10.0])
    assert o.bundles[1].counts == [1, 1]


def test_second_price_winner_pays_competing_bid(tightness_game):
    o = run_second_price(tightness_game, TIGHT_BIDS, LEX)
    assert o.winners == [[1], [1]]
    assert o.payments == pytest.approx([0.0, 0.0])
    assert utility(tightness_game, 1, o) == pytest.approx(20.0)
    assert utility(tightness_game, 0, o) == 0.0


def test_zero_bids_leave_shares_unallocated(tightness_game):
    zero = BidProfile(bids=[[[0.0], [0.0]], [[0.0], [0.0]]])
    for run in (run_first_price, run_second_price):
        o = run(tightness_game, zero, LEX)
        assert o.winners == [[-1], [-1]]
        assert o.payments == [0.0, 0.0]


def test_lexicographic_tie(make_game):
    g = make_game([[5.0], [5.0]], [5.0, 5.0])
    bids = BidProfile(bids=[[[1.0]], [[1.0]]])
    o = run_first_price(g, bids, LEX)
    assert o.winners == [[0]]
    assert o.payments == pytest.approx([1.0, 0.0])
    o = run_first_price(g, bids, TieBreakRule.lexicographic([1, 0]))
    assert o.winners == [[1]]


def test_second_price_single_and_pair(make_game):
    g = make_game([[5.0], [5.0]], [5.0, 5.0])
    o = run_second_price(g, BidProfile(bids=[[[3.0]], [[0.0]]]), LEX)
    assert o.payments == pytest.approx([0.0, 0.0])
    o = run_second_price(g, BidProfile(bids=[[[5.0]], [[2.0]]]), LEX)
    assert o.winners == [[0]]
    assert o.payments == pytest.approx([2.0, 0.0])


def test_second_price_never_charges_more_than_first(make_game):
    g = make_game([[3.0, 2.0], [1.0, 4.0], [2.0, 2.0]], [5.0, 5.0, 5.0], h=2)
    bids = BidProfile(bids=[
        [[1.0, 0.5], [0.2, 0.0]],
        [[0.4, 0.5], [1.5, 1.0]],
        [[1.0, 0.1], [0.2, 0.3]],
    ])
    first = run_first_price(g, bids, LEX)
    second = run_second_price(g, bids, LEX)
    assert first.winners == second.winners
    for p1, p2 in zip(first.payments, second.payments):
        assert p2 <= p1 + 1e-12


@pytest.mark.parametrize("order", [[0, 0], [1, -1]])
def test_tie_order_rejects_repeats_and_negatives(order):
    with pytest.raises(ValueError):
        TieBreakRule.lexicographic(order)


@pytest.mark.parametrize("order", [[5], [0, 2], [0]])
def test_tie_order_must_cover_every_bidder(order, make_game):
    g = make_game([[5.0], [5.0]], [5.0, 5.0])
    rule = TieBreakRule.lexicographic(order)
    with pytest.raises(InputError):
        rule.positions(g.n)
    with pytest.raises(InputError):
        run_first_price(g, BidProfile(bids=[[[1.0]], [[1.0]]]), rule)


def test_uniform_ties_are_seeded(make_game):
    g = make_game([[5.0]] * 4, [1.0] * 4)
    bids = BidProfile(bids=[[[1.0]]] * 4)
    runs = [run_first_price(g, bids, TieBreakRule.uniform(seed=7)) for _ in range(3)]
    assert runs[0] == runs[1] == runs[2]


def test_uniform_tie_distribution_is_exact(make_game):
    g = make_game([[5.0]] * 4, [1.0] * 4)
    bids = BidProfile(bids=[[[1.0]]] * 4)
    dist = outcome_distribution(g, MechanismEnum.FIRST, bids, TieBreakRule.uniform())
    assert len(dist) == 4
    assert sorted(w.outcome.winners[0][0] for w in dist) == [0, 1, 2, 3]
    assert all(w.probability == pytest.approx(0.25) for w in dist)


def test_lexicographic_distribution_is_a_point_mass(tightness_game):
    dist = outcome_distribution(tightness_game, MechanismEnum.SECOND, TIGHT_BIDS, LEX)
    assert len(dist) == 1
    assert dist[0].probability == 1.0


def test_off_grid_bid_is_rejected(tightness_game):
    with pytest.raises(InputError):
        run_first_price(tightness_game, BidProfile(bids=[[[0.01], [0.0]], [[0.0], [0.0]]]), LEX)


def test_house_clearing_serves_by_price(make_game):
    g = make_game([[10.0], [10.0]], [10.0, 10.0], h=10)
    d = HouseDemand(demands=[[(6, 1.0)], [(6, 0.9)]])
    o = run_house_clearing(g, d, LEX)
    assert [b.counts for b in o.bundles] == [[6], [4]]
    assert o.payments == pytest.approx([6.0, 3.6])


def test_house_single_demand(make_game):
    g = make_game([[10.0]], [10.0], h=10)
    o = run_house_clearing(g, HouseDemand(demands=[[(4, 0.5)]]), LEX)
    assert o.bundles[0].counts == [4]
    assert o.payments == pytest.approx([2.0])
    assert sum(1 for w in o.winners[0] if w == -1) == 6


def test_house_equal_prices_follow_the_order(make_game):
    g = make_game([[10.0], [10.0]], [10.0, 10.0], h=3)
    d = HouseDemand(demands=[[(2, 1.0)], [(2, 1.0)]])
    assert [b.counts for b in run_house_clearing(g, d, LEX).bundles] == [[2], [1]]
    reverse = TieBreakRule.lexicographic([1, 0])
    assert [b.counts for b in run_house_clearing(g, d, reverse).bundles] == [[1], [2]]


def test_house_distinct_prices_ignore_ties(make_game):
    g = make_game([[10.0], [10.0], [10.0]], [10.0] * 3, h=4)
    d = HouseDemand(demands=[[(2, 1.0)], [(2, 0.5)], [(3, 0.25)]])
    outcomes = {
        tuple(tuple(b.counts) for b in run_house_clearing(g, d, t).bundles)
        for t in (LEX, TieBreakRule.lexicographic([2, 1, 0]), TieBreakRule.uniform(3))
    }
    assert outcomes == {((2,), (2,), (0,))}


def test_house_uniform_distribution(make_game):
    g = make_game([[10.0], [10.0]], [10.0, 10.0], h=3)
    d = HouseDemand(demands=[[(2, 1.0)], [(2, 1.0)]])
    dist = outcome_distribution(g, MechanismEnum.HOUSE, d, TieBreakRule.uniform())
    assert sorted((tuple(b.counts[0] for b in w.outcome.bundles), w.probability) for w in dist) == [
        ((1, 2), pytest.approx(0.5)),
        ((2, 1), pytest.approx(0.5)),
    ]


def test_utility_over_budget_is_negative_infinity(make_game):
    g = make_game([[5.0]], [1.0])
    o = run_first_price(g, BidProfile(bids=[[[2.0]]]), LEX)
    assert utility(g, 0, o) == NEG_INFINITY


def test_utility_of_losing_bidder_is_zero(tightness_game):
    o = run_first_price(tightness_game, TIGHT_BIDS, LEX)
    assert utility(tightness_game, 0, o) == 0.0


def test_no_overbidding_additive(make_game):
    g = make_game([[10.0, 0.0]], [20.0])
    assert check_no_overbidding(g, 0, BidProfile(bids=[[[10.0], [0.0]]]))
    assert not check_no_overbidding(g, 0, BidProfile(bids=[[[10.05], [0.0]]]))
    assert not check_no_overbidding(g, 0, BidProfile(bids=[[[1.0], [0.05]]]))


def test_no_overbidding_xos_uses_subsets(make_game):
    g = make_game([[[2.0, 0.0], [0.0, 2.0]]], [10.0])
    # each bid alone is covered by some clause, the pair is worth only 2
    assert check_no_overbidding(g, 0, BidProfile(bids=[[[1.0], [1.0]]]))
    assert not check_no_overbidding(g, 0, BidProfile(bids=[[[1.5], [1.5]]]))


def test_no_overbudget(make_game):
    g = make_game([[1.0, 1.0]], [1.0])
    assert check_no_overbudget(g, 0, BidProfile(bids=[[[0.5], [0.5]]]))
    assert not check_no_overbudget(g, 0, BidProfile(bids=[[[0.55], [0.5]]]))
    assert check_no_overbudget(g, 0, BidProfile(bids=[[[0.0], [0.0]]]))
    assert check_no_overbudget(g, 0, HouseDemand(demands=[[(1, 0.5), (1, 0.5)]]))
