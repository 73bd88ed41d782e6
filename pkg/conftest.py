import pytest

from lw_lab.core.config import settings
from lw_lab.schemas.game import AdditiveValuation, Bidder, GameInstance, XOSValuation


def _valuation(v):
    # a flat list is additive, a list of lists is XOS
    if v and isinstance(v[0], (list, tuple)):
        return XOSValuation(clauses=[list(c) for c in v])
    return AdditiveValuation(values=list(v))


@pytest.fixture
def make_game():
    def build(values, budgets, h=1, epsilon=0.05):
        bidders = [Bidder(budget=b, valuation=_valuation(v)) for v, b in zip(values, budgets)]
        return GameInstance.build(bidders, m=len(_valuation(values[0]).clauses[0]), h=h, epsilon=epsilon)
    return build


@pytest.fixture
def tightness_game(make_game):
    # budgets 9.9 and 10, grid 0.05
    return make_game([[10.0, 0.0], [10.0, 10.0]], [9.9, 10.0])


@pytest.fixture
def single_thread(monkeypatch):
    monkeypatch.setattr(settings, "LW_LAB_THREADS", 1)
