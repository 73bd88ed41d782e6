"""
Equilibrium schemas.
Mixed and Bayesian profiles, verdicts, dynamics results and equilibrium statistics.
"""
from pydantic import BaseModel, ConfigDict, Field

from lw_lab.schemas.auction import BidProfile, HouseDemand
from lw_lab.schemas.game import Valuation


class SupportPoint(BaseModel):
    # per-share mechanisms: row[j][l] is a bid; house clearing: row[j] = [count, price]
    row: list[list[float]]
    probability: float = Field(..., ge=0)

    model_config = ConfigDict(frozen=True)


class MixedProfile(BaseModel):
    strategies: list[list[SupportPoint]]

    model_config = ConfigDict(frozen=True)

    @classmethod
    def from_bids(cls, b: BidProfile) -> "MixedProfile":
        return cls(strategies=[[SupportPoint(row=row, probability=1.0)] for row in b.bids])

    @classmethod
    def from_demands(cls, d: HouseDemand) -> "MixedProfile":
        return cls(strategies=[
            [SupportPoint(row=[[float(c), float(p)] for c, p in row], probability=1.0)]
            for row in d.demands
        ])

    @property
    def joint_size(self) -> int:
        size = 1
        for support in self.strategies:
            size *= len(support)
        return size

    @property
    def is_pure(self) -> bool:
        return all(len(support) == 1 for support in self.strategies)


class BidderType(BaseModel):
    valuation: Valuation
    budget: float
    probability: float = Field(..., ge=0)


class BayesianBidder(BaseModel):
    types: list[BidderType]


class BayesianGame(BaseModel):
    m: int
    h: int = 1
    epsilon: float = 0.05
    bidders: list[BayesianBidder]

    @property
    def n(self) -> int:
        return len(self.bidders)


class BayesianStrategy(BaseModel):
    # strategies[i][type] is the support of bidder i's mixed row under that type
    strategies: list[list[list[SupportPoint]]]


class DeviationWitness(BaseModel):
    bidder: int
    type_index: int | None = None
    row: list[list[float]]
    gain: float

    model_config = ConfigDict(ser_json_inf_nan="strings")


class Verdict(BaseModel):
    is_equilibrium: bool
    label: str
    worst_deviation: DeviationWitness | None = None
    checked_deviations: int
    restricted: bool = False
    restriction: str | None = None
    bidder_utilities: list[float] = []
    assumption_flags: list[str] = []

    model_config = ConfigDict(ser_json_inf_nan="strings")


class DynamicsResult(BaseModel):
    converged: bool
    rounds: int
    profile: MixedProfile
    cycle_detected: bool = False
    cycle_length: int | None = None
    repeated_hash: str | None = None


class EquilibriumSearchResult(BaseModel):
    equilibria: list[MixedProfile]
    count: int
    profiles_examined: int


class EquilibriumStats(BaseModel):
    alpha: float
    p_bar: list[float]
    q: list[list[float]]
    budget_hit_prob: list[float]
    exp_revenue: float
    exp_lw: float
    # per-share price: the winning bid (per-share mechanisms) or the clearing price paid (house)
    exp_share_prices: list[list[float]]
