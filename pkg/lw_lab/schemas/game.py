"""
Game model schemas.
Bidders, valuations, share bundles and the GameInstance JSON document.
"""
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field


class AdditiveValuation(BaseModel):
    type: Literal["additive"] = "additive"
    values: list[float]

    model_config = ConfigDict(frozen=True)

    @property
    def clauses(self) -> list[list[float]]:
        return [list(self.values)]


class XOSValuation(BaseModel):
    type: Literal["xos"] = "xos"
    clauses: list[list[float]]

    model_config = ConfigDict(frozen=True)


Valuation = Annotated[Union[AdditiveValuation, XOSValuation], Field(discriminator="type")]


class Bidder(BaseModel):
    budget: float
    valuation: Valuation

    model_config = ConfigDict(frozen=True)


class GameInstance(BaseModel):
    n: int
    m: int
    h: int = 1
    epsilon: float = 0.05
    bidders: list[Bidder]

    model_config = ConfigDict(frozen=True)

    @classmethod
    def build(cls, bidders: list[Bidder], m: int, h: int = 1, epsilon: float = 0.05) -> "GameInstance":
        return cls(n=len(bidders), m=m, h=h, epsilon=epsilon, bidders=bidders)

    @property
    def total_shares(self) -> int:
        return self.m * self.h

    @property
    def is_additive(self) -> bool:
        return all(isinstance(b.valuation, AdditiveValuation) for b in self.bidders)

    @property
    def budgets(self) -> list[float]:
        return [b.budget for b in self.bidders]


class ShareBundle(BaseModel):
    counts: list[int]

    model_config = ConfigDict(frozen=True)

    @classmethod
    def empty(cls, m: int) -> "ShareBundle":
        return cls(counts=[0] * m)

    @classmethod
    def full(cls, m: int, h: int) -> "ShareBundle":
        return cls(counts=[h] * m)


class ValidationIssue(BaseModel):
    bidder: int | None = None
    field: str
    message: str
