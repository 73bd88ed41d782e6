from pydantic import BaseModel, ConfigDict, Field, model_validator

from lw_lab.core.exceptions import InputError
from lw_lab.enums import TieBreakKind
from lw_lab.schemas.game import ShareBundle


class BidProfile(BaseModel):
    # bids[i][j][l]
    bids: list[list[list[float]]]

    model_config = ConfigDict(frozen=True)


class HouseDemand(BaseModel):
    # demands[i][j] = (share count, price per share)
    demands: list[list[tuple[int, float]]]

    model_config = ConfigDict(frozen=True)


class TieBreakRule(BaseModel):
    kind: TieBreakKind = TieBreakKind.LEXICOGRAPHIC
    order: list[int] | None = None
    seed: int = 0

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_order(self) -> "TieBreakRule":
        if self.order is not None:
            if any(i < 0 for i in self.order):
                raise ValueError(f"tie-break order {self.order} has a negative bidder index")
            if len(set(self.order)) != len(self.order):
                raise ValueError(f"tie-break order {self.order} repeats a bidder")
        return self

    @classmethod
    def lexicographic(cls, order: list[int] | None = None) -> "TieBreakRule":
        return cls(kind=TieBreakKind.LEXICOGRAPHIC, order=order)

    @classmethod
    def uniform(cls, seed: int = 0) -> "TieBreakRule":
        return cls(kind=TieBreakKind.UNIFORM, seed=seed)

    @classmethod
    def parse(cls, text: str) -> "TieBreakRule":
        """Accepts `lex`, `lex:2,0,1`, `uniform` and `uniform:SEED`."""
        kind, _, arg = text.strip().partition(":")
        if kind == TieBreakKind.LEXICOGRAPHIC.value:
            order = [int(x) for x in arg.split(",")] if arg else None
            return cls.lexicographic(order)
        if kind == TieBreakKind.UNIFORM.value:
            return cls.uniform(int(arg) if arg else 0)
        raise ValueError(f"unknown tie-break rule: {text}")

    def positions(self, n: int) -> list[int]:
        """Rank of each bidder in the preference order (0 = served first)."""
        order = self.order if self.order is not None else list(range(n))
        if sorted(order) != list(range(n)):
            raise InputError(f"tie-break order {order} is not a permutation of the {n} bidders")
        ranks = [0] * n
        for rank, bidder in enumerate(order):
            ranks[bidder] = rank
        return ranks

    @property
    def is_uniform(self) -> bool:
        return self.kind == TieBreakKind.UNIFORM

    def label(self) -> str:
        if self.is_uniform:
            return f"uniform:{self.seed}"
        if self.order is None:
            return "lex"
        return "lex:" + ",".join(str(i) for i in self.order)


class Outcome(BaseModel):
    winners: list[list[int]]
    payments: list[float]
    bundles: list[ShareBundle]

    model_config = ConfigDict(frozen=True)


class WeightedOutcome(BaseModel):
    probability: float = Field(..., ge=0)
    outcome: Outcome
