from pydantic import BaseModel, ConfigDict, Field

from lw_lab.core.config import settings


class AnalysisParams(BaseModel):
    alpha: float = Field(default_factory=lambda: settings.DEFAULT_ALPHA, gt=1)
    gamma: float = Field(default_factory=lambda: settings.DEFAULT_GAMMA, gt=1)

    model_config = ConfigDict(frozen=True)


class BidderClassification(BaseModel):
    I1: list[int]
    I2: list[int]
    I3: list[int]
    I: list[int]
    J: list[list[int]]
    Gamma: list[list[int]]
    G: list[list[int]]

    def outside(self, n: int, group: str = "I") -> list[int]:
        members = set(getattr(self, group))
        return [i for i in range(n) if i not in members]


class AuditCheck(BaseModel):
    name: str
    lhs: float
    rhs: float
    holds: bool
    detail: str | None = None


class AuditReport(BaseModel):
    params: AnalysisParams
    mechanism: str
    revenue_quantity: str
    revenue: float
    liquid_welfare: float
    opt: float
    opt_source: str
    llp_objective: float
    lpoa: float
    classification: BidderClassification
    checks: list[AuditCheck]

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in self.checks)

    def check(self, name: str) -> AuditCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)
