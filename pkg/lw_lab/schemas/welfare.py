from pydantic import BaseModel, ConfigDict


class LLPSolution(BaseModel):
    y: list[list[float]]
    objective: float
    pivots: int = 0

    model_config = ConfigDict(frozen=True)


class WelfareReport(BaseModel):
    liquid_welfare: float
    social_welfare: float
    revenue: float


class OptResult(BaseModel):
    value: float
    # allocation[j][l] = bidder index, -1 when the share stays unassigned
    allocation: list[list[int]]
    states_explored: int = 0


class LPoAReport(BaseModel):
    opt: float
    opt_source: str
    eq_lw: float
    lpoa: float
