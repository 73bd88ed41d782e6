from pydantic import BaseModel, ConfigDict, Field, model_validator

from lw_lab.core.config import settings
from lw_lab.enums import ExperimentMode, FamilyEnum, MechanismEnum, ValuationClass


class RandomInstanceSpec(BaseModel):
    n: int = Field(..., ge=1)
    m: int = Field(..., ge=1)
    h: int = Field(default=1, ge=1)
    epsilon: float = Field(default_factory=lambda: settings.DEFAULT_BID_GRID, gt=0)
    value_range: tuple[float, float] = (0.0, 1.0)
    budget_range: tuple[float, float] = (0.0, 1.0)
    valuation_class: ValuationClass = ValuationClass.ADDITIVE
    clauses: int = Field(default=1, ge=1)

    model_config = ConfigDict(frozen=True)


class InstanceSource(BaseModel):
    """Exactly one of: an instance file, a certified family, or a random spec."""
    id: str | None = None
    path: str | None = None
    profile: str | None = None
    family: FamilyEnum | None = None
    mechanism: MechanismEnum | None = None
    params: dict[str, float | int] = {}
    random: RandomInstanceSpec | None = None
    seed: int | None = None

    @model_validator(mode="after")
    def check_one_source(self) -> "InstanceSource":
        given = [x is not None for x in (self.path, self.family, self.random)]
        if sum(given) != 1:
            raise ValueError("an instance source needs exactly one of path, family or random")
        if self.family is FamilyEnum.NO_PNE:
            raise ValueError("the no-pne family is run through gen and brd, not as a certified source")
        return self


class RandomFamily(BaseModel):
    spec: RandomInstanceSpec
    count: int = Field(..., ge=0)


class ExperimentConfig(BaseModel):
    instances: list[InstanceSource] = []
    random_family: RandomFamily | None = None
    # None keeps the mechanism and tie-break that come with each certified instance
    mechanism: MechanismEnum | None = None
    tie_break: str | None = None
    alpha: float = Field(default_factory=lambda: settings.DEFAULT_ALPHA, gt=1)
    gamma: float = Field(default_factory=lambda: settings.DEFAULT_GAMMA, gt=1)
    seed: int = 0
    output: str | None = None
    modes: list[ExperimentMode] = [ExperimentMode.VERIFY]
    include_timing: bool = False


class ExperimentRow(BaseModel):
    instance_id: str
    mode: ExperimentMode
    n: int | None = None
    m: int | None = None
    h: int | None = None
    mechanism: str | None = None
    opt: float | None = None
    llp: float | None = None
    eq_lw: float | None = None
    lpoa: float | None = None
    verdict: bool | None = None
    converged: bool | None = None
    audit_flags: str | None = None
    error: str | None = None
    wall_time: float | None = None

    model_config = ConfigDict(ser_json_inf_nan="strings")


class ExperimentSummary(BaseModel):
    rows: int
    errors: int
    failed_verdicts: int
    brd_runs: int = 0
    brd_converged: int = 0
    convergence_rate: float | None = None
    min_lw_opt_ratio: float | None = None
    mean_lw_opt_ratio: float | None = None


class ExperimentResult(BaseModel):
    manifest: dict
    rows: list[ExperimentRow]
    summary: ExperimentSummary

    model_config = ConfigDict(ser_json_inf_nan="strings")

    @property
    def any_verdict_false(self) -> bool:
        return self.summary.failed_verdicts > 0
