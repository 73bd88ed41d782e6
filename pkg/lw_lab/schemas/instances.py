from pydantic import BaseModel, ConfigDict, model_validator

from lw_lab.enums import FamilyEnum, MechanismEnum
from lw_lab.schemas.auction import TieBreakRule
from lw_lab.schemas.equilibrium import MixedProfile
from lw_lab.schemas.game import GameInstance


class CertifiedInstance(BaseModel):
    family: FamilyEnum
    params: dict[str, float | int]
    game: GameInstance
    mechanism: MechanismEnum
    tie_break: TieBreakRule
    profile: MixedProfile
    claimed_opt: float
    claimed_eq_lw: float
    source_ref: str

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_certificate(self) -> "CertifiedInstance":
        if not self.claimed_opt >= self.claimed_eq_lw > 0:
            raise ValueError(f"certificate needs OPT >= LW > 0, got {self.claimed_opt} and {self.claimed_eq_lw}")
        return self

    @property
    def claimed_lpoa(self) -> float:
        return self.claimed_opt / self.claimed_eq_lw

    @property
    def instance_id(self) -> str:
        args = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"{self.family.value}({args})/{self.mechanism.value}"
