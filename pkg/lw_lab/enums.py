import enum


class MechanismEnum(str, enum.Enum):
    FIRST  = "first"
    SECOND = "second"
    HOUSE  = "house"

    @classmethod
    def values(cls) -> list[str]:
        return [item.value for item in cls]

    @property
    def per_share(self) -> bool:
        return self is not MechanismEnum.HOUSE


class TieBreakKind(str, enum.Enum):
    LEXICOGRAPHIC = "lex"
    UNIFORM       = "uniform"

    @classmethod
    def values(cls) -> list[str]:
        return [item.value for item in cls]


class ValuationClass(str, enum.Enum):
    ADDITIVE = "additive"
    XOS      = "xos"

    @classmethod
    def values(cls) -> list[str]:
        return [item.value for item in cls]


class DeviationKind(str, enum.Enum):
    INTEGRAL   = "integral"
    FRACTIONAL = "fractional"

    @classmethod
    def values(cls) -> list[str]:
        return [item.value for item in cls]


class ExperimentMode(str, enum.Enum):
    VERIFY = "verify"
    OPT    = "opt"
    LLP    = "llp"
    LPOA   = "lpoa"
    AUDIT  = "audit"
    BRD    = "brd"

    @classmethod
    def values(cls) -> list[str]:
        return [item.value for item in cls]


class FamilyEnum(str, enum.Enum):
    TIGHTNESS            = "tightness"
    RAND_TIEBREAK        = "rand-tiebreak"
    MIXED                = "mixed"
    RAND_TIEBREAK_SHARES = "rand-tiebreak-shares"
    MIXED_SHARES         = "mixed-shares"
    NO_PNE               = "no-pne"

    @classmethod
    def values(cls) -> list[str]:
        return [item.value for item in cls]
