"""
Generators for the lower-bound and tightness constructions. Each returns the game, the
candidate equilibrium with its mechanism and tie-breaking rule, and the OPT/LW certificate.
Bidders are 0-indexed: the construction's player p is bidder p-1.
"""
from __future__ import annotations

from lw_lab.core.config import settings
from lw_lab.core.exceptions import InputError
from lw_lab.core.logging import logger
from lw_lab.enums import FamilyEnum, MechanismEnum
from lw_lab.schemas.auction import TieBreakRule
from lw_lab.schemas.equilibrium import MixedProfile, SupportPoint
from lw_lab.schemas.game import AdditiveValuation, Bidder, GameInstance
from lw_lab.schemas.instances import CertifiedInstance
from lw_lab.services.game_core import require_valid
from lw_lab.utils.grid import is_grid_multiple

LOWER_BOUND_GRID = 0.25


def _bidder(budget: float, values: list[float]) -> Bidder:
    return Bidder(budget=budget, valuation=AdditiveValuation(values=values))


def _pure(rows: list[list[list[float]]]) -> MixedProfile:
    return MixedProfile(strategies=[[SupportPoint(row=row, probability=1.0)] for row in rows])


def _share_row(m: int, h: int, item: int, share: int, bid: float) -> list[list[float]]:
    row = [[0.0] * h for _ in range(m)]
    row[item][share] = bid
    return row


def _demand_row(m: int, item: int, count: int, price: float) -> list[list[float]]:
    row = [[0.0, 0.0] for _ in range(m)]
    row[item] = [float(count), price]
    return row


def gen_tightness(
    epsilon: float = 0.1,
    mechanism: MechanismEnum = MechanismEnum.SECOND,
    grid: float | None = None,
) -> CertifiedInstance:
    """Two bidders whose equilibrium LW is 10 against an optimum of 20 - epsilon."""
    if not 0 < epsilon < 10:
        raise InputError(f"epsilon must lie in (0, 10), got {epsilon}")
    grid = grid or epsilon / 2
    if grid > epsilon / 2 + 1e-12:
        raise InputError(f"grid {grid} must not exceed epsilon/2 = {epsilon / 2}")
    if not (is_grid_multiple(10.0, grid) and is_grid_multiple(10 - epsilon, grid)):
        raise InputError(f"budgets 10 and {10 - epsilon} are not on the grid {grid}")
    if mechanism is MechanismEnum.HOUSE:
        raise InputError("the tightness construction is stated for per-share auctions")

    budget_1 = 10 - epsilon
    g = GameInstance.build(
        [_bidder(budget_1, [10.0, 0.0]), _bidder(10.0, [10.0, 10.0])],
        m=2, h=1, epsilon=grid,
    )
    if mechanism is MechanismEnum.SECOND:
        rows = [[[0.0], [0.0]], [[10 - grid], [grid]]]
    else:
        # bidder 2 outbids by one grid step; ties favour bidder 1
        rows = [[[budget_1], [0.0]], [[budget_1 + grid], [grid]]]

    return CertifiedInstance(
        family=FamilyEnum.TIGHTNESS,
        params={"epsilon": epsilon},
        game=require_valid(g),
        mechanism=mechanism,
        tie_break=TieBreakRule.lexicographic(),
        profile=_pure(rows),
        claimed_opt=20 - epsilon,
        claimed_eq_lw=10.0,
        source_ref="tightness example for pure equilibria: LPoA arbitrarily close to 2",
    )


def _unit_grid(grid: float) -> float:
    if grid <= 0 or not is_grid_multiple(1.0, grid):
        raise InputError(f"grid {grid} must divide the unit budget")
    return grid


def _rand_tiebreak_values(n: int) -> list[float]:
    return [float(n ** 4)] + [1.0] * (n - 1)


def gen_rand_tiebreak_lb(n: int, grid: float = LOWER_BOUND_GRID) -> CertifiedInstance:
    """Everyone bids the full budget on item 1 and ties are broken uniformly: LW 1, OPT n."""
    if n < 2:
        raise InputError(f"n must be at least 2, got {n}")
    g = GameInstance.build(
        [_bidder(1.0, _rand_tiebreak_values(n)) for _ in range(n)],
        m=n, h=1, epsilon=_unit_grid(grid),
    )
    return CertifiedInstance(
        family=FamilyEnum.RAND_TIEBREAK,
        params={"n": n},
        game=require_valid(g),
        mechanism=MechanismEnum.FIRST,
        tie_break=TieBreakRule.uniform(),
        profile=_pure([_share_row(n, 1, 0, 0, 1.0) for _ in range(n)]),
        claimed_opt=float(n),
        claimed_eq_lw=1.0,
        source_ref="pure equilibrium under uniform random ties with LPoA n",
    )


def gen_rand_tiebreak_shares_lb(n: int, h: int, grid: float = LOWER_BOUND_GRID) -> CertifiedInstance:
    """
    Bidder i bids its budget on share i mod h of item 1, so every share of item 1 draws n/h
    tied bidders. Only h bidders win and LW is h.
    """
    if h < 1 or n < h or n % h:
        raise InputError(f"n must be a positive multiple of h, got n={n}, h={h}")
    m = n
    g = GameInstance.build(
        [_bidder(1.0, _rand_tiebreak_values(n)) for _ in range(n)],
        m=m, h=h, epsilon=_unit_grid(grid),
    )
    return CertifiedInstance(
        family=FamilyEnum.RAND_TIEBREAK_SHARES,
        params={"n": n, "h": h},
        game=require_valid(g),
        mechanism=MechanismEnum.FIRST,
        tie_break=TieBreakRule.uniform(),
        profile=_pure([_share_row(m, h, 0, i % h, 1.0) for i in range(n)]),
        claimed_opt=float(n),
        claimed_eq_lw=float(h),
        source_ref="pure equilibrium under uniform random ties with shares: LPoA at least n/h",
    )


def _mixed_values(n: int) -> list[list[float]]:
    high = float(2 ** (2 * n))
    return [
        [high, high] + [1.0 if player <= n - 2 else 0.0] * (n - 2)
        for player in range(1, n + 1)
    ]


def _check_mixed_n(n: int, minimum: int) -> None:
    if n < minimum:
        raise InputError(f"n must be at least {minimum}, got {n}")
    if n > settings.MAX_MIXED_N:
        raise InputError(f"n={n} exceeds MAX_MIXED_N={settings.MAX_MIXED_N}; values 2^(2n) lose precision")


def _mixed_strategy(pure_item: int | None, on_item) -> list[SupportPoint]:
    if pure_item is not None:
        return [SupportPoint(row=on_item(pure_item), probability=1.0)]
    return [SupportPoint(row=on_item(0), probability=0.5), SupportPoint(row=on_item(1), probability=0.5)]


def gen_mixed_lb(n: int, grid: float = LOWER_BOUND_GRID) -> CertifiedInstance:
    """
    Lexicographic ties. Players n and n-2 bid their budget on item 1, players n-1 and n-3 on
    item 2, and players 1..n-4 pick one of the two items with probability 1/2 each.
    """
    _check_mixed_n(n, 5)
    g = GameInstance.build([_bidder(1.0, values) for values in _mixed_values(n)], m=n, h=1, epsilon=_unit_grid(grid))

    pure = {n: 0, n - 2: 0, n - 1: 1, n - 3: 1}
    strategies = [
        _mixed_strategy(pure.get(player), lambda item: _share_row(n, 1, item, 0, 1.0))
        for player in range(1, n + 1)
    ]
    return CertifiedInstance(
        family=FamilyEnum.MIXED,
        params={"n": n},
        game=require_valid(g),
        mechanism=MechanismEnum.FIRST,
        tie_break=TieBreakRule.lexicographic(),
        profile=MixedProfile(strategies=strategies),
        claimed_opt=float(n),
        claimed_eq_lw=2.0,
        source_ref="mixed equilibrium under lexicographic ties with LPoA n/2",
    )


def gen_mixed_shares_lb(n: int, h: int, grid: float = LOWER_BOUND_GRID) -> CertifiedInstance:
    """
    House clearing with lexicographic ties. h+1 players demand one share of item 1 at price 1,
    h+1 others one share of item 2, the rest mix; only 2h players ever win.
    """
    if h < 1:
        raise InputError(f"h must be at least 1, got {h}")
    _check_mixed_n(n, 2 * h + 3)
    g = GameInstance.build([_bidder(1.0, values) for values in _mixed_values(n)], m=n, h=h, epsilon=_unit_grid(grid))

    pure = {n - 2 * k: 0 for k in range(h + 1)} | {n - 2 * k - 1: 1 for k in range(h + 1)}
    strategies = [
        _mixed_strategy(pure.get(player), lambda item: _demand_row(n, item, 1, 1.0))
        for player in range(1, n + 1)
    ]
    return CertifiedInstance(
        family=FamilyEnum.MIXED_SHARES,
        params={"n": n, "h": h},
        game=require_valid(g),
        mechanism=MechanismEnum.HOUSE,
        tie_break=TieBreakRule.lexicographic(),
        profile=MixedProfile(strategies=strategies),
        claimed_opt=float(n),
        claimed_eq_lw=float(2 * h),
        source_ref="mixed equilibrium with shares under lexicographic ties: LPoA n/(2h)",
    )


def gen_no_pure_ne(m: int = 3, epsilon: float = 0.05) -> GameInstance:
    """Two bidders, m identical items; no pure equilibrium exists while B2/m < B1."""
    if not 2 <= m < 11:
        raise InputError(f"m must lie in [2, 10], got {m}")
    g = GameInstance.build(
        [_bidder(1.0, [1.0] * m), _bidder(1.1, [1.1] * m)],
        m=m, h=1, epsilon=epsilon,
    )
    return require_valid(g)


GENERATORS = {
    FamilyEnum.TIGHTNESS: gen_tightness,
    FamilyEnum.RAND_TIEBREAK: gen_rand_tiebreak_lb,
    FamilyEnum.MIXED: gen_mixed_lb,
    FamilyEnum.RAND_TIEBREAK_SHARES: gen_rand_tiebreak_shares_lb,
    FamilyEnum.MIXED_SHARES: gen_mixed_shares_lb,
}

DEFAULT_PARAMS = {
    FamilyEnum.TIGHTNESS: {"epsilon": 0.1},
    FamilyEnum.RAND_TIEBREAK: {"n": 4},
    FamilyEnum.MIXED: {"n": 5},
    FamilyEnum.RAND_TIEBREAK_SHARES: {"n": 6, "h": 2},
    FamilyEnum.MIXED_SHARES: {"n": 7, "h": 2},
    FamilyEnum.NO_PNE: {"m": 3},
}

_INTEGER_PARAMS = {"n", "h", "m"}


def parse_params(text: str | None) -> dict[str, float | int]:
    """Parses `n=4,h=2` style parameter lists."""
    params: dict[str, float | int] = {}
    if not text:
        return params
    for part in text.split(","):
        key, sep, value = part.partition("=")
        key = key.strip()
        if not sep or not key:
            raise InputError(f"malformed parameter '{part}', expected key=value")
        try:
            params[key] = int(value) if key in _INTEGER_PARAMS else float(value)
        except ValueError:
            raise InputError(f"parameter {key} has non-numeric value '{value}'")
    return params


def generate(family: FamilyEnum, params: dict | None = None, mechanism: MechanismEnum | None = None) -> CertifiedInstance:
    if family is FamilyEnum.NO_PNE:
        raise InputError("the no-pne family has no equilibrium to certify; use gen_no_pure_ne")
    merged = {**DEFAULT_PARAMS[family], **(params or {})}
    try:
        if family is FamilyEnum.TIGHTNESS:
            instance = gen_tightness(merged["epsilon"], mechanism or MechanismEnum.SECOND, merged.get("grid"))
        else:
            instance = GENERATORS[family](**merged)
    except TypeError as e:
        raise InputError(f"bad parameters for {family.value}: {e}")
    logger.info(f"Generated certified instance | id={instance.instance_id}")
    return instance


def certified_suite() -> list[CertifiedInstance]:
    """The default suite: every family at its default parameters, tightness under both pricing rules."""
    suite = [generate(FamilyEnum.TIGHTNESS, mechanism=MechanismEnum.SECOND)]
    suite.append(generate(FamilyEnum.TIGHTNESS, mechanism=MechanismEnum.FIRST))
    for family in (FamilyEnum.RAND_TIEBREAK, FamilyEnum.MIXED, FamilyEnum.RAND_TIEBREAK_SHARES, FamilyEnum.MIXED_SHARES):
        suite.append(generate(family))
    return suite
