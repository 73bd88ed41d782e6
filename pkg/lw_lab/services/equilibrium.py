from __future__ import annotations

import hashlib
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from lw_lab.core.config import settings
from lw_lab.core.exceptions import InputError, SizeLimitError
from lw_lab.core.logging import logger
from lw_lab.enums import MechanismEnum
from lw_lab.schemas.auction import BidProfile, HouseDemand, TieBreakRule, WeightedOutcome
from lw_lab.schemas.equilibrium import (
    BayesianGame,
    BayesianStrategy,
    DeviationWitness,
    DynamicsResult,
    EquilibriumSearchResult,
    EquilibriumStats,
    MixedProfile,
    SupportPoint,
    Verdict,
)
from lw_lab.schemas.game import Bidder, GameInstance
from lw_lab.services.game_core import require_valid
from lw_lab.services.mechanisms import NEG_INFINITY, RawOutcome, check_no_overbidding, check_no_overbudget, decode_row
from lw_lab.services.payoffs import STRUCTURED_FAMILY, Joint, PayoffOracle, Support
from lw_lab.utils.grid import scaled_tol

Profile = BidProfile | HouseDemand | MixedProfile


@dataclass(frozen=True)
class _BidderCheck:
    bidder: int
    type_index: int | None
    current: float
    gain: float
    row: np.ndarray
    rows_checked: int
    restricted: bool

    @property
    def profitable(self) -> bool:
        if self.current == NEG_INFINITY:
            return True
        return self.gain > scaled_tol(self.current)


def as_mixed(g: GameInstance, mechanism: MechanismEnum, profile: Profile) -> MixedProfile:
    if isinstance(profile, MixedProfile):
        return profile
    if isinstance(profile, HouseDemand):
        return MixedProfile.from_demands(profile)
    if not mechanism.per_share:
        raise InputError("house clearing needs (count, price) demands")
    return MixedProfile.from_bids(profile)


def _check_bidder(
    oracle: PayoffOracle,
    i: int,
    own: Support,
    others: Joint,
    restricted: bool,
    type_index: int | None = None,
) -> _BidderCheck:
    current = oracle.expected_utility(i, own, others)
    rows, was_restricted = oracle.deviation_rows(i, restricted)
    utils = oracle.deviation_utilities(i, others, rows)
    best = int(np.argmax(utils))
    gain = float("inf") if current == NEG_INFINITY else float(utils[best] - current)
    return _BidderCheck(
        bidder=i,
        type_index=type_index,
        current=current,
        gain=gain,
        row=rows[best],
        rows_checked=int(rows.shape[0]),
        restricted=was_restricted,
    )


def _run_checks(tasks: list) -> list[_BidderCheck]:
    # results keep task order whatever the completion order
    with ThreadPoolExecutor(max_workers=settings.thread_count) as executor:
        return list(executor.map(lambda task: task(), tasks))


def _assemble(g: GameInstance, mechanism: MechanismEnum, checks: list[_BidderCheck], flags: list[str]) -> Verdict:
    restricted = any(c.restricted for c in checks)
    offenders = [c for c in checks if c.profitable]
    worst = None
    if offenders:
        top = max(c.gain for c in offenders)
        first = next(c for c in offenders if c.gain == top)
        worst = DeviationWitness(
            bidder=first.bidder,
            type_index=first.type_index,
            row=decode_row(g, mechanism, first.row),
            gain=first.gain,
        )

    if worst is not None:
        label = "not an equilibrium"
    elif restricted:
        label = "equilibrium w.r.t. restricted deviations"
    else:
        label = "equilibrium"

    return Verdict(
        is_equilibrium=worst is None,
        label=label,
        worst_deviation=worst,
        checked_deviations=sum(c.rows_checked for c in checks),
        restricted=restricted,
        restriction=STRUCTURED_FAMILY if restricted else None,
        bidder_utilities=[c.current for c in checks],
        assumption_flags=flags,
    )


def _assumption_flags(g: GameInstance, mechanism: MechanismEnum, s: MixedProfile) -> list[str]:
    if mechanism is not MechanismEnum.SECOND:
        return []
    flags = []
    for i, support in enumerate(s.strategies):
        for point in support:
            rows = [[0.0] * g.h for _ in range(g.m)]
            bids = BidProfile(bids=[point.row if k == i else rows for k in range(g.n)])
            if not check_no_overbidding(g, i, bids):
                flags.append(f"bidder {i} overbids")
                break
            if not check_no_overbudget(g, i, bids):
                flags.append(f"bidder {i} overbudgets")
                break
    return flags


# ── Verification ──────────────────────────────────────────────

def deviation_space(
    g: GameInstance,
    i: int,
    mechanism: MechanismEnum = MechanismEnum.FIRST,
    restricted: bool = False,
) -> tuple[np.ndarray, str | None]:
    """
    Budget-feasible grid rows of bidder i as an (rows, m, width) array of bids, or of
    (count, price) demands under house clearing, and the restriction applied if any.
    """
    require_valid(g)
    oracle = PayoffOracle(g, mechanism, TieBreakRule.lexicographic())
    rows, was_restricted = oracle.deviation_rows(i, restricted)
    scaled = rows.astype(float).reshape(rows.shape[0], g.m, -1)
    if mechanism.per_share:
        scaled = scaled * g.epsilon
    else:
        scaled[:, :, 1] *= g.epsilon
    return scaled, STRUCTURED_FAMILY if was_restricted else None


def verify_mixed_ne(
    g: GameInstance,
    mechanism: MechanismEnum,
    s: MixedProfile,
    t: TieBreakRule,
    restricted: bool = False,
) -> Verdict:
    require_valid(g)
    if s.joint_size > settings.MAX_JOINT_SUPPORT:
        raise SizeLimitError("joint support", s.joint_size, settings.MAX_JOINT_SUPPORT, "MAX_JOINT_SUPPORT")

    oracle = PayoffOracle(g, mechanism, t)
    supports = oracle.encode_mixed(s)
    tasks = [
        (lambda i=i: _check_bidder(oracle, i, supports[i], oracle.joint(supports, skip=i), restricted))
        for i in range(g.n)
    ]
    verdict = _assemble(g, mechanism, _run_checks(tasks), _assumption_flags(g, mechanism, s))

    logger.info(
        f"Equilibrium check | mechanism={mechanism.value} | ties={t.label()} | joint={s.joint_size} | "
        f"rows={verdict.checked_deviations} | verdict={verdict.label}"
    )
    return verdict


def verify_pure_ne(
    g: GameInstance,
    mechanism: MechanismEnum,
    b: BidProfile | HouseDemand,
    t: TieBreakRule,
    restricted: bool = False,
) -> Verdict:
    return verify_mixed_ne(g, mechanism, as_mixed(g, mechanism, b), t, restricted)


def _type_game(bg: BayesianGame, i: int, type_index: int) -> GameInstance:
    bidders = []
    for k, bidder in enumerate(bg.bidders):
        kind = bidder.types[type_index if k == i else 0]
        bidders.append(Bidder(budget=kind.budget, valuation=kind.valuation))
    return GameInstance.build(bidders, m=bg.m, h=bg.h, epsilon=bg.epsilon)


def verify_bayesian_ne(
    bg: BayesianGame,
    mechanism: MechanismEnum,
    strategy: BayesianStrategy,
    t: TieBreakRule,
) -> Verdict:
    """Interim check: every bidder, every realised type, against every budget-feasible grid row."""
    if len(strategy.strategies) != bg.n:
        raise InputError(f"strategy covers {len(strategy.strategies)} bidders, game has {bg.n}")
    for i, bidder in enumerate(bg.bidders):
        total = sum(kind.probability for kind in bidder.types)
        if abs(total - 1.0) > 1e-9:
            raise InputError(f"bidder {i} type probabilities sum to {total}")
        if len(strategy.strategies[i]) != len(bidder.types):
            raise InputError(f"bidder {i} has {len(bidder.types)} types but {len(strategy.strategies[i])} strategies")

    # a bidder's opponents are seen through the type-mixture of their rows
    marginals = []
    for i, bidder in enumerate(bg.bidders):
        points = [
            SupportPoint(row=point.row, probability=kind.probability * point.probability)
            for kind, support in zip(bidder.types, strategy.strategies[i])
            for point in support
            if kind.probability * point.probability > 0
        ]
        marginals.append(points)

    size = 1
    for points in marginals:
        size *= len(points)
    if size > settings.MAX_JOINT_SUPPORT:
        raise SizeLimitError("joint type and support enumeration", size, settings.MAX_JOINT_SUPPORT, "MAX_JOINT_SUPPORT")

    tasks = []
    for i, bidder in enumerate(bg.bidders):
        for tau, kind in enumerate(bidder.types):
            if kind.probability <= 0:
                continue
            g = require_valid(_type_game(bg, i, tau))
            oracle = PayoffOracle(g, mechanism, t)
            supports = [oracle.encode_support(points) for points in marginals]
            own = oracle.encode_support(strategy.strategies[i][tau])
            tasks.append(
                lambda oracle=oracle, i=i, tau=tau, supports=supports, own=own:
                _check_bidder(oracle, i, own, oracle.joint(supports, skip=i), False, tau)
            )

    reference = _type_game(bg, 0, 0)
    verdict = _assemble(reference, mechanism, _run_checks(tasks), [])
    logger.info(f"Bayesian check | bidders={bg.n} | checks={len(tasks)} | verdict={verdict.label}")
    return verdict


# ── Dynamics and exhaustive search ────────────────────────────

def _profile_hash(levels: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(levels, dtype=np.int64).tobytes()).hexdigest()[:16]


def _pure_levels(oracle: PayoffOracle, profile: Profile) -> np.ndarray:
    s = as_mixed(oracle.g, oracle.mechanism, profile)
    if not s.is_pure:
        raise InputError("best-response dynamics starts from a pure profile")
    return np.vstack([support[0][0] for support in oracle.encode_mixed(s)])


def _to_profile(oracle: PayoffOracle, levels: np.ndarray) -> MixedProfile:
    g, mechanism = oracle.g, oracle.mechanism
    return MixedProfile(strategies=[
        [SupportPoint(row=decode_row(g, mechanism, levels[i]), probability=1.0)] for i in range(g.n)
    ])


def zero_profile(g: GameInstance, mechanism: MechanismEnum) -> MixedProfile:
    width = g.h if mechanism.per_share else 2
    row = [[0.0] * width for _ in range(g.m)]
    return MixedProfile(strategies=[[SupportPoint(row=row, probability=1.0)] for _ in range(g.n)])


def best_response_dynamics(
    g: GameInstance,
    mechanism: MechanismEnum,
    t: TieBreakRule,
    initial: Profile | None = None,
    max_rounds: int | None = None,
) -> DynamicsResult:
    require_valid(g)
    max_rounds = max_rounds or settings.BRD_MAX_ROUNDS
    oracle = PayoffOracle(g, mechanism, t)
    levels = _pure_levels(oracle, initial or zero_profile(g, mechanism)).copy()
    rows = [oracle.deviation_rows(i)[0] for i in range(g.n)]

    seen = {_profile_hash(levels): 0}
    moved_rounds = 0
    for round_no in range(1, max_rounds + 1):
        changed = False
        for i in range(g.n):
            others = [(1.0, levels)]
            current = oracle.expected_utility(i, [(levels[i], 1.0)], others)
            utils = oracle.deviation_utilities(i, others, rows[i])
            best = int(np.argmax(utils))
            if current == NEG_INFINITY or utils[best] > current + scaled_tol(current):
                levels[i] = rows[i][best]
                changed = True

        if not changed:
            logger.info(f"Best-response dynamics converged | rounds={moved_rounds}")
            return DynamicsResult(converged=True, rounds=moved_rounds, profile=_to_profile(oracle, levels))

        moved_rounds = round_no
        key = _profile_hash(levels)
        if key in seen:
            length = round_no - seen[key]
            logger.info(f"Best-response dynamics cycled | rounds={round_no} | cycle_length={length}")
            return DynamicsResult(
                converged=False,
                rounds=round_no,
                profile=_to_profile(oracle, levels),
                cycle_detected=True,
                cycle_length=length,
                repeated_hash=key,
            )
        seen[key] = round_no

    logger.warning(f"Best-response dynamics hit the round limit | rounds={max_rounds}")
    return DynamicsResult(converged=False, rounds=max_rounds, profile=_to_profile(oracle, levels))


def find_pure_equilibria(
    g: GameInstance,
    mechanism: MechanismEnum,
    t: TieBreakRule,
    keep: int = 100,
) -> EquilibriumSearchResult:
    """
    Exhaustive PNE search over budget-feasible grid profiles. The last bidder's best responses
    are computed for every combination of the others' rows; the remaining bidders are then
    checked against memoised utility vectors.
    """
    require_valid(g)
    oracle = PayoffOracle(g, mechanism, t)
    spaces = [oracle.deviation_rows(i)[0] for i in range(g.n)]
    last = g.n - 1

    outer = 1
    for rows in spaces[:last]:
        outer *= rows.shape[0]
    if outer > settings.MAX_JOINT_SUPPORT:
        raise SizeLimitError("exhaustive profile search", outer, settings.MAX_JOINT_SUPPORT, "MAX_JOINT_SUPPORT")

    width = spaces[0].shape[1]
    cache: dict[tuple, np.ndarray] = {}

    def utilities(i: int, idx: tuple[int, ...]) -> np.ndarray:
        key = (i,) + idx[:i] + idx[i + 1:]
        if key not in cache:
            levels = np.vstack([
                spaces[k][idx[k]] if k != i else np.zeros(width, dtype=np.int64) for k in range(g.n)
            ])
            cache[key] = oracle.deviation_utilities(i, [(1.0, levels)], spaces[i])
        return cache[key]

    found: list[MixedProfile] = []
    count = 0
    examined = 0
    for head in itertools.product(*[range(rows.shape[0]) for rows in spaces[:last]]):
        idx = head + (0,)
        last_utils = utilities(last, idx)
        top = last_utils.max()
        for b in np.flatnonzero(last_utils >= top - scaled_tol(top)):
            examined += 1
            full = head + (int(b),)
            stable = True
            for i in range(last):
                u = utilities(i, full)
                if u[full[i]] < u.max() - scaled_tol(u.max()):
                    stable = False
                    break
            if stable:
                count += 1
                if len(found) < keep:
                    levels = np.vstack([spaces[k][full[k]] for k in range(g.n)])
                    found.append(_to_profile(oracle, levels))

    logger.info(f"Exhaustive PNE search | candidates={examined} | equilibria={count}")
    return EquilibriumSearchResult(equilibria=found, count=count, profiles_examined=examined)


# ── Statistics ────────────────────────────────────────────────

def _enumerate(oracle: PayoffOracle, s: MixedProfile) -> list[tuple[float, RawOutcome]]:
    supports = oracle.encode_mixed(s)
    out = []
    for p, levels in oracle.joint(supports):
        for q, raw in oracle.outcomes(levels):
            out.append((p * q, raw))
    return out


def mixed_outcome_distribution(
    g: GameInstance,
    mechanism: MechanismEnum,
    s: Profile,
    t: TieBreakRule,
) -> list[WeightedOutcome]:
    oracle = PayoffOracle(g, mechanism, t)
    return [
        WeightedOutcome(probability=p, outcome=raw.to_schema())
        for p, raw in _enumerate(oracle, as_mixed(g, mechanism, s))
    ]


def expected_profile_lw(g: GameInstance, mechanism: MechanismEnum, s: Profile, t: TieBreakRule) -> float:
    oracle = PayoffOracle(g, mechanism, t)
    return sum(p * oracle.raw_liquid_welfare(raw) for p, raw in _enumerate(oracle, as_mixed(g, mechanism, s)))


def equilibrium_stats(
    g: GameInstance,
    mechanism: MechanismEnum,
    s: Profile,
    t: TieBreakRule,
    alpha: float,
) -> EquilibriumStats:
    require_valid(g)
    oracle = PayoffOracle(g, mechanism, t)
    prices = np.zeros((g.m, g.h))
    counts = np.zeros((g.n, g.m))
    hit = np.zeros(g.n)
    exp_revenue = 0.0
    exp_lw = 0.0
    for p, raw in _enumerate(oracle, as_mixed(g, mechanism, s)):
        prices += p * raw.prices
        counts += p * raw.counts
        exp_revenue += p * float(raw.payments.sum())
        for i in range(g.n):
            value = oracle.bidder_value(i, raw.counts[i])
            exp_lw += p * min(value, g.bidders[i].budget)
            if value >= g.bidders[i].budget - settings.TOLERANCE:
                hit[i] += p

    return EquilibriumStats(
        alpha=alpha,
        p_bar=(alpha * prices.sum(axis=1)).tolist(),
        q=(counts / g.h).tolist(),
        budget_hit_prob=np.clip(hit, 0.0, 1.0).tolist(),
        exp_revenue=exp_revenue,
        exp_lw=exp_lw,
        exp_share_prices=prices.tolist(),
    )


def share_price_distributions(
    g: GameInstance,
    mechanism: MechanismEnum,
    s: Profile,
    t: TieBreakRule,
) -> list[list[tuple[float, list[float]]]]:
    """Per item, the exact distribution of the per-share price vector."""
    oracle = PayoffOracle(g, mechanism, t)
    merged: list[dict[tuple, float]] = [{} for _ in range(g.m)]
    for p, raw in _enumerate(oracle, as_mixed(g, mechanism, s)):
        for j in range(g.m):
            key = tuple(round(float(x), 12) for x in raw.prices[j])
            merged[j][key] = merged[j].get(key, 0.0) + p
    return [[(p, list(key)) for key, p in sorted(item.items())] for item in merged]
