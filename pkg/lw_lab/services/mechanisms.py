"""
Simultaneous share auctions.

Bids are handled internally as integer multiples of the grid step ("levels"), so ties
are detected exactly. A per-share profile is an (n, m*h) level array; a house-clearing
profile is an (n, 2m) array holding (count, price level) per item.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from lw_lab.core.config import settings
from lw_lab.core.exceptions import InputError, ModelError, SizeLimitError
from lw_lab.core.logging import logger
from lw_lab.enums import MechanismEnum
from lw_lab.schemas.auction import BidProfile, HouseDemand, Outcome, TieBreakRule, WeightedOutcome
from lw_lab.schemas.game import AdditiveValuation, GameInstance, ShareBundle
from lw_lab.services.game_core import eval_valuation
from lw_lab.utils.grid import approx_le, to_level

NEG_INFINITY = float("-inf")


@dataclass(frozen=True)
class RawOutcome:
    winners: np.ndarray   # (m, h), -1 when unallocated
    payments: np.ndarray  # (n,)
    counts: np.ndarray    # (n, m)
    prices: np.ndarray    # (m, h)

    def to_schema(self) -> Outcome:
        return Outcome(
            winners=self.winners.astype(int).tolist(),
            payments=[float(p) for p in self.payments],
            bundles=[ShareBundle(counts=row.astype(int).tolist()) for row in self.counts],
        )


# ── Encoding ──────────────────────────────────────────────────

def encode_row(g: GameInstance, mechanism: MechanismEnum, row: list[list[float]]) -> np.ndarray:
    if len(row) != g.m:
        raise InputError(f"row has {len(row)} items, instance has {g.m}")
    if mechanism.per_share:
        levels = []
        for j, shares in enumerate(row):
            if len(shares) != g.h:
                raise InputError(f"item {j} has {len(shares)} share bids, expected {g.h}")
            levels.extend(to_level(b, g.epsilon) for b in shares)
        return np.array(levels, dtype=np.int64)

    flat = []
    for j, demand in enumerate(row):
        if len(demand) != 2:
            raise InputError(f"item {j} demand must be (count, price)")
        count, price = demand
        if count < 0 or count > g.h or int(count) != count:
            raise InputError(f"item {j} demand count {count} outside [0, {g.h}]")
        flat.extend([int(count), to_level(price, g.epsilon, "price")])
    return np.array(flat, dtype=np.int64)


def decode_row(g: GameInstance, mechanism: MechanismEnum, key: Iterable[int]) -> list[list[float]]:
    key = [int(x) for x in key]
    if mechanism.per_share:
        return [[key[j * g.h + l] * g.epsilon for l in range(g.h)] for j in range(g.m)]
    return [[float(key[2 * j]), key[2 * j + 1] * g.epsilon] for j in range(g.m)]


def encode_bids(g: GameInstance, b: BidProfile) -> np.ndarray:
    if len(b.bids) != g.n:
        raise InputError(f"profile has {len(b.bids)} bidders, instance has {g.n}")
    return np.vstack([encode_row(g, MechanismEnum.FIRST, row) for row in b.bids])


def encode_demands(g: GameInstance, d: HouseDemand) -> np.ndarray:
    if len(d.demands) != g.n:
        raise InputError(f"demand has {len(d.demands)} bidders, instance has {g.n}")
    return np.vstack([
        encode_row(g, MechanismEnum.HOUSE, [[c, p] for c, p in row]) for row in d.demands
    ])


# ── Per-share allocation ──────────────────────────────────────

def _second_highest(levels: np.ndarray) -> np.ndarray:
    if levels.shape[0] < 2:
        return np.zeros(levels.shape[1], dtype=levels.dtype)
    return np.sort(levels, axis=0)[-2]


def _share_candidates(levels: np.ndarray, tie: TieBreakRule) -> list[list[int]]:
    n = levels.shape[0]
    positions = tie.positions(n)
    top = levels.max(axis=0)
    candidates = []
    for s in range(levels.shape[1]):
        if top[s] <= 0:
            candidates.append([-1])
            continue
        tied = [int(i) for i in np.flatnonzero(levels[:, s] == top[s])]
        if tie.is_uniform or len(tied) == 1:
            candidates.append(tied)
        else:
            candidates.append([min(tied, key=lambda i: positions[i])])
    return candidates


def _per_share_outcome(
    g: GameInstance,
    mechanism: MechanismEnum,
    levels: np.ndarray,
    winners: list[int],
) -> RawOutcome:
    top = levels.max(axis=0)
    competing = _second_highest(levels)
    n, m, h = g.n, g.m, g.h
    payments = np.zeros(n)
    counts = np.zeros((n, m), dtype=np.int64)
    prices = np.zeros(m * h)
    for s, w in enumerate(winners):
        if w < 0:
            continue
        prices[s] = top[s] * g.epsilon
        pay_level = top[s] if mechanism is MechanismEnum.FIRST else competing[s]
        payments[w] += pay_level * g.epsilon
        counts[w, s // h] += 1
    return RawOutcome(
        winners=np.array(winners, dtype=np.int64).reshape(m, h),
        payments=payments,
        counts=counts,
        prices=prices.reshape(m, h),
    )


def _run_per_share(g: GameInstance, mechanism: MechanismEnum, levels: np.ndarray, tie: TieBreakRule) -> RawOutcome:
    rng = random.Random(tie.seed)
    winners = []
    for tied in _share_candidates(levels, tie):
        winners.append(rng.choice(tied) if len(tied) > 1 else tied[0])
    return _per_share_outcome(g, mechanism, levels, winners)


# ── House clearing ────────────────────────────────────────────

def _item_groups(levels: np.ndarray, j: int, positions: list[int]) -> list[list[tuple[int, int]]]:
    """Active demands on item j grouped by descending price level; each group in preference order."""
    by_price: dict[int, list[tuple[int, int]]] = {}
    for i in range(levels.shape[0]):
        count, price = int(levels[i, 2 * j]), int(levels[i, 2 * j + 1])
        if count > 0 and price > 0:
            by_price.setdefault(price, []).append((i, count))
    return [
        sorted(by_price[price], key=lambda d: positions[d[0]])
        for price in sorted(by_price, reverse=True)
    ]


def _house_outcome(g: GameInstance, levels: np.ndarray, service: list[list[tuple[int, int]]]) -> RawOutcome:
    """service[j] lists (bidder, shares received) in the order shares are handed out."""
    n, m, h = g.n, g.m, g.h
    winners = np.full((m, h), -1, dtype=np.int64)
    prices = np.zeros((m, h))
    counts = np.zeros((n, m), dtype=np.int64)
    payments = np.zeros(n)
    for j, served in enumerate(service):
        l = 0
        for i, received in served:
            price = levels[i, 2 * j + 1] * g.epsilon
            for _ in range(received):
                winners[j, l] = i
                prices[j, l] = price
                l += 1
            counts[i, j] += received
            payments[i] += received * price
    return RawOutcome(winners=winners, payments=payments, counts=counts, prices=prices)


def _run_house(g: GameInstance, levels: np.ndarray, tie: TieBreakRule) -> RawOutcome:
    rng = random.Random(tie.seed)
    positions = tie.positions(g.n)
    service = []
    for j in range(g.m):
        stock = g.h
        served = []
        for group in _item_groups(levels, j, positions):
            if tie.is_uniform and len(group) > 1:
                group = sorted(group)
                rng.shuffle(group)
            for i, count in group:
                received = min(count, stock)
                stock -= received
                if received:
                    served.append((i, received))
        service.append(served)
    return _house_outcome(g, levels, service)


def _item_distribution(groups: list[list[tuple[int, int]]], h: int, uniform: bool) -> list[tuple[tuple, float]]:
    """Exact distribution of who receives how many shares of one item. Orders that serve identically are merged."""
    results: dict[tuple, float] = {}

    def serve(group_idx: int, stock: int, served: tuple, prob: float) -> None:
        if group_idx == len(groups) or stock == 0:
            key = tuple(sorted(served))
            results[key] = results.get(key, 0.0) + prob
            return
        group = groups[group_idx]
        if not uniform or len(group) == 1 or sum(c for _, c in group) <= stock:
            for i, count in group:
                received = min(count, stock)
                stock -= received
                if received:
                    served = served + ((i, received),)
            serve(group_idx + 1, stock, served, prob)
            return
        shuffle(group_idx, list(group), stock, served, prob)

    def shuffle(group_idx: int, pending: list[tuple[int, int]], stock: int, served: tuple, prob: float) -> None:
        if not pending or stock == 0:
            serve(group_idx + 1, stock, served, prob)
            return
        share = prob / len(pending)
        for k, (i, count) in enumerate(pending):
            received = min(count, stock)
            rest = pending[:k] + pending[k + 1:]
            shuffle(group_idx, rest, stock - received, served + (((i, received),) if received else ()), share)

    serve(0, h, (), 1.0)
    return sorted(results.items())


# ── Distributions ─────────────────────────────────────────────

def raw_outcome_distribution(
    g: GameInstance,
    mechanism: MechanismEnum,
    levels: np.ndarray,
    tie: TieBreakRule,
) -> list[tuple[float, RawOutcome]]:
    if mechanism.per_share:
        candidates = _share_candidates(levels, tie)
        size = 1
        for tied in candidates:
            size *= len(tied)
        if size > settings.MAX_JOINT_SUPPORT:
            raise SizeLimitError("tie expansion", size, settings.MAX_JOINT_SUPPORT, "MAX_JOINT_SUPPORT")
        weight = 1.0 / size
        return [
            (weight, _per_share_outcome(g, mechanism, levels, list(winners)))
            for winners in itertools.product(*candidates)
        ]

    positions = tie.positions(g.n)
    per_item = [
        _item_distribution(_item_groups(levels, j, positions), g.h, tie.is_uniform)
        for j in range(g.m)
    ]
    out = []
    for combo in itertools.product(*per_item):
        prob = 1.0
        service = []
        for j, (served, p) in enumerate(combo):
            prob *= p
            # canonical share order within an item: highest price first
            service.append(sorted(served, key=lambda d, j=j: (-levels[d[0], 2 * j + 1], d[0])))
        out.append((prob, _house_outcome(g, levels, service)))
    return out


# ── Public operations ─────────────────────────────────────────

def run_first_price(g: GameInstance, b: BidProfile, t: TieBreakRule) -> Outcome:
    return _run_per_share(g, MechanismEnum.FIRST, encode_bids(g, b), t).to_schema()


def run_second_price(g: GameInstance, b: BidProfile, t: TieBreakRule) -> Outcome:
    return _run_per_share(g, MechanismEnum.SECOND, encode_bids(g, b), t).to_schema()


def run_house_clearing(g: GameInstance, d: HouseDemand, t: TieBreakRule) -> Outcome:
    return _run_house(g, encode_demands(g, d), t).to_schema()


def run_mechanism(g: GameInstance, mechanism: MechanismEnum, profile: BidProfile | HouseDemand, t: TieBreakRule) -> Outcome:
    if mechanism is MechanismEnum.FIRST:
        return run_first_price(g, profile, t)
    if mechanism is MechanismEnum.SECOND:
        return run_second_price(g, profile, t)
    return run_house_clearing(g, profile, t)


def encode_profile(g: GameInstance, mechanism: MechanismEnum, profile: BidProfile | HouseDemand) -> np.ndarray:
    if mechanism.per_share:
        if not isinstance(profile, BidProfile):
            raise InputError(f"{mechanism.value} price needs per-share bids")
        return encode_bids(g, profile)
    if not isinstance(profile, HouseDemand):
        raise InputError("house clearing needs (count, price) demands")
    return encode_demands(g, profile)


def outcome_distribution(
    g: GameInstance,
    mechanism: MechanismEnum,
    profile: BidProfile | HouseDemand,
    t: TieBreakRule,
) -> list[WeightedOutcome]:
    levels = encode_profile(g, mechanism, profile)
    return [
        WeightedOutcome(probability=p, outcome=raw.to_schema())
        for p, raw in raw_outcome_distribution(g, mechanism, levels, t)
    ]


def utility(g: GameInstance, i: int, o: Outcome) -> float:
    payment = o.payments[i]
    bidder = g.bidders[i]
    if not approx_le(payment, bidder.budget):
        return NEG_INFINITY
    return eval_valuation(bidder.valuation, o.bundles[i], g.h) - payment


def check_no_overbudget(g: GameInstance, i: int, b: BidProfile | HouseDemand) -> bool:
    if isinstance(b, HouseDemand):
        total = sum(c * p for c, p in b.demands[i])
    else:
        total = sum(sum(shares) for shares in b.bids[i])
    return approx_le(total, g.bidders[i].budget)


def check_no_overbidding(g: GameInstance, i: int, b: BidProfile) -> bool:
    v = g.bidders[i].valuation
    row = b.bids[i]
    if len(row) != g.m:
        raise ModelError(f"bid row has {len(row)} items, instance has {g.m}")

    if isinstance(v, AdditiveValuation):
        return all(
            approx_le(bid, v.values[j] / g.h)
            for j, shares in enumerate(row)
            for bid in shares
        )

    # the worst subset with c shares of item j holds the c highest bids on j
    prefix = []
    for shares in row:
        top = sorted(shares, reverse=True)
        prefix.append([0.0] + list(itertools.accumulate(top)))

    if (g.h + 1) ** g.m <= 2 ** settings.XOS_EXACT_SHARES:
        for counts in itertools.product(range(g.h + 1), repeat=g.m):
            bid_sum = sum(prefix[j][c] for j, c in enumerate(counts))
            if not approx_le(bid_sum, eval_valuation(v, list(counts), g.h)):
                return False
        return True

    logger.warning(
        f"No-overbidding check is conservative | bidder={i} | shares={g.total_shares} | "
        f"limit={settings.XOS_EXACT_SHARES}"
    )
    # one clause that covers every share bid is sufficient
    return any(
        all(approx_le(bid, clause[j] / g.h) for j, shares in enumerate(row) for bid in shares)
        for clause in v.clauses
    )
