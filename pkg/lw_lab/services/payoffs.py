"""
Payoff oracle shared by the equilibrium and instance services.

Utilities of whole deviation spaces are evaluated with per-share (or per-item) tables:
for additive valuations a row's expected utility is a sum of independent share terms,
because every budget-feasible row pays at most its budget. XOS rows under deterministic
ties are evaluated from the won-share matrix; anything else falls back to exact
outcome enumeration.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from lw_lab.core.config import settings
from lw_lab.core.exceptions import InputError, SizeLimitError
from lw_lab.core.logging import logger
from lw_lab.enums import MechanismEnum
from lw_lab.schemas.auction import TieBreakRule
from lw_lab.schemas.equilibrium import MixedProfile, SupportPoint
from lw_lab.schemas.game import GameInstance
from lw_lab.services.mechanisms import NEG_INFINITY, RawOutcome, encode_row, raw_outcome_distribution
from lw_lab.utils.grid import budget_levels

Support = list[tuple[np.ndarray, float]]
Joint = list[tuple[float, np.ndarray]]

STRUCTURED_FAMILY = "structured family (per-item constant share bids)"


@lru_cache(maxsize=256)
def bounded_compositions(d: int, K: int) -> np.ndarray:
    """All nonnegative integer vectors of length d with sum <= K, in lexicographic order."""
    if d == 0:
        return np.zeros((1, 0), dtype=np.int64)
    blocks = []
    for k in range(K + 1):
        tail = bounded_compositions(d - 1, K - k)
        head = np.full((tail.shape[0], 1), k, dtype=np.int64)
        blocks.append(np.hstack([head, tail]))
    rows = np.vstack(blocks)
    rows.setflags(write=False)
    return rows


def house_options(h: int, K: int) -> list[tuple[int, int]]:
    return [(0, 0)] + [(c, k) for c in range(1, h + 1) for k in range(1, K + 1) if c * k <= K]


@lru_cache(maxsize=256)
def _house_count(m: int, K: int, h: int) -> int:
    if m == 0:
        return 1
    return sum(_house_count(m - 1, K - c * k, h) for c, k in house_options(h, K))


@lru_cache(maxsize=256)
def house_rows(m: int, K: int, h: int) -> np.ndarray:
    """All (count, price level) demand rows over m items with total spend <= K levels."""
    if m == 0:
        return np.zeros((1, 0), dtype=np.int64)
    blocks = []
    for c, k in house_options(h, K):
        tail = house_rows(m - 1, K - c * k, h)
        head = np.tile(np.array([c, k], dtype=np.int64), (tail.shape[0], 1))
        blocks.append(np.hstack([head, tail]))
    rows = np.vstack(blocks)
    rows.setflags(write=False)
    return rows


class PayoffOracle:

    def __init__(self, g: GameInstance, mechanism: MechanismEnum, tie: TieBreakRule):
        self.g = g
        self.mechanism = mechanism
        self.tie = tie
        self.positions = tie.positions(g.n)
        self.clauses = [np.asarray(b.valuation.clauses, dtype=float) / g.h for b in g.bidders]
        self.additive = g.is_additive
        self.budgets = np.array(g.budgets, dtype=float)
        self.K = [budget_levels(b, g.epsilon) for b in g.budgets]

    # ── values ────────────────────────────────────────────────

    def bidder_value(self, i: int, counts: np.ndarray) -> float:
        return float((self.clauses[i] @ counts).max())

    def raw_utility(self, i: int, raw: RawOutcome) -> float:
        if raw.payments[i] > self.budgets[i] + settings.TOLERANCE:
            return NEG_INFINITY
        return self.bidder_value(i, raw.counts[i]) - float(raw.payments[i])

    def raw_liquid_welfare(self, raw: RawOutcome) -> float:
        return sum(
            min(self.bidder_value(i, raw.counts[i]), self.budgets[i])
            for i in range(self.g.n)
        )

    # ── profiles ──────────────────────────────────────────────

    def encode_support(self, support: list[SupportPoint]) -> Support:
        if not support:
            raise InputError("empty mixed strategy")
        total = sum(p.probability for p in support)
        if abs(total - 1.0) > 1e-9:
            raise InputError(f"strategy probabilities sum to {total}, expected 1")
        return [(encode_row(self.g, self.mechanism, p.row), p.probability) for p in support if p.probability > 0]

    def encode_mixed(self, s: MixedProfile) -> list[Support]:
        if len(s.strategies) != self.g.n:
            raise InputError(f"profile has {len(s.strategies)} bidders, instance has {self.g.n}")
        return [self.encode_support(support) for support in s.strategies]

    def joint(self, supports: list[Support], skip: int | None = None) -> Joint:
        size = 1
        for i, support in enumerate(supports):
            if i != skip:
                size *= len(support)
        if size > settings.MAX_JOINT_SUPPORT:
            raise SizeLimitError("joint support", size, settings.MAX_JOINT_SUPPORT, "MAX_JOINT_SUPPORT")

        width = supports[0][0][0].size
        placeholder = [(np.zeros(width, dtype=np.int64), 1.0)]
        axes = [placeholder if i == skip else support for i, support in enumerate(supports)]
        out = []
        for combo in itertools.product(*axes):
            prob = math.prod(p for _, p in combo)
            out.append((prob, np.vstack([row for row, _ in combo])))
        return out

    def outcomes(self, levels: np.ndarray) -> list[tuple[float, RawOutcome]]:
        return raw_outcome_distribution(self.g, self.mechanism, levels, self.tie)

    def expected_utility(self, i: int, own: Support, others: Joint) -> float:
        total = 0.0
        for row, p_own in own:
            for p, levels in others:
                profile = levels.copy()
                profile[i] = row
                for q, raw in self.outcomes(profile):
                    u = self.raw_utility(i, raw)
                    if u == NEG_INFINITY:
                        return NEG_INFINITY
                    total += p_own * p * q * u
        return total

    # ── deviation spaces ──────────────────────────────────────

    def deviation_count(self, i: int) -> int:
        K = self.K[i]
        if self.mechanism.per_share:
            S = self.g.total_shares
            return math.comb(K + S, S)
        return _house_count(self.g.m, K, self.g.h)

    def deviation_rows(self, i: int, restricted: bool = False) -> tuple[np.ndarray, bool]:
        g, K = self.g, self.K[i]
        full = self.deviation_count(i)

        if not self.mechanism.per_share:
            if full > settings.MAX_DEVIATION_ROWS:
                raise SizeLimitError("house deviation space", full, settings.MAX_DEVIATION_ROWS, "MAX_DEVIATION_ROWS")
            return house_rows(g.m, K, g.h), False

        if not restricted and full <= settings.MAX_DEVIATION_ROWS:
            return bounded_compositions(g.total_shares, K), False

        per_item = bounded_compositions(g.m, K // g.h)
        if per_item.shape[0] > settings.MAX_DEVIATION_ROWS:
            raise SizeLimitError("structured deviation family", per_item.shape[0], settings.MAX_DEVIATION_ROWS, "MAX_DEVIATION_ROWS")
        if not restricted:
            logger.warning(
                f"Deviation space restricted | bidder={i} | full_rows={full} | "
                f"structured_rows={per_item.shape[0]}"
            )
        return np.repeat(per_item, g.h, axis=1), True

    # ── deviation utilities ───────────────────────────────────

    def deviation_utilities(self, i: int, others: Joint, rows: np.ndarray) -> np.ndarray:
        if self.mechanism.per_share:
            if self.additive:
                return self._per_share_additive(i, others, rows)
            if not self.tie.is_uniform:
                return self._per_share_xos_deterministic(i, others, rows)
        elif self.additive:
            return self._house_additive(i, others, rows)
        return self._enumerated(i, others, rows)

    def _share_terms(self, i: int, levels: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray]:
        """Win probability and payment for every share and every own bid level 0..K."""
        others = np.delete(levels, i, axis=0)
        S = levels.shape[1]
        k = np.arange(K + 1)[None, :]
        if others.shape[0] == 0:
            top = np.zeros(S, dtype=np.int64)
            tie_prob = np.ones(S)
        else:
            top = others.max(axis=0)
            at_top = others == top[None, :]
            if self.tie.is_uniform:
                tie_prob = 1.0 / (at_top.sum(axis=0) + 1)
            else:
                other_pos = np.array([p for o, p in enumerate(self.positions) if o != i], dtype=float)
                best_other = np.where(at_top, other_pos[:, None], np.inf).min(axis=0)
                tie_prob = (self.positions[i] < best_other).astype(float)
        top_col = top[:, None]
        win = np.where(k > top_col, 1.0, np.where((k == top_col) & (top_col > 0), tie_prob[:, None], 0.0))
        if self.mechanism is MechanismEnum.FIRST:
            pay = np.broadcast_to(k * self.g.epsilon, win.shape)
        else:
            pay = np.broadcast_to(top_col * self.g.epsilon, win.shape)
        return win, pay

    def _per_share_additive(self, i: int, others: Joint, rows: np.ndarray) -> np.ndarray:
        K = int(rows.max()) if rows.size else 0
        share_values = np.repeat(self.clauses[i][0], self.g.h)
        table = np.zeros((self.g.total_shares, K + 1))
        for p, levels in others:
            win, pay = self._share_terms(i, levels, K)
            table += p * win * (share_values[:, None] - pay)
        idx = np.arange(self.g.total_shares)[None, :]
        return table[idx, rows].sum(axis=1)

    def _per_share_xos_deterministic(self, i: int, others: Joint, rows: np.ndarray) -> np.ndarray:
        K = int(rows.max()) if rows.size else 0
        idx = np.arange(self.g.total_shares)[None, :]
        total = np.zeros(rows.shape[0])
        for p, levels in others:
            win, pay = self._share_terms(i, levels, K)
            won = win[idx, rows]
            paid = (won * pay[idx, rows]).sum(axis=1)
            counts = won.reshape(rows.shape[0], self.g.m, self.g.h).sum(axis=2)
            values = (counts @ self.clauses[i].T).max(axis=1)
            total += p * (values - paid)
        return total

    def _received(self, i: int, levels: np.ndarray, j: int, count: int, price: int) -> float:
        """Expected shares of item j that bidder i receives demanding count at price level."""
        higher = 0
        tied: list[tuple[int, int]] = []
        for o in range(levels.shape[0]):
            if o == i:
                continue
            c_o, k_o = int(levels[o, 2 * j]), int(levels[o, 2 * j + 1])
            if c_o <= 0 or k_o <= 0:
                continue
            if k_o > price:
                higher += c_o
            elif k_o == price:
                tied.append((self.positions[o], c_o))
        stock = max(0, self.g.h - higher)
        if not self.tie.is_uniform:
            before = sum(c for pos, c in tied if pos < self.positions[i])
            return float(min(count, max(0, stock - before)))
        # uniformly random position among the tied group
        t = len(tied)
        expected = 0.0
        for r in range(t + 1):
            subsets = list(itertools.combinations([c for _, c in tied], r))
            avg = sum(min(count, max(0, stock - sum(sub))) for sub in subsets) / len(subsets)
            expected += avg / (t + 1)
        return expected

    def _house_additive(self, i: int, others: Joint, rows: np.ndarray) -> np.ndarray:
        g = self.g
        K = int(rows[:, 1::2].max()) if rows.size else 0
        share_values = self.clauses[i][0]
        table = np.zeros((g.m, g.h + 1, K + 1))
        for p, levels in others:
            for j in range(g.m):
                for c in range(1, g.h + 1):
                    for k in range(1, K // c + 1):
                        received = self._received(i, levels, j, c, k)
                        table[j, c, k] += p * received * (share_values[j] - k * g.epsilon)
        items = np.arange(g.m)[None, :]
        return table[items, rows[:, 0::2], rows[:, 1::2]].sum(axis=1)

    def _enumerated(self, i: int, others: Joint, rows: np.ndarray) -> np.ndarray:
        logger.info(f"Enumerating deviation utilities | bidder={i} | rows={rows.shape[0]} | joint={len(others)}")
        return np.array([self.expected_utility(i, [(row, 1.0)], others) for row in rows])
