from __future__ import annotations

import numpy as np

from lw_lab.core.config import settings
from lw_lab.core.exceptions import DegenerateEquilibriumError, InputError, SizeLimitError, UnsupportedValuationError
from lw_lab.core.logging import logger
from lw_lab.schemas.auction import Outcome, WeightedOutcome
from lw_lab.schemas.game import GameInstance
from lw_lab.schemas.welfare import LLPSolution, OptResult, WelfareReport
from lw_lab.services.game_core import eval_valuation, require_valid
from lw_lab.utils.simplex import DenseSimplex


def liquid_welfare(g: GameInstance, o: Outcome) -> float:
    return sum(
        min(eval_valuation(b.valuation, o.bundles[i], g.h), b.budget)
        for i, b in enumerate(g.bidders)
    )


def social_welfare(g: GameInstance, o: Outcome) -> float:
    return sum(eval_valuation(b.valuation, o.bundles[i], g.h) for i, b in enumerate(g.bidders))


def revenue(o: Outcome) -> float:
    return float(sum(o.payments))


def welfare_report(g: GameInstance, o: Outcome) -> WelfareReport:
    return WelfareReport(
        liquid_welfare=liquid_welfare(g, o),
        social_welfare=social_welfare(g, o),
        revenue=revenue(o),
    )


def expected_liquid_welfare(g: GameInstance, dist: list[WeightedOutcome] | list[tuple[float, Outcome]]) -> float:
    pairs = [(w.probability, w.outcome) if isinstance(w, WeightedOutcome) else w for w in dist]
    total = sum(p for p, _ in pairs)
    if abs(total - 1.0) > 1e-9 or any(p < 0 for p, _ in pairs):
        raise InputError(f"outcome probabilities sum to {total}, expected 1")
    return sum(p * liquid_welfare(g, o) for p, o in pairs)


def lpoa(opt_value: float, eq_lw: float) -> float:
    if eq_lw <= settings.TOLERANCE:
        raise DegenerateEquilibriumError(f"equilibrium liquid welfare {eq_lw} is not positive")
    return opt_value / eq_lw


# ── Exact optimum ─────────────────────────────────────────────

def _per_share_clauses(g: GameInstance) -> list[np.ndarray]:
    return [np.asarray(b.valuation.clauses, dtype=float) / g.h for b in g.bidders]


def opt_exact(g: GameInstance) -> OptResult:
    """
    Exact optimal Liquid Welfare over all assignments of shares (shares may stay unassigned).

    Shares are assigned one at a time. The state is each bidder's clause-wise accumulated
    value capped at the budget, since min(max_r a_r, B) = max_r min(a_r, B); assignments that
    reach the same state are merged.
    """
    require_valid(g)
    if g.total_shares > settings.OPT_MAX_SHARES:
        raise SizeLimitError("exact OPT share count", g.total_shares, settings.OPT_MAX_SHARES, "OPT_MAX_SHARES")

    clauses = _per_share_clauses(g)
    budgets = g.budgets
    start = tuple(tuple(0.0 for _ in range(c.shape[0])) for c in clauses)

    layers: list[dict[tuple, tuple[tuple, int]]] = [{start: (start, -1)}]
    explored = 1
    for s in range(g.total_shares):
        j = s // g.h
        nxt: dict[tuple, tuple[tuple, int]] = {}
        for state in layers[-1]:
            if state not in nxt:
                nxt[state] = (state, -1)
            for i, c in enumerate(clauses):
                acc = state[i]
                grown = tuple(round(min(a + c[r, j], budgets[i]), 12) for r, a in enumerate(acc))
                if grown == acc:
                    continue
                child = state[:i] + (grown,) + state[i + 1:]
                if child not in nxt:
                    nxt[child] = (state, i)
        explored += len(nxt)
        layers.append(nxt)

    def value(state: tuple) -> float:
        return sum(max(acc) if acc else 0.0 for acc in state)

    best = max(layers[-1], key=value)
    best_value = value(best)

    choices = []
    state = best
    for layer in reversed(layers[1:]):
        parent, bidder = layer[state]
        choices.append(bidder)
        state = parent
    choices.reverse()
    allocation = [choices[j * g.h:(j + 1) * g.h] for j in range(g.m)]

    logger.info(f"Exact OPT | shares={g.total_shares} | states={explored} | value={best_value:.9f}")
    return OptResult(value=best_value, allocation=allocation, states_explored=explored)


# ── LLP relaxation ────────────────────────────────────────────

def solve_llp(g: GameInstance) -> LLPSolution:
    require_valid(g)
    if not g.is_additive:
        raise UnsupportedValuationError("the LLP relaxation is defined for additive valuations only")

    n, m = g.n, g.m
    v = np.array([b.valuation.values for b in g.bidders], dtype=float)
    c = v.reshape(-1)

    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = v[i]
    for j in range(m):
        A[n + j, j::m] = 1.0
    b = np.concatenate([np.array(g.budgets, dtype=float), np.ones(m)])

    result = DenseSimplex(c, A, b, upper=np.ones(n * m)).solve()
    y = np.clip(result.x, 0.0, 1.0).reshape(n, m)
    objective = float((v * y).sum())

    logger.info(f"LLP solved | n={n} | m={m} | pivots={result.pivots} | objective={objective:.9f}")
    return LLPSolution(y=y.tolist(), objective=objective, pivots=result.pivots)
