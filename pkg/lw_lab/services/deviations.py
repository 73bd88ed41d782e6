"""
Hypothetical deviations used by the Liquid Price of Anarchy argument and the numerical audit
of its inequality chain. Deviation rows are priced at p̄ⱼ/h and need not lie on the bid grid.
"""
from __future__ import annotations

import math
import random

from lw_lab.core.config import settings
from lw_lab.core.exceptions import (
    DeviationInfeasibleError,
    InputError,
    PreconditionError,
    UnsupportedValuationError,
)
from lw_lab.core.logging import logger
from lw_lab.enums import DeviationKind, MechanismEnum
from lw_lab.schemas.analysis import AnalysisParams, AuditCheck, AuditReport, BidderClassification
from lw_lab.schemas.auction import BidProfile, TieBreakRule
from lw_lab.schemas.equilibrium import EquilibriumStats, MixedProfile
from lw_lab.schemas.game import AdditiveValuation, GameInstance, ShareBundle
from lw_lab.schemas.welfare import LLPSolution
from lw_lab.services.equilibrium import equilibrium_stats, share_price_distributions, verify_mixed_ne
from lw_lab.services.game_core import eval_valuation, maximizing_clause
from lw_lab.services.welfare import opt_exact, solve_llp

TOL = 1e-9


def _check_fraction(y: float) -> None:
    if y < -TOL or y > 1 + TOL:
        raise InputError(f"fraction {y} outside [0, 1]")


def floor_fraction(y: float, h: int) -> float:
    _check_fraction(y)
    return math.floor(y * h + TOL) / h


def frac_indicator(y: float, h: int) -> float:
    _check_fraction(y)
    return 1.0 / h if y > TOL else 0.0


def _share_count(delta: float, h: int) -> int:
    _check_fraction(delta)
    k = round(delta * h)
    if abs(delta * h - k) > TOL:
        raise InputError(f"delta*h = {delta * h} is not an integer")
    return int(k)


def uniform_share_bid(j: int, delta: float, p_bar_j: float, h: int, seed: int) -> list[float]:
    k = _share_count(delta, h)
    chosen = random.Random(seed).sample(range(h), k)
    row = [0.0] * h
    for l in chosen:
        row[l] = p_bar_j / h
    return row


def expected_shares_won(
    j: int,
    delta: float,
    p_bar_j: float,
    h: int,
    price_dist: list[tuple[float, list[float]]],
    alpha: float,
) -> float:
    """Exact expected number of shares of item j won by bidding p̄ⱼ/h on a uniform δ-fraction."""
    k = _share_count(delta, h)
    total = sum(p for p, _ in price_dist)
    if abs(total - 1.0) > TOL:
        raise InputError(f"price distribution of item {j} sums to {total}")
    if any(len(prices) != h for _, prices in price_dist):
        raise InputError(f"price vectors of item {j} must have {h} entries")

    expected_sum = sum(p * sum(prices) for p, prices in price_dist)
    if abs(alpha * expected_sum - p_bar_j) > TOL * max(1.0, abs(p_bar_j)):
        raise InputError(f"p_bar {p_bar_j} of item {j} does not match alpha * expected prices {alpha * expected_sum}")

    bid = p_bar_j / h
    win_mass = sum(p * sum(1 for price in prices if bid > price + TOL) for p, prices in price_dist)
    # every share is selected with probability k/h
    return k / h * win_mass


# ── Classification ────────────────────────────────────────────

def _additive_values(g: GameInstance, i: int) -> list[float]:
    v = g.bidders[i].valuation
    if not isinstance(v, AdditiveValuation):
        raise UnsupportedValuationError("the deviation analysis is defined for additive valuations")
    return list(v.values)


def classify_bidders(g: GameInstance, stats: EquilibriumStats, params: AnalysisParams) -> BidderClassification:
    gamma = params.gamma
    p_bar = stats.p_bar
    I1, I2, I3, J, Gamma, G = [], [], [], [], [], []
    per_share_total = sum(p_bar) / g.h

    for i, bidder in enumerate(g.bidders):
        values = _additive_values(g, i)
        q = stats.q[i]
        J_i = [j for j in range(g.m) if values[j] >= p_bar[j] - TOL]
        Gamma_i = [j for j in range(g.m) if q[j] <= 1 / gamma + TOL]
        J.append(J_i)
        Gamma.append(Gamma_i)
        G.append([j for j in J_i if j in Gamma_i])

        if gamma * sum(p_bar[j] * q[j] for j in J_i) <= bidder.budget + TOL:
            I1.append(i)
        if per_share_total <= bidder.budget + TOL:
            I2.append(i)
        if stats.budget_hit_prob[i] <= 1 / (2 * gamma) + TOL:
            I3.append(i)

    I = [i for i in I1 if i in I2 and i in I3]
    return BidderClassification(I1=I1, I2=I2, I3=I3, I=I, J=J, Gamma=Gamma, G=G)


# ── Deviation rows ────────────────────────────────────────────

def _deviation_row(
    g: GameInstance,
    i: int,
    deltas: dict[int, float],
    stats: EquilibriumStats,
    seed: int,
    what: str,
) -> list[list[float]]:
    rng = random.Random(seed)
    row = []
    for j in range(g.m):
        item_seed = rng.randrange(2 ** 31)
        delta = deltas.get(j, 0.0)
        row.append(uniform_share_bid(j, delta, stats.p_bar[j], g.h, item_seed))
    total = sum(sum(shares) for shares in row)
    if total > g.bidders[i].budget + settings.TOLERANCE * max(1.0, total):
        raise DeviationInfeasibleError(f"{what} of bidder {i} spends {total} over budget {g.bidders[i].budget}")
    return row


def _deltas(y: float, h: int, kind: DeviationKind) -> float:
    return floor_fraction(y, h) if kind is DeviationKind.INTEGRAL else frac_indicator(y, h)


def llp_deviation(
    g: GameInstance,
    i: int,
    y: LLPSolution,
    stats: EquilibriumStats,
    kind: DeviationKind,
    seed: int = 0,
) -> list[list[float]]:
    values = _additive_values(g, i)
    J_i = [j for j in range(g.m) if values[j] >= stats.p_bar[j] - TOL]
    deltas = {j: _deltas(min(max(y.y[i][j], 0.0), 1.0), g.h, kind) for j in J_i}
    return _deviation_row(g, i, deltas, stats, seed, f"{kind.value} LLP deviation")


def boosting_deviation(
    g: GameInstance,
    i: int,
    stats: EquilibriumStats,
    params: AnalysisParams,
    kind: DeviationKind,
    seed: int = 0,
) -> list[list[float]]:
    values = _additive_values(g, i)
    G_i = [
        j for j in range(g.m)
        if values[j] >= stats.p_bar[j] - TOL and stats.q[i][j] <= 1 / params.gamma + TOL
    ]
    deltas = {j: _deltas(min(params.gamma * stats.q[i][j], 1.0), g.h, kind) for j in G_i}
    return _deviation_row(g, i, deltas, stats, seed, f"{kind.value} boosting deviation")


# ── Bundle deviations (pure equilibria) ───────────────────────

def _competing(g: GameInstance, i: int, b: BidProfile) -> list[list[float]]:
    return [
        [max((b.bids[k][j][l] for k in range(g.n) if k != i), default=0.0) for l in range(g.h)]
        for j in range(g.m)
    ]


def _target_shares(g: GameInstance, i: int, bundle: ShareBundle, b: BidProfile) -> list[list[int]]:
    """For each item the shares of the target bundle: the ones with the lowest competing bids."""
    competing = _competing(g, i, b)
    return [
        sorted(range(g.h), key=lambda l: (competing[j][l], l))[:count]
        for j, count in enumerate(bundle.counts)
    ]


def second_price_deviation(g: GameInstance, i: int, bundle: ShareBundle, b: BidProfile) -> list[list[float]]:
    """Bid a_r(j)·min(v(S), B)/v(S) per share of the target bundle S, r its maximizing clause."""
    bidder = g.bidders[i]
    v = bidder.valuation
    value = eval_valuation(v, bundle, g.h)
    row = [[0.0] * g.h for _ in range(g.m)]
    if value <= 0:
        return row
    clause = v.clauses[maximizing_clause(v, bundle, g.h)]
    scale = min(value, bidder.budget) / value
    for j, shares in enumerate(_target_shares(g, i, bundle, b)):
        for l in shares:
            row[j][l] = clause[j] / g.h * scale
    return row


def first_price_deviation(
    g: GameInstance,
    i: int,
    bundle: ShareBundle,
    b: BidProfile,
    delta: float,
) -> list[list[float]]:
    """The second-price deviation capped at the highest competing bid plus delta."""
    row = second_price_deviation(g, i, bundle, b)
    competing = _competing(g, i, b)
    return [
        [min(bid, competing[j][l] + delta) if bid > 0 else 0.0 for l, bid in enumerate(shares)]
        for j, shares in enumerate(row)
    ]


def deviation_guarantee(g: GameInstance, i: int, bundle: ShareBundle, b: BidProfile, delta: float = 0.0) -> float:
    """Utility the bundle deviations secure: min(v(S), B) minus competing bids on S (and |S|·delta)."""
    competing = _competing(g, i, b)
    bidder = g.bidders[i]
    secured = min(eval_valuation(bidder.valuation, bundle, g.h), bidder.budget)
    for j, shares in enumerate(_target_shares(g, i, bundle, b)):
        for l in shares:
            secured -= competing[j][l] + delta
    return secured


# ── Audit ─────────────────────────────────────────────────────

def lpoa_constant(params: AnalysisParams, n: int, h: int) -> float:
    """K with OPT ≤ K·LW: (α + 2 + ½c·α(1+γ+n/h)) / (½c), c = 1 − 1/α − 2/γ."""
    alpha, gamma = params.alpha, params.gamma
    c = 1 - 1 / alpha - 2 / gamma
    if c <= 0:
        return math.inf
    return (alpha + 2 + 0.5 * c * alpha * (1 + gamma + n / h)) / (0.5 * c)


def _le(name: str, lhs: float, rhs: float, detail: str | None = None) -> AuditCheck:
    return AuditCheck(name=name, lhs=lhs, rhs=rhs, holds=lhs <= rhs + TOL * max(1.0, abs(rhs)), detail=detail)


def _ge(name: str, lhs: float, rhs: float, detail: str | None = None) -> AuditCheck:
    return AuditCheck(name=name, lhs=lhs, rhs=rhs, holds=lhs >= rhs - TOL * max(1.0, abs(rhs)), detail=detail)


def audit_bounds(
    g: GameInstance,
    mechanism: MechanismEnum,
    s: MixedProfile,
    t: TieBreakRule,
    params: AnalysisParams | None = None,
) -> AuditReport:
    params = params or AnalysisParams()
    alpha, gamma = params.alpha, params.gamma
    n, h = g.n, g.h

    verdict = verify_mixed_ne(g, mechanism, s, t)
    if not verdict.is_equilibrium:
        raise PreconditionError(f"profile is not an equilibrium: {verdict.label}")

    stats = equilibrium_stats(g, mechanism, s, t, alpha)
    cls = classify_bidders(g, stats, params)
    llp = solve_llp(g)
    if g.total_shares <= settings.OPT_MAX_SHARES:
        opt, opt_source = opt_exact(g).value, "exact"
    else:
        opt, opt_source = llp.objective, "llp"

    lw = stats.exp_lw
    # prices stand in for revenue; identical to revenue except under second price
    rev = sum(stats.p_bar) / alpha
    budgets = g.budgets
    outside_I = cls.outside(n, "I")
    outside_I3 = cls.outside(n, "I3")
    budget_outside_I = sum(budgets[i] for i in outside_I)
    budget_outside_I3 = sum(budgets[i] for i in outside_I3)
    in_I_value = sum(
        _additive_values(g, i)[j] * stats.q[i][j] for i in cls.I for j in range(g.m)
    )
    c = 1 - 1 / alpha - 2 / gamma

    checks = [
        _le("budget_outside_I", budget_outside_I, alpha * (gamma + n / h) * rev + budget_outside_I3),
        _ge(
            "llp_deviation_value", in_I_value,
            (0.5 - 1 / (2 * alpha)) * (llp.objective - alpha * (1 + gamma + n / h) * rev - budget_outside_I3),
        ),
        _le(
            "boosting_deviation_value", (1 - 2 * alpha / (gamma * (alpha - 1))) * in_I_value,
            alpha * rev + 2 * lw - budget_outside_I3 / gamma,
        ),
        _ge(
            "lpoa_chain", (alpha + 2 + 0.5 * c * alpha * (1 + gamma + n / h)) * lw,
            0.5 * c * opt + (1 / gamma - 0.5 * c) * budget_outside_I3,
        ),
        _le("revenue_le_lw", rev, lw),
    ]

    bound = lpoa_constant(params, n, h)
    if lw > settings.TOLERANCE:
        checks.append(_le("lpoa_bound", opt / lw, bound, detail=f"n/h={n / h:g}"))
    else:
        checks.append(AuditCheck(name="lpoa_bound", lhs=math.inf, rhs=bound, holds=False, detail="zero equilibrium LW"))

    dists = share_price_distributions(g, mechanism, s, t)
    for j in range(g.m):
        if stats.p_bar[j] <= TOL:
            continue
        won = expected_shares_won(j, 1.0, stats.p_bar[j], h, dists[j], alpha)
        checks.append(_ge(f"shares_won_item_{j}", won, h * (1 - 1 / alpha)))

    # the equilibrium must beat what each deviation secures through its won shares
    for i in cls.I:
        values = _additive_values(g, i)
        y_row = llp.y[i]
        for name, items, fractions in (
            ("llp_integral", cls.J[i], {j: floor_fraction(min(y_row[j], 1.0), h) for j in cls.J[i]}),
            ("llp_fractional", cls.J[i], {j: frac_indicator(min(y_row[j], 1.0), h) for j in cls.J[i]}),
            ("boost_integral", cls.G[i], {j: floor_fraction(min(gamma * stats.q[i][j], 1.0), h) for j in cls.G[i]}),
            ("boost_fractional", cls.G[i], {j: frac_indicator(min(gamma * stats.q[i][j], 1.0), h) for j in cls.G[i]}),
        ):
            secured = sum((1 - 1 / alpha) * fractions[j] * (values[j] - stats.p_bar[j]) for j in items)
            checks.append(_ge(f"deviation_{name}_bidder_{i}", verdict.bidder_utilities[i], secured, detail="off-grid deviation"))

    report = AuditReport(
        params=params,
        mechanism=mechanism.value,
        revenue_quantity="sum of prices" if mechanism is MechanismEnum.SECOND else "revenue",
        revenue=rev,
        liquid_welfare=lw,
        opt=opt,
        opt_source=opt_source,
        llp_objective=llp.objective,
        lpoa=opt / lw if lw > settings.TOLERANCE else math.inf,
        classification=cls,
        checks=checks,
    )
    failed = [c.name for c in checks if not c.holds]
    if failed:
        logger.warning(f"Audit inequalities failed | failed={','.join(failed)}")
    else:
        logger.info(f"Audit complete | checks={len(checks)} | lpoa={report.lpoa:.9f}")
    return report
