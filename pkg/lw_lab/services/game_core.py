from __future__ import annotations

import json
from pathlib import Path

from pydantic import ValidationError

from lw_lab.core.exceptions import ConfigError, ModelError
from lw_lab.core.logging import logger
from lw_lab.schemas.game import (
    AdditiveValuation,
    GameInstance,
    ShareBundle,
    ValidationIssue,
    Valuation,
    XOSValuation,
)


def _counts(bundle: ShareBundle | list[int]) -> list[int]:
    return list(bundle.counts) if isinstance(bundle, ShareBundle) else list(bundle)


def clause_values(v: Valuation, bundle: ShareBundle | list[int], h: int) -> list[float]:
    counts = _counts(bundle)
    values = []
    for clause in v.clauses:
        if len(clause) != len(counts):
            raise ModelError(f"bundle has {len(counts)} items, valuation clause has {len(clause)}")
        values.append(sum(a * c / h for a, c in zip(clause, counts)))
    return values


def eval_valuation(v: Valuation, bundle: ShareBundle | list[int], h: int) -> float:
    if isinstance(v, AdditiveValuation):
        counts = _counts(bundle)
        if len(v.values) != len(counts):
            raise ModelError(f"bundle has {len(counts)} items, valuation has {len(v.values)}")
        return sum(a * c / h for a, c in zip(v.values, counts))
    if not v.clauses:
        raise ModelError("XOS valuation has no clauses")
    return max(clause_values(v, bundle, h))


def maximizing_clause(v: Valuation, bundle: ShareBundle | list[int], h: int) -> int:
    if not isinstance(v, XOSValuation):
        raise ModelError("maximizing_clause needs an XOS valuation")
    values = clause_values(v, bundle, h)
    best = max(values)
    # lowest index among ties
    return values.index(best)


def validate_instance(g: GameInstance) -> list[ValidationIssue]:
    issues: list[ValidationIssue] = []

    if g.n < 1:
        issues.append(ValidationIssue(field="n", message="at least one bidder is required"))
    if g.n != len(g.bidders):
        issues.append(ValidationIssue(field="n", message=f"n={g.n} but {len(g.bidders)} bidders listed"))
    if g.m < 1:
        issues.append(ValidationIssue(field="m", message="at least one item is required"))
    if g.h < 1:
        issues.append(ValidationIssue(field="h", message="shares per item must be at least 1"))
    if g.epsilon <= 0:
        issues.append(ValidationIssue(field="epsilon", message="bid grid step must be positive"))

    for i, bidder in enumerate(g.bidders):
        if bidder.budget < 0:
            issues.append(ValidationIssue(bidder=i, field="budget", message=f"negative budget {bidder.budget}"))
        v = bidder.valuation
        if isinstance(v, XOSValuation) and not v.clauses:
            issues.append(ValidationIssue(bidder=i, field="valuation.clauses", message="XOS valuation has no clauses"))
        for r, clause in enumerate(v.clauses):
            where = "valuation.values" if isinstance(v, AdditiveValuation) else f"valuation.clauses[{r}]"
            if len(clause) != g.m:
                issues.append(ValidationIssue(
                    bidder=i, field=where, message=f"expected {g.m} values, got {len(clause)}",
                ))
            if any(a < 0 for a in clause):
                issues.append(ValidationIssue(bidder=i, field=where, message="values must be nonnegative"))

    if issues:
        logger.info(f"Instance validation | issues={len(issues)}")
    return issues


def require_valid(g: GameInstance) -> GameInstance:
    issues = validate_instance(g)
    if issues:
        summary = "; ".join(
            f"bidder {x.bidder} {x.field}: {x.message}" if x.bidder is not None else f"{x.field}: {x.message}"
            for x in issues
        )
        raise ModelError(f"invalid instance: {summary}")
    return g


def load_json_document(path: str | Path) -> dict:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError("file not found", path=str(path))
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, path=str(path), line=e.lineno)


def load_instance(path: str | Path) -> GameInstance:
    data = load_json_document(path)
    try:
        return GameInstance.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"not a game instance: {e.errors()[0].get('msg', 'invalid')}", path=str(path))


def dump_instance(g: GameInstance, path: str | Path) -> None:
    Path(path).write_text(g.model_dump_json(indent=2) + "\n", encoding="utf-8")
