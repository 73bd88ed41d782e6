from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path

from pydantic import BaseModel, ValidationError

from lw_lab.core.exceptions import ConfigError
from lw_lab.schemas.auction import BidProfile, HouseDemand
from lw_lab.schemas.equilibrium import BayesianGame, BayesianStrategy, MixedProfile
from lw_lab.services.game_core import load_json_document

CSV_COLUMNS = [
    "instance_id", "mode", "n", "m", "h", "mechanism", "opt", "llp", "eq_lw", "lpoa",
    "verdict", "converged", "audit_flags", "error",
]


def _validate(model: type[BaseModel], data: dict, path: str | Path, what: str):
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(x) for x in first.get("loc", ()))
        raise ConfigError(f"not a {what}: {where}: {first.get('msg', 'invalid')}", path=str(path))


def load_profile(path: str | Path) -> BidProfile | HouseDemand | MixedProfile:
    """Reads `{"bids": ...}`, `{"demands": ...}` or `{"strategies": ...}` documents."""
    data = load_json_document(path)
    if not isinstance(data, dict):
        raise ConfigError("profile document must be a JSON object", path=str(path))
    if "profile" in data and isinstance(data["profile"], dict):
        data = data["profile"]
    if "strategies" in data:
        return _validate(MixedProfile, data, path, "mixed profile")
    if "demands" in data:
        return _validate(HouseDemand, data, path, "house demand")
    if "bids" in data:
        return _validate(BidProfile, data, path, "bid profile")
    raise ConfigError("profile needs one of bids, demands or strategies", path=str(path))


def load_bayesian(game_path: str | Path, strategy_path: str | Path) -> tuple[BayesianGame, BayesianStrategy]:
    game = _validate(BayesianGame, load_json_document(game_path), game_path, "Bayesian game")
    strategy = _validate(BayesianStrategy, load_json_document(strategy_path), strategy_path, "Bayesian strategy")
    return game, strategy


def write_text(text: str, path: str | Path | None) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def dump_model(model: BaseModel) -> str:
    return model.model_dump_json(indent=2) + "\n"


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.9f}"
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def render_csv(rows: list[dict], manifest: dict, columns: list[str]) -> str:
    buffer = io.StringIO()
    buffer.write("# manifest " + json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row.get(c)) for c in columns])
    return buffer.getvalue()
