import json

import pytest

from lw_lab.core.config import settings
from lw_lab.core.exceptions import ConfigError
from lw_lab.enums import ExperimentMode, FamilyEnum, MechanismEnum, ValuationClass
from lw_lab.schemas.experiment import (
    ExperimentConfig,
    InstanceSource,
    RandomFamily,
    RandomInstanceSpec,
)
from lw_lab.services.experiment_service import (
    load_experiment_config,
    random_instance,
    render_result_csv,
    run_experiment,
    write_result,
)
from lw_lab.services.game_core import dump_instance
from lw_lab.services.instances import gen_tightness
from lw_lab.utils.io import CSV_COLUMNS, dump_model

SMALL = RandomInstanceSpec(n=2, m=2, epsilon=0.25, value_range=(0.0, 2.0), budget_range=(0.5, 1.0))


def _tightness_config(**kwargs):
    return ExperimentConfig(
        instances=[
            InstanceSource(family=FamilyEnum.TIGHTNESS),
            InstanceSource(family=FamilyEnum.TIGHTNESS, mechanism=MechanismEnum.FIRST, id="tight-first"),
        ],
        **kwargs,
    )


# ── random instances ──────────────────────────────────────────

def test_random_instance_is_seeded():
    assert random_instance(SMALL, 7) == random_instance(SMALL, 7)
    draws = {random_instance(SMALL, seed).model_dump_json() for seed in range(10)}
    assert len(draws) > 1


def test_random_instance_stays_on_the_grid():
    g = random_instance(SMALL, 3)
    for bidder in g.bidders:
        assert 0.5 <= bidder.budget <= 1.0
        assert (bidder.budget / 0.25) == pytest.approx(round(bidder.budget / 0.25))
        for v in bidder.valuation.values:
            assert 0.0 <= v <= 2.0
            assert (v / 0.25) == pytest.approx(round(v / 0.25))


def test_random_xos_instance():
    spec = SMALL.model_copy(update={"valuation_class": ValuationClass.XOS, "clauses": 3})
    g = random_instance(spec, 0)
    assert not g.is_additive
    assert all(len(b.valuation.clauses) == 3 for b in g.bidders)


@pytest.mark.parametrize("value_range", [(2.0, 1.0), (-1.0, 1.0), (0.1, 0.2)])
def test_random_instance_rejects_bad_ranges(value_range):
    spec = SMALL.model_copy(update={"value_range": value_range})
    with pytest.raises(ConfigError):
        random_instance(spec, 0)


# ── runs ──────────────────────────────────────────────────────

def test_rows_are_ordered_by_instance_and_mode():
    cfg = _tightness_config(modes=[ExperimentMode.LPOA, ExperimentMode.VERIFY])
    result = run_experiment(cfg)
    keys = [(r.instance_id, r.mode) for r in result.rows]
    assert keys == [
        ("tight-first", ExperimentMode.VERIFY),
        ("tight-first", ExperimentMode.LPOA),
        ("tightness(epsilon=0.1)/second", ExperimentMode.VERIFY),
        ("tightness(epsilon=0.1)/second", ExperimentMode.LPOA),
    ]
    second = result.rows[3]
    assert second.verdict is True
    assert second.opt == pytest.approx(19.9)
    assert second.eq_lw == pytest.approx(10.0)
    assert second.lpoa == pytest.approx(1.99)
    assert not result.any_verdict_false


def test_outputs_are_byte_identical_across_runs(monkeypatch):
    cfg = _tightness_config(
        modes=[ExperimentMode.VERIFY, ExperimentMode.LPOA, ExperimentMode.BRD],
        random_family=RandomFamily(spec=SMALL, count=3),
    )
    first = render_result_csv(run_experiment(cfg))
    monkeypatch.setattr(settings, "LW_LAB_THREADS", 1)
    second = render_result_csv(run_experiment(cfg))
    assert first == second


def test_empty_suite_renders_header_only():
    text = render_result_csv(run_experiment(ExperimentConfig()))
    lines = text.splitlines()
    assert lines[0].startswith("# manifest ")
    assert lines[1] == ",".join(CSV_COLUMNS)
    assert len(lines) == 2


def test_manifest_records_the_config():
    result = run_experiment(ExperimentConfig(seed=11))
    manifest = json.loads(render_result_csv(result).splitlines()[0][len("# manifest "):])
    assert manifest["tool"] == "lw-lab"
    assert manifest["seed"] == 11
    assert manifest["config"]["modes"] == ["verify"]


def test_timing_column_only_on_request():
    cfg = _tightness_config(include_timing=True)
    result = run_experiment(cfg)
    assert all(r.wall_time is not None for r in result.rows)
    assert "wall_time" in render_result_csv(result, include_timing=True).splitlines()[1]
    assert "wall_time" not in render_result_csv(result).splitlines()[1]


def test_missing_profile_becomes_a_row_error():
    cfg = ExperimentConfig(instances=[InstanceSource(random=SMALL, seed=1)], modes=[ExperimentMode.VERIFY, ExperimentMode.OPT])
    result = run_experiment(cfg)
    verify, opt = result.rows
    assert verify.error.startswith("ConfigError")
    assert verify.verdict is None
    assert opt.error is None
    assert opt.opt is not None
    assert result.summary.errors == 1


def test_audit_mode_reports_flags():
    cfg = ExperimentConfig(instances=[InstanceSource(family=FamilyEnum.TIGHTNESS)], modes=[ExperimentMode.AUDIT])
    row = run_experiment(cfg).rows[0]
    assert row.error is None
    assert row.audit_flags == "all hold"
    assert row.lpoa == pytest.approx(1.99)


def test_brd_summary():
    cfg = ExperimentConfig(random_family=RandomFamily(spec=SMALL, count=4), modes=[ExperimentMode.BRD])
    result = run_experiment(cfg)
    summary = result.summary
    assert summary.brd_runs == 4
    assert 0 <= summary.brd_converged <= 4
    if summary.brd_converged:
        assert 0 <= summary.min_lw_opt_ratio <= summary.mean_lw_opt_ratio <= 1.0 + 1e-9
    assert [r.instance_id for r in result.rows] == [f"random/{k:06d}" for k in range(4)]


def test_config_tie_break_overrides_certificates():
    cfg = ExperimentConfig(instances=[InstanceSource(family=FamilyEnum.RAND_TIEBREAK)], tie_break="lex")
    row = run_experiment(cfg).rows[0]
    assert row.verdict is False
    assert run_experiment(cfg).any_verdict_false


# ── files ─────────────────────────────────────────────────────

def test_path_sources_resolve_against_the_config(tmp_path):
    cert = gen_tightness(0.1)
    dump_instance(cert.game, tmp_path / "game.json")
    (tmp_path / "profile.json").write_text(dump_model(cert.profile))
    (tmp_path / "run.json").write_text(json.dumps({
        "instances": [{"path": "game.json", "profile": "profile.json", "mechanism": "second"}],
        "modes": ["verify"],
    }))
    cfg = load_experiment_config(tmp_path / "run.json")
    row = run_experiment(cfg, base_dir=tmp_path).rows[0]
    assert row.instance_id == "game"
    assert row.verdict is True


def test_write_result(tmp_path):
    result = run_experiment(_tightness_config())
    csv_path, json_path = write_result(result, tmp_path / "out" / "run.csv")
    assert csv_path.name == "run.csv"
    assert json_path.name == "run.json"
    assert json.loads(json_path.read_text())["summary"]["rows"] == 2
    assert csv_path.read_text() == render_result_csv(result)


def test_config_with_two_sources_is_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"instances": [{"path": "g.json", "family": "tightness"}]}))
    with pytest.raises(ConfigError):
        load_experiment_config(path)


def test_no_pne_is_not_a_certified_source(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"instances": [{"family": "no-pne"}]}))
    with pytest.raises(ConfigError):
        load_experiment_config(path)


def test_malformed_config_is_rejected(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{\n  \"modes\": [\n")
    with pytest.raises(ConfigError):
        load_experiment_config(path)
