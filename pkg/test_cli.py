import json

import pytest

from lw_lab import __version__
from lw_lab.cli import main
from lw_lab.services.game_core import dump_instance
from lw_lab.services.instances import gen_no_pure_ne


@pytest.fixture
def tightness_files(tmp_path):
    out = tmp_path / "tight"
    assert main(["gen", "--family", "tightness", "--params", "epsilon=0.1", "--out", str(out)]) == 0
    return out


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_unknown_command_is_a_usage_error():
    assert main(["frobnicate"]) == 2


def test_gen_prints_certificate(capsys):
    assert main(["gen", "--family", "rand-tiebreak", "--params", "n=3"]) == 0
    cert = _json_out(capsys)
    assert cert["family"] == "rand-tiebreak"
    assert cert["claimed_opt"] == 3.0
    assert cert["tie_break"]["kind"] == "uniform"


def test_gen_writes_files(tightness_files):
    assert {p.name for p in tightness_files.iterdir()} == {"instance.json", "profile.json", "certificate.json"}


def test_gen_no_pne_writes_the_instance_only(tmp_path):
    assert main(["gen", "--family", "no-pne", "--params", "m=2", "--out", str(tmp_path)]) == 0
    assert [p.name for p in tmp_path.iterdir()] == ["instance.json"]


def test_gen_rejects_bad_params(capsys):
    assert main(["gen", "--family", "mixed", "--params", "n=2"]) == 2
    assert "InputError" in capsys.readouterr().err


def test_verify_certified_profile(tightness_files, capsys):
    code = main([
        "verify", "--instance", str(tightness_files / "instance.json"),
        "--profile", str(tightness_files / "profile.json"), "--mechanism", "second",
    ])
    assert code == 0
    assert _json_out(capsys)["is_equilibrium"] is True


def test_verify_non_equilibrium_exits_one(tightness_files, tmp_path, capsys):
    zeros = tmp_path / "zeros.json"
    zeros.write_text(json.dumps({"bids": [[[0.0], [0.0]], [[0.0], [0.0]]]}))
    code = main([
        "verify", "--instance", str(tightness_files / "instance.json"),
        "--profile", str(zeros), "--mechanism", "second",
    ])
    assert code == 1
    verdict = _json_out(capsys)
    assert verdict["worst_deviation"]["bidder"] == 1


def test_opt_and_llp(tightness_files, capsys):
    assert main(["opt", "--instance", str(tightness_files / "instance.json")]) == 0
    assert _json_out(capsys)["value"] == pytest.approx(19.9)
    assert main(["llp", "--instance", str(tightness_files / "instance.json")]) == 0
    assert _json_out(capsys)["objective"] == pytest.approx(19.9)


def test_lpoa(tightness_files, capsys):
    code = main([
        "lpoa", "--instance", str(tightness_files / "instance.json"),
        "--profile", str(tightness_files / "profile.json"), "--mechanism", "second",
    ])
    assert code == 0
    report = _json_out(capsys)
    assert report["lpoa"] == pytest.approx(1.99)
    assert report["opt_source"] == "exact"


def test_audit(tightness_files, capsys):
    code = main([
        "audit", "--instance", str(tightness_files / "instance.json"),
        "--profile", str(tightness_files / "profile.json"), "--mechanism", "second",
        "--alpha", "2.26", "--gamma", "7.16",
    ])
    assert code == 0
    report = _json_out(capsys)
    assert all(check["holds"] for check in report["checks"])


def test_brd_reports_a_cycle(tmp_path, capsys):
    path = tmp_path / "nopne.json"
    dump_instance(gen_no_pure_ne(3), path)
    assert main(["brd", "--instance", str(path), "--mechanism", "first"]) == 0
    result = _json_out(capsys)
    assert result["converged"] is False
    assert result["cycle_detected"] is True


def test_missing_instance_exits_two(tmp_path, capsys):
    code = main(["opt", "--instance", str(tmp_path / "nowhere.json")])
    assert code == 2
    err = capsys.readouterr().err
    assert "file not found" in err


def test_invalid_instance_exits_two(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"n": 1, "m": 1, "bidders": [{"budget": -1.0, "valuation": {"type": "additive", "values": [1.0]}}]}))
    assert main(["opt", "--instance", str(path)]) == 2


def test_bad_tie_rule_is_a_usage_error(tightness_files):
    code = main([
        "verify", "--instance", str(tightness_files / "instance.json"),
        "--profile", str(tightness_files / "profile.json"), "--ties", "coin",
    ])
    assert code == 2


@pytest.mark.parametrize("ties", ["lex:0,0", "lex:5"])
def test_tie_order_that_is_not_a_permutation_exits_two(tightness_files, ties):
    code = main([
        "verify", "--instance", str(tightness_files / "instance.json"),
        "--profile", str(tightness_files / "profile.json"), "--mechanism", "second", "--ties", ties,
    ])
    assert code == 2


def test_suite_with_config(tmp_path, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "instances": [{"family": "tightness"}, {"family": "rand-tiebreak", "params": {"n": 2}}],
        "modes": ["lpoa"],
    }))
    assert main(["suite", "--config", str(config), "--output", str(tmp_path / "result")]) == 0
    lines = (tmp_path / "result.csv").read_text().splitlines()
    assert lines[0].startswith("# manifest ")
    assert len(lines) == 4
    assert json.loads((tmp_path / "result.json").read_text())["summary"]["failed_verdicts"] == 0


def test_suite_exits_one_on_a_false_verdict(tmp_path, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "instances": [{"family": "rand-tiebreak", "params": {"n": 2}}],
        "tie_break": "lex",
    }))
    assert main(["suite", "--config", str(config)]) == 1
    assert "false" in capsys.readouterr().out


def test_bayes(tmp_path, capsys):
    def kind(value, probability):
        return {"valuation": {"type": "additive", "values": [value]}, "budget": 4.0, "probability": probability}

    def point(bid):
        return [{"row": [[bid]], "probability": 1.0}]

    game = tmp_path / "game.json"
    game.write_text(json.dumps({
        "m": 1, "h": 1, "epsilon": 1.0,
        "bidders": [{"types": [kind(2.0, 0.5), kind(4.0, 0.5)]}, {"types": [kind(3.0, 1.0)]}],
    }))
    strategy = tmp_path / "strategy.json"
    strategy.write_text(json.dumps({"strategies": [[point(1.0), point(2.0)], [point(2.0)]]}))
    assert main(["bayes", "--game", str(game), "--strategy", str(strategy)]) == 0
    assert _json_out(capsys)["is_equilibrium"] is True

    strategy.write_text(json.dumps({"strategies": [[point(0.0), point(2.0)], [point(1.0)]]}))
    assert main(["bayes", "--game", str(game), "--strategy", str(strategy)]) == 1
