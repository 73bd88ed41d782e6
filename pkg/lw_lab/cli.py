"""
`lw-lab` command line. Results go to stdout as JSON or CSV, logs to stderr.
Exit codes: 0 success, 1 a verdict came out false, 2 input/configuration error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from lw_lab import __version__
from lw_lab.core.config import settings
from lw_lab.core.exceptions import EXIT_NOT_EQUILIBRIUM, EXIT_OK, handle_cli_exception
from lw_lab.core.logging import logger, setup_logging
from lw_lab.enums import ExperimentMode, FamilyEnum, MechanismEnum
from lw_lab.schemas.analysis import AnalysisParams
from lw_lab.schemas.auction import TieBreakRule
from lw_lab.schemas.experiment import ExperimentConfig, InstanceSource
from lw_lab.schemas.welfare import LPoAReport
from lw_lab.services.deviations import audit_bounds
from lw_lab.services.equilibrium import (
    as_mixed,
    best_response_dynamics,
    expected_profile_lw,
    verify_bayesian_ne,
    verify_mixed_ne,
)
from lw_lab.services.experiment_service import (
    load_experiment_config,
    render_result_csv,
    run_experiment,
    write_result,
)
from lw_lab.services.game_core import dump_instance, load_instance, require_valid
from lw_lab.services.instances import DEFAULT_PARAMS, gen_no_pure_ne, generate, parse_params
from lw_lab.services.welfare import lpoa, opt_exact, solve_llp
from lw_lab.utils.io import dump_model, load_bayesian, load_profile, write_text


def _ties(text: str) -> TieBreakRule:
    try:
        return TieBreakRule.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _add_game_args(p: argparse.ArgumentParser, profile: bool = True) -> None:
    p.add_argument("--instance", required=True, help="GameInstance JSON")
    if profile:
        p.add_argument("--profile", required=True, help="bids, demands or mixed strategies JSON")
    p.add_argument("--mechanism", choices=MechanismEnum.values(), default=MechanismEnum.FIRST.value)
    p.add_argument("--ties", type=_ties, default=TieBreakRule.lexicographic(), help="lex, lex:2,0,1, uniform or uniform:SEED")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lw-lab", description="Liquid welfare of budgeted share auctions")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help=f"overrides LOG_LEVEL (default {settings.LOG_LEVEL})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a certified construction")
    p.add_argument("--family", choices=FamilyEnum.values(), required=True)
    p.add_argument("--params", default=None, help="e.g. n=4 or n=7,h=2 or epsilon=0.1")
    p.add_argument("--mechanism", choices=[MechanismEnum.FIRST.value, MechanismEnum.SECOND.value], default=None,
                   help="pricing rule for the tightness family")
    p.add_argument("--out", default=None, help="directory for instance.json, profile.json and certificate.json")

    p = sub.add_parser("verify", help="check a (mixed) Nash equilibrium")
    _add_game_args(p)
    p.add_argument("--restricted", action="store_true", help="use the structured deviation family")

    for name, what in (("opt", "exact liquid welfare optimum"), ("llp", "liquid welfare LP relaxation")):
        p = sub.add_parser(name, help=what)
        p.add_argument("--instance", required=True)

    p = sub.add_parser("lpoa", help="OPT over expected equilibrium liquid welfare")
    _add_game_args(p)

    p = sub.add_parser("audit", help="evaluate the LPoA proof inequalities at an equilibrium")
    _add_game_args(p)
    p.add_argument("--alpha", type=float, default=settings.DEFAULT_ALPHA)
    p.add_argument("--gamma", type=float, default=settings.DEFAULT_GAMMA)

    p = sub.add_parser("brd", help="best-response dynamics from zero bids or --initial")
    _add_game_args(p, profile=False)
    p.add_argument("--initial", default=None)
    p.add_argument("--max-rounds", type=int, default=None)

    p = sub.add_parser("suite", help="run an experiment config or the certified suite")
    p.add_argument("--config", default=None, help="ExperimentConfig JSON; default is the certified suite")
    p.add_argument("--mode", action="append", choices=ExperimentMode.values(), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", default=None, help="writes OUTPUT.csv and OUTPUT.json; CSV to stdout otherwise")
    p.add_argument("--include-timing", action="store_true")

    p = sub.add_parser("bayes", help="interim check of a Bayesian equilibrium")
    p.add_argument("--game", required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--mechanism", choices=MechanismEnum.values(), default=MechanismEnum.FIRST.value)
    p.add_argument("--ties", type=_ties, default=TieBreakRule.lexicographic())
    return parser


# ── Commands ──────────────────────────────────────────────────

def cmd_gen(args) -> int:
    family = FamilyEnum(args.family)
    params = parse_params(args.params)
    out = Path(args.out) if args.out else None

    if family is FamilyEnum.NO_PNE:
        merged = {**DEFAULT_PARAMS[family], **params}
        g = gen_no_pure_ne(int(merged["m"]), float(merged.get("epsilon", 0.05)))
        if out is None:
            write_text(dump_model(g), None)
        else:
            out.mkdir(parents=True, exist_ok=True)
            dump_instance(g, out / "instance.json")
        return EXIT_OK

    mechanism = MechanismEnum(args.mechanism) if args.mechanism else None
    cert = generate(family, params, mechanism)
    if out is None:
        write_text(dump_model(cert), None)
        return EXIT_OK
    out.mkdir(parents=True, exist_ok=True)
    dump_instance(cert.game, out / "instance.json")
    write_text(dump_model(cert.profile), out / "profile.json")
    write_text(dump_model(cert), out / "certificate.json")
    logger.info(f"Certified instance written | id={cert.instance_id} | dir={out}")
    return EXIT_OK


def _game_and_profile(args):
    g = require_valid(load_instance(args.instance))
    mechanism = MechanismEnum(args.mechanism)
    s = as_mixed(g, mechanism, load_profile(args.profile))
    return g, mechanism, s


def cmd_verify(args) -> int:
    g, mechanism, s = _game_and_profile(args)
    verdict = verify_mixed_ne(g, mechanism, s, args.ties, restricted=args.restricted)
    write_text(dump_model(verdict), None)
    return EXIT_OK if verdict.is_equilibrium else EXIT_NOT_EQUILIBRIUM


def cmd_opt(args) -> int:
    result = opt_exact(require_valid(load_instance(args.instance)))
    write_text(result.model_dump_json(include={"value", "allocation"}, indent=2) + "\n", None)
    return EXIT_OK


def cmd_llp(args) -> int:
    write_text(dump_model(solve_llp(require_valid(load_instance(args.instance)))), None)
    return EXIT_OK


def cmd_lpoa(args) -> int:
    g, mechanism, s = _game_and_profile(args)
    eq_lw = expected_profile_lw(g, mechanism, s, args.ties)
    if g.total_shares <= settings.OPT_MAX_SHARES:
        opt, source = opt_exact(g).value, "exact"
    else:
        opt, source = solve_llp(g).objective, "llp"
        logger.warning(f"OPT replaced by its LP relaxation | shares={g.total_shares}")
    report = LPoAReport(opt=opt, opt_source=source, eq_lw=eq_lw, lpoa=lpoa(opt, eq_lw))
    write_text(dump_model(report), None)
    return EXIT_OK


def cmd_audit(args) -> int:
    g, mechanism, s = _game_and_profile(args)
    params = AnalysisParams(alpha=args.alpha, gamma=args.gamma)
    report = audit_bounds(g, mechanism, s, args.ties, params)
    write_text(dump_model(report), None)
    return EXIT_OK


def cmd_brd(args) -> int:
    g = require_valid(load_instance(args.instance))
    mechanism = MechanismEnum(args.mechanism)
    initial = as_mixed(g, mechanism, load_profile(args.initial)) if args.initial else None
    result = best_response_dynamics(g, mechanism, args.ties, initial=initial, max_rounds=args.max_rounds)
    write_text(dump_model(result), None)
    return EXIT_OK


def cmd_suite(args) -> int:
    if args.config:
        cfg = load_experiment_config(args.config)
        base_dir = Path(args.config).resolve().parent
    else:
        sources = [InstanceSource(family=f) for f in FamilyEnum if f is not FamilyEnum.NO_PNE]
        sources.insert(1, InstanceSource(family=FamilyEnum.TIGHTNESS, mechanism=MechanismEnum.FIRST))
        cfg = ExperimentConfig(instances=sources, modes=[ExperimentMode.LPOA])
        base_dir = None

    updates = {}
    if args.mode:
        updates["modes"] = [ExperimentMode(m) for m in args.mode]
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.include_timing:
        updates["include_timing"] = True
    if args.output:
        updates["output"] = args.output
    cfg = cfg.model_copy(update=updates)

    result = run_experiment(cfg, base_dir)
    if cfg.output:
        csv_path, json_path = write_result(result, cfg.output, cfg.include_timing)
        logger.info(f"Experiment written | csv={csv_path} | json={json_path}")
    else:
        write_text(render_result_csv(result, cfg.include_timing), None)
    return EXIT_NOT_EQUILIBRIUM if result.any_verdict_false else EXIT_OK


def cmd_bayes(args) -> int:
    game, strategy = load_bayesian(args.game, args.strategy)
    verdict = verify_bayesian_ne(game, MechanismEnum(args.mechanism), strategy, args.ties)
    write_text(dump_model(verdict), None)
    return EXIT_OK if verdict.is_equilibrium else EXIT_NOT_EQUILIBRIUM


COMMANDS = {
    "gen": cmd_gen,
    "verify": cmd_verify,
    "opt": cmd_opt,
    "llp": cmd_llp,
    "lpoa": cmd_lpoa,
    "audit": cmd_audit,
    "brd": cmd_brd,
    "suite": cmd_suite,
    "bayes": cmd_bayes,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 on --help/--version
        return int(e.code or 0)

    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except Exception as e:
        return handle_cli_exception(e)


if __name__ == "__main__":
    sys.exit(main())
