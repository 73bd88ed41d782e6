"""
Experiment orchestration: resolves instance sources, computes one row per (instance, mode)
concurrently and renders the ordered table as CSV and JSON with a run manifest.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lw_lab import __version__
from lw_lab.core.config import settings
from lw_lab.core.exceptions import ConfigError, LabError, PreconditionError
from lw_lab.core.logging import logger
from lw_lab.enums import ExperimentMode, MechanismEnum, ValuationClass
from lw_lab.schemas.analysis import AnalysisParams
from lw_lab.schemas.auction import TieBreakRule
from lw_lab.schemas.equilibrium import MixedProfile
from lw_lab.schemas.experiment import (
    ExperimentConfig,
    ExperimentResult,
    ExperimentRow,
    ExperimentSummary,
    InstanceSource,
    RandomInstanceSpec,
)
from lw_lab.schemas.game import AdditiveValuation, Bidder, GameInstance, XOSValuation
from lw_lab.services.deviations import audit_bounds
from lw_lab.services.equilibrium import as_mixed, best_response_dynamics, expected_profile_lw, verify_mixed_ne
from lw_lab.services.game_core import load_instance, load_json_document, require_valid
from lw_lab.services.instances import generate
from lw_lab.services.welfare import lpoa, opt_exact, solve_llp
from lw_lab.utils.io import CSV_COLUMNS, dump_model, load_profile, render_csv, write_text

_MODE_ORDER = {mode: k for k, mode in enumerate(ExperimentMode)}


def _grid_levels(lo: float, hi: float, epsilon: float, what: str) -> tuple[int, int]:
    if lo < 0 or hi < lo:
        raise ConfigError(f"{what} range ({lo}, {hi}) must be nonnegative and ordered")
    lo_level = int(np.ceil(lo / epsilon - 1e-9))
    hi_level = int(np.floor(hi / epsilon + 1e-9))
    if hi_level < lo_level:
        raise ConfigError(f"{what} range ({lo}, {hi}) holds no multiple of the grid step {epsilon}")
    return lo_level, hi_level


def random_instance(spec: RandomInstanceSpec, seed: int) -> GameInstance:
    """Values and budgets drawn uniformly from the grid points inside the configured ranges."""
    eps = spec.epsilon
    v_lo, v_hi = _grid_levels(*spec.value_range, eps, "value")
    b_lo, b_hi = _grid_levels(*spec.budget_range, eps, "budget")
    rng = np.random.default_rng(seed)

    clauses = spec.clauses if spec.valuation_class is ValuationClass.XOS else 1
    values = rng.integers(v_lo, v_hi + 1, size=(spec.n, clauses, spec.m))
    budgets = rng.integers(b_lo, b_hi + 1, size=spec.n)

    bidders = []
    for i in range(spec.n):
        rows = [[round(float(x) * eps, 12) for x in clause] for clause in values[i]]
        if spec.valuation_class is ValuationClass.XOS:
            valuation = XOSValuation(clauses=rows)
        else:
            valuation = AdditiveValuation(values=rows[0])
        bidders.append(Bidder(budget=round(float(budgets[i]) * eps, 12), valuation=valuation))
    return require_valid(GameInstance.build(bidders, m=spec.m, h=spec.h, epsilon=eps))


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    data = load_json_document(path)
    try:
        return ExperimentConfig.model_validate(data)
    except ValueError as e:
        raise ConfigError(f"invalid experiment config: {e}", path=str(path))


@dataclass(frozen=True)
class ResolvedInstance:
    instance_id: str
    game: GameInstance
    mechanism: MechanismEnum
    tie_break: TieBreakRule
    profile: MixedProfile | None = None


class ExperimentRunner:

    def __init__(self, cfg: ExperimentConfig, base_dir: str | Path | None = None):
        self.cfg = cfg
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()
        self.params = AnalysisParams(alpha=cfg.alpha, gamma=cfg.gamma)

    # ── Sources ───────────────────────────────────────────────

    def _path(self, value: str) -> Path:
        path = Path(value)
        return path if path.is_absolute() else self.base_dir / path

    def _tie(self, default: TieBreakRule | None = None) -> TieBreakRule:
        if self.cfg.tie_break:
            try:
                return TieBreakRule.parse(self.cfg.tie_break)
            except ValueError as e:
                raise ConfigError(str(e))
        return default or TieBreakRule.lexicographic()

    def _resolve(self, k: int, src: InstanceSource) -> ResolvedInstance:
        if src.family is not None:
            mechanism = src.mechanism or self.cfg.mechanism
            cert = generate(src.family, dict(src.params), mechanism)
            return ResolvedInstance(
                instance_id=src.id or cert.instance_id,
                game=cert.game,
                mechanism=mechanism or cert.mechanism,
                tie_break=self._tie(cert.tie_break),
                profile=cert.profile,
            )

        mechanism = src.mechanism or self.cfg.mechanism or MechanismEnum.FIRST
        if src.random is not None:
            seed = src.seed if src.seed is not None else self.cfg.seed + k
            return ResolvedInstance(
                instance_id=src.id or f"random/{seed:06d}",
                game=random_instance(src.random, seed),
                mechanism=mechanism,
                tie_break=self._tie(),
            )

        game = load_instance(self._path(src.path))
        profile = None
        if src.profile:
            profile = as_mixed(game, mechanism, load_profile(self._path(src.profile)))
        return ResolvedInstance(
            instance_id=src.id or Path(src.path).stem,
            game=require_valid(game),
            mechanism=mechanism,
            tie_break=self._tie(),
            profile=profile,
        )

    def resolve_all(self) -> list[ResolvedInstance]:
        sources = list(self.cfg.instances)
        family = self.cfg.random_family
        if family is not None:
            sources += [InstanceSource(random=family.spec, seed=self.cfg.seed + k) for k in range(family.count)]
        return [self._resolve(k, src) for k, src in enumerate(sources)]

    # ── Rows ──────────────────────────────────────────────────

    @staticmethod
    def _opt(g: GameInstance) -> float | None:
        if g.total_shares <= settings.OPT_MAX_SHARES:
            return opt_exact(g).value
        if g.is_additive:
            return solve_llp(g).objective
        return None

    def _needs_profile(self, inst: ResolvedInstance) -> MixedProfile:
        if inst.profile is None:
            raise ConfigError(f"instance {inst.instance_id} has no profile to check")
        return inst.profile

    def _fill(self, row: ExperimentRow, inst: ResolvedInstance, mode: ExperimentMode) -> None:
        g, mech, tie = inst.game, inst.mechanism, inst.tie_break

        if mode is ExperimentMode.OPT:
            row.opt = opt_exact(g).value
        elif mode is ExperimentMode.LLP:
            row.llp = solve_llp(g).objective
        elif mode is ExperimentMode.VERIFY:
            s = self._needs_profile(inst)
            row.verdict = verify_mixed_ne(g, mech, s, tie).is_equilibrium
            row.eq_lw = expected_profile_lw(g, mech, s, tie)
        elif mode is ExperimentMode.LPOA:
            s = self._needs_profile(inst)
            row.verdict = verify_mixed_ne(g, mech, s, tie).is_equilibrium
            row.eq_lw = expected_profile_lw(g, mech, s, tie)
            row.opt = self._opt(g)
            if row.opt is not None:
                row.lpoa = lpoa(row.opt, row.eq_lw)
        elif mode is ExperimentMode.AUDIT:
            s = self._needs_profile(inst)
            try:
                report = audit_bounds(g, mech, s, tie, self.params)
            except PreconditionError:
                row.verdict = False
                raise
            row.verdict = True
            row.opt, row.llp = report.opt, report.llp_objective
            row.eq_lw, row.lpoa = report.liquid_welfare, report.lpoa
            failed = [c.name for c in report.checks if not c.holds]
            row.audit_flags = ";".join(failed) if failed else "all hold"
        elif mode is ExperimentMode.BRD:
            result = best_response_dynamics(g, mech, tie)
            row.converged = result.converged
            if result.converged:
                row.verdict = verify_mixed_ne(g, mech, result.profile, tie).is_equilibrium
                row.eq_lw = expected_profile_lw(g, mech, result.profile, tie)
                row.opt = self._opt(g)
                if row.opt is not None and row.eq_lw > settings.TOLERANCE:
                    row.lpoa = row.opt / row.eq_lw

    def compute_row(self, inst: ResolvedInstance, mode: ExperimentMode) -> ExperimentRow:
        g = inst.game
        row = ExperimentRow(
            instance_id=inst.instance_id, mode=mode, n=g.n, m=g.m, h=g.h, mechanism=inst.mechanism.value,
        )
        started = time.perf_counter()
        try:
            self._fill(row, inst, mode)
        except LabError as e:
            row.error = f"{type(e).__name__}: {e}"
            logger.warning(f"Experiment row failed | mode={mode.value} | error={row.error}", extra={"instance_id": inst.instance_id})
        except Exception as e:
            row.error = f"{type(e).__name__}: {e}"
            logger.error(f"Experiment row crashed | mode={mode.value} | error={row.error}", extra={"instance_id": inst.instance_id})
        if self.cfg.include_timing:
            row.wall_time = time.perf_counter() - started
        return row

    # ── Run ───────────────────────────────────────────────────

    def manifest(self) -> dict:
        return {
            "tool": settings.APP_NAME,
            "version": __version__,
            "seed": self.cfg.seed,
            "config": self.cfg.model_dump(mode="json"),
        }

    @staticmethod
    def summarize(rows: list[ExperimentRow]) -> ExperimentSummary:
        brd = [r for r in rows if r.mode is ExperimentMode.BRD and r.error is None]
        converged = [r for r in brd if r.converged]
        ratios = [r.eq_lw / r.opt for r in converged if r.opt and r.eq_lw is not None]
        return ExperimentSummary(
            rows=len(rows),
            errors=sum(1 for r in rows if r.error is not None),
            failed_verdicts=sum(1 for r in rows if r.verdict is False),
            brd_runs=len(brd),
            brd_converged=len(converged),
            convergence_rate=len(converged) / len(brd) if brd else None,
            min_lw_opt_ratio=min(ratios) if ratios else None,
            mean_lw_opt_ratio=sum(ratios) / len(ratios) if ratios else None,
        )

    def run(self) -> ExperimentResult:
        instances = self.resolve_all()
        tasks = [(inst, mode) for inst in instances for mode in self.cfg.modes]
        logger.info(f"Experiment started | instances={len(instances)} | rows={len(tasks)}")

        with ThreadPoolExecutor(max_workers=settings.thread_count) as executor:
            rows = list(executor.map(lambda task: self.compute_row(*task), tasks))
        rows.sort(key=lambda r: (r.instance_id, _MODE_ORDER[r.mode]))

        result = ExperimentResult(manifest=self.manifest(), rows=rows, summary=self.summarize(rows))
        logger.info(
            f"Experiment finished | rows={result.summary.rows} | errors={result.summary.errors} | "
            f"failed_verdicts={result.summary.failed_verdicts}"
        )
        return result


def run_experiment(cfg: ExperimentConfig, base_dir: str | Path | None = None) -> ExperimentResult:
    return ExperimentRunner(cfg, base_dir).run()


def render_result_csv(result: ExperimentResult, include_timing: bool = False) -> str:
    columns = CSV_COLUMNS + (["wall_time"] if include_timing else [])
    return render_csv([r.model_dump() for r in result.rows], result.manifest, columns)


def write_result(result: ExperimentResult, output: str | Path, include_timing: bool = False) -> tuple[Path, Path]:
    """Writes `<output>.csv` and `<output>.json`."""
    base = Path(output)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    csv_path, json_path = base.with_suffix(".csv"), base.with_suffix(".json")
    write_text(render_result_csv(result, include_timing), csv_path)
    write_text(dump_model(result), json_path)
    return csv_path, json_path
