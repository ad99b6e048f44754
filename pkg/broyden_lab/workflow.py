"""
Experiment orchestration.

An experiment builds its instance, picks x0, runs the matching scheme, checks
the requested envelopes and the trace invariants, and writes its files.
Independent experiments of a suite run in parallel worker processes; one run
is always single-threaded.
"""

import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import reporting
from .audit import audit_trace
from .bounds import (
    EnvelopeReport,
    env_starting_moments,
    evaluate_envelopes,
    first_superlinear_crossing,
    region_radius,
)
from .operator_core import PrimalVector
from .problems import (
    ProblemInstance,
    build_instance,
    instance_hash,
    local_gradient_norm,
    minimizer,
    quad_make,
    random_ball_start,
    start_at_local_norm,
)
from .shared_libraries.callbacks import make_progress_callback
from .shared_libraries.errors import BroydenLabError, ConfigError, DivergenceError
from .shared_libraries.sampling import log_spaced_spectrum
from .shared_libraries.types import (
    CheckEvaluation,
    ExperimentConfig,
    ExperimentResult,
    ProblemKind,
    SolverConfig,
    SuiteResult,
    SweepGrid,
    SweepRow,
    Verdict,
)
from .solver import IterationTrace, TauSchedule, run_general, run_quadratic

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_ROOT = "out"


@dataclass(eq=False)
class ExperimentOutcome:
    result: ExperimentResult
    instance: ProblemInstance | None = None
    trace: IterationTrace | None = None
    reports: list[EnvelopeReport] | None = None


def resolve_start(config: ExperimentConfig, p: ProblemInstance, sched: TauSchedule) -> PrimalVector:
    start = config.x0
    if start.mode == "explicit":
        return PrimalVector(start.coords)
    if start.mode == "ball":
        center = minimizer(p) if start.center == "minimizer" else None
        return random_ball_start(p.n, start.radius, config.seed, center)
    radius = region_radius(p.mu, p.ell, p.n, sched.sup_tau, p.m_const)
    if math.isinf(radius):
        raise ConfigError("region start needs an instance with M > 0")
    return start_at_local_norm(p, start.region_fraction * radius, config.seed)


def output_dir_for(config: ExperimentConfig, out_root: str | Path | None = None) -> Path:
    if out_root is not None:
        return Path(out_root) / config.name
    if config.output_dir is not None:
        return Path(config.output_dir)
    return Path(DEFAULT_OUTPUT_ROOT) / config.name


def _verdict_passed(reports: list[EnvelopeReport], checks: list[CheckEvaluation]) -> bool:
    return all(r.passed for r in reports) and all(c.verdict is not Verdict.FAIL for c in checks)


@dataclass(eq=False)
class PreparedExperiment:
    instance: ProblemInstance
    schedule: TauSchedule
    x0: PrimalVector


def prepare_experiment(config: ExperimentConfig) -> PreparedExperiment:
    """Build the instance, the schedule and x0. Inconsistent configs raise ConfigError."""
    try:
        instance = build_instance(config.instance, config.seed)
        sched = TauSchedule.from_spec(config.method)
        x0 = resolve_start(config, instance, sched)
    except BroydenLabError as e:
        raise ConfigError(f"experiment {config.name}: {type(e).__name__}: {e}") from e
    return PreparedExperiment(instance, sched, x0)


def execute_experiment(config: ExperimentConfig, progress_secs: float | None = None) -> ExperimentOutcome:
    """
    Run one experiment in memory. Failures of the run are folded into the
    result; a config that cannot be realized raises ConfigError first.
    """
    prepared = prepare_experiment(config)
    instance = prepared.instance
    try:
        callback = make_progress_callback(progress_secs, config.name) if progress_secs else None
        runner = run_quadratic if instance.kind is ProblemKind.QUADRATIC else run_general
        trace = runner(instance, prepared.x0, prepared.schedule, config.solver, callback)
        reports = evaluate_envelopes(trace, config.envelopes, instance, config.envelope_mu_scale)
        checks = audit_trace(trace, instance)
    except DivergenceError as e:
        logger.error("Experiment %s diverged: %s", config.name, e)
        return ExperimentOutcome(
            ExperimentResult(name=config.name, passed=False, diverged=True, message=str(e)), instance,
        )
    except BroydenLabError as e:
        logger.error(traceback.format_exc())
        return ExperimentOutcome(
            ExperimentResult(name=config.name, passed=False, message=f"{type(e).__name__}: {e}"), instance,
        )

    enforced = [r for r in reports if r.enforced]
    violations = [r.first_violation for r in enforced if r.first_violation is not None]
    slacks = [r.min_slack for r in enforced if r.min_slack is not None]
    passed = _verdict_passed(reports, checks)
    result = ExperimentResult(
        name=config.name,
        passed=passed,
        iterations=trace.iterations,
        converged=trace.converged,
        first_violation=min(violations) if violations else None,
        min_slack=min(slacks) if slacks else None,
        wall_time=trace.wall_time,
        message="" if passed else _failure_message(reports, checks),
        envelopes=[r.to_summary() for r in reports],
        checks=checks,
    )
    return ExperimentOutcome(result, instance, trace, reports)


def _failure_message(reports: list[EnvelopeReport], checks: list[CheckEvaluation]) -> str:
    failed = [r.name for r in reports if not r.passed]
    failed += [c.name for c in checks if c.verdict is Verdict.FAIL]
    return "failed: " + ", ".join(failed)


def write_outcome(outcome: ExperimentOutcome, config: ExperimentConfig, out_dir: Path) -> list[str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    digest = instance_hash(outcome.instance) if outcome.instance is not None else ""
    if outcome.trace is not None:
        files.append(reporting.write_trace_csv(outcome.trace, out_dir / reporting.TRACE_FILE))
        files.append(reporting.write_trace_json(
            outcome.trace, out_dir / reporting.TRACE_JSON_FILE, config, digest,
        ))
        files.append(reporting.write_envelopes_csv(
            outcome.trace, outcome.reports, out_dir / reporting.ENVELOPES_FILE,
        ))
        payload = reporting.summary_payload(
            config.name, outcome.trace, outcome.reports, outcome.result.checks,
            digest, outcome.result.passed,
        )
    else:
        payload = {
            "name": config.name,
            "instance_hash": digest,
            "passed": False,
            "diverged": outcome.result.diverged,
            "message": outcome.result.message,
        }
    files.append(reporting.write_summary_json(payload, out_dir / reporting.SUMMARY_FILE))
    return [str(f) for f in files]


def run_experiment(
    config: ExperimentConfig,
    out_root: str | Path | None = None,
    write_files: bool = True,
    progress_secs: float | None = None,
) -> ExperimentResult:
    logger.info("Starting experiment %s", config.name)
    outcome = execute_experiment(config, progress_secs)
    result = outcome.result
    if write_files:
        files = write_outcome(outcome, config, output_dir_for(config, out_root))
        result = result.model_copy(update={"files": files})
    logger.info(
        "Experiment %s %s after %d iterations",
        config.name, "passed" if result.passed else "FAILED", result.iterations,
    )
    return result


def _run_one(args: tuple[ExperimentConfig, str | None]) -> ExperimentResult:
    config, out_root = args
    return run_experiment(config, out_root)


def validate_suite(configs: list[ExperimentConfig], out_root: str | Path | None = None) -> None:
    """Reject a suite before anything is written: shared directories or unrealizable configs."""
    names = [output_dir_for(c, out_root) for c in configs]
    if len(set(names)) != len(names):
        raise ConfigError("experiments in a suite must write to distinct directories")
    for config in configs:
        prepare_experiment(config)


def run_suite(
    configs: list[ExperimentConfig], jobs: int = 1, out_root: str | Path | None = None
) -> SuiteResult:
    """Run every experiment; with jobs > 1 they are spread over worker processes."""
    validate_suite(configs, out_root)
    root = str(out_root) if out_root is not None else None
    work = [(c, root) for c in configs]
    if jobs <= 1 or len(configs) <= 1:
        results = [_run_one(item) for item in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, work))
    return SuiteResult(experiments=results)


def apply_seed_override(config: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    if seed is None:
        return config
    return config.model_copy(update={"seed": seed})


def run_sweep(grid: SweepGrid) -> list[SweepRow]:
    """
    One quadratic run per (n, L/mu, method) cell, with the iteration count to
    reach lambda_k <= tol * lambda_0 and the starting moments of both estimates.
    """
    rows = []
    for n in grid.dims:
        for cond in grid.condition_numbers:
            spectrum = log_spaced_spectrum(n, 1.0, cond)
            problem = quad_make(spectrum, seed=grid.seed, mu=1.0, ell=float(cond))
            x0 = random_ball_start(n, 1.0, grid.seed)
            lam0 = local_gradient_norm(problem, x0)
            for method in grid.methods:
                sched = TauSchedule.bfgs() if method == "bfgs" else TauSchedule.dfp()
                rows.append(_sweep_cell(grid, problem, x0, lam0, sched, method, n, float(cond)))
    return rows


def _sweep_cell(
    grid: SweepGrid, problem, x0: PrimalVector, lam0: float, sched: TauSchedule,
    method: str, n: int, cond: float,
) -> SweepRow:
    moments = env_starting_moments(n, 1.0, cond, 1, 1.0, method)
    crossing = first_superlinear_crossing(n, 1.0, cond, sched.sup_tau, 10 ** 6)
    cfg = SolverConfig(max_iter=grid.max_iter, grad_tol=grid.tol * lam0)
    try:
        trace = run_quadratic(problem, x0, sched, cfg)
    except DivergenceError as e:
        logger.error("Sweep cell n=%d L/mu=%g %s diverged: %s", n, cond, method, e)
        return SweepRow(
            n=n, L_over_mu=cond, method=method, iters_to_tol=None,
            K0_new=moments.start_new, K0_prev=moments.start_prev,
            first_k_superlinear_env_below_linear_env=crossing, passed=False,
        )
    reports = evaluate_envelopes(trace, None, problem)
    return SweepRow(
        n=n,
        L_over_mu=cond,
        method=method,
        iters_to_tol=trace.iterations if trace.converged else None,
        K0_new=moments.start_new,
        K0_prev=moments.start_prev,
        first_k_superlinear_env_below_linear_env=crossing,
        passed=trace.converged and all(r.passed for r in reports),
    )
