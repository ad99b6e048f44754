"""
Command-line entry point.

    python -m broyden_lab run <config.json> [--jobs N] [--out DIR]
    python -m broyden_lab verify [--n-max K] [--trials T] [--seed S]
    python -m broyden_lab sweep <grid.json> [--out DIR]

Exit codes: 0 when everything passes, 1 on a bound violation, a failed check
or a divergence, 2 on a malformed config or invalid arguments.
"""

import argparse
import logging
import sys
import traceback
from pathlib import Path

from pydantic import TypeAdapter, ValidationError

from .reporting import SWEEP_FILE, write_sweep_csv
from .shared_libraries.errors import BroydenLabError
from .shared_libraries.settings import configure_logging, load_settings
from .shared_libraries.types import ExperimentConfig, SweepGrid, Verdict, VerifyRequest
from .verifiers import run_verification
from .workflow import DEFAULT_OUTPUT_ROOT, apply_seed_override, run_suite, run_sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

_CONFIG_ADAPTER = TypeAdapter(ExperimentConfig | list[ExperimentConfig])


def _fmt_slack(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.3e}"


def load_configs(path: str | Path) -> list[ExperimentConfig]:
    """Parse a config file holding one experiment or a suite array."""
    text = Path(path).read_text(encoding="utf-8")
    parsed = _CONFIG_ADAPTER.validate_json(text)
    return parsed if isinstance(parsed, list) else [parsed]


def cmd_run(args: argparse.Namespace) -> int:
    try:
        configs = load_configs(args.config)
    except (OSError, ValidationError) as e:
        print(f"error: invalid config {args.config}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if not configs:
        print("error: config holds no experiments", file=sys.stderr)
        return EXIT_CONFIG
    configs = [apply_seed_override(c, args.seed_override) for c in configs]
    try:
        suite = run_suite(configs, jobs=args.jobs, out_root=args.out)
    except BroydenLabError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    for result in suite.experiments:
        status = "PASS" if result.passed else "FAIL"
        print(
            f"{status} {result.name}: iterations={result.iterations} "
            f"first_violation={result.first_violation} min_slack={_fmt_slack(result.min_slack)} "
            f"wall_time={result.wall_time:.3f}s"
        )
        if result.message:
            print(f"     {result.message}")
    return EXIT_OK if suite.passed else EXIT_FAILED


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        request = VerifyRequest(n_max=args.n_max, trials=args.trials, seed=args.seed)
    except ValidationError as e:
        print(f"error: invalid verify arguments: {e}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_verification(request)
    for key, evaluation in report.evaluations.items():
        print(
            f"{evaluation.verdict.value:<13} {key}: worst_slack={_fmt_slack(evaluation.worst_slack)} "
            f"samples={evaluation.samples}"
        )
    overall = report.global_evaluation
    print(f"{overall.verdict.value:<13} global: {overall.evaluation}")
    return EXIT_OK if overall.verdict is Verdict.PASS else EXIT_FAILED


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        grid = SweepGrid.model_validate_json(Path(args.grid).read_text(encoding="utf-8"))
    except (OSError, ValidationError) as e:
        print(f"error: invalid sweep grid {args.grid}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    rows = run_sweep(grid)
    out_dir = Path(args.out) if args.out else Path(DEFAULT_OUTPUT_ROOT) / "sweep"
    out_dir.mkdir(parents=True, exist_ok=True)
    path = write_sweep_csv(rows, out_dir / SWEEP_FILE)
    for row in rows:
        print(
            f"{'PASS' if row.passed else 'FAIL'} n={row.n} L/mu={row.L_over_mu:g} {row.method}: "
            f"iters={row.iters_to_tol} K0_new={row.K0_new:.4g} K0_prev={row.K0_prev:.4g}"
        )
    print(f"wrote {path}")
    return EXIT_OK if all(row.passed for row in rows) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="broyden_lab",
        description="Run and verify convex Broyden-class quasi-Newton experiments.",
    )
    parser.add_argument("--log-level", default=None, help="Overrides BROYDEN_LAB_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run the experiments of a JSON config")
    run.add_argument("config", help="Path to a JSON experiment or array of experiments")
    run.add_argument("--jobs", type=int, default=1, help="Worker processes for independent experiments")
    run.add_argument("--out", default=None, help="Output root; one sub-directory per experiment")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="Randomized identity and lemma suites")
    verify.add_argument("--n-max", type=int, default=8)
    verify.add_argument("--trials", type=int, default=1000)
    verify.add_argument("--seed", type=int, default=0)
    verify.set_defaults(func=cmd_verify)

    sweep = sub.add_parser("sweep", help="Iterations-to-tolerance over an (n, L/mu, method) grid")
    sweep.add_argument("grid", help="Path to a JSON sweep grid")
    sweep.add_argument("--out", default=None, help="Directory for sweep.csv")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    settings = load_settings()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    configure_logging(args.log_level.upper() if args.log_level else settings.log_level)
    args.seed_override = settings.seed_override
    try:
        return args.func(args)
    except Exception:
        logger.error(traceback.format_exc())
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
