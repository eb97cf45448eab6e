"""
Main entry point: CLI for the variance, approx, simulate, ruintime, pickands
and validate commands. Every command reads one JSON experiment config and
writes a CSV table plus a JSON sidecar.
"""

import sys
import logging
import argparse

from config import RUIN_LOG_LEVEL, RUIN_WORKERS, invalid_settings, seed_override
from errors import ConfigError, DomainError, NumericalError

# Configure logging
logging.basicConfig(
    level=getattr(logging, RUIN_LOG_LEVEL, logging.INFO),
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
)
logger = logging.getLogger("parisian_ruin")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def load_config(args):
    """Load the experiment config and apply RUIN_SEED, --reps and --out."""
    from experiments.experiment import ExperimentConfig

    config = ExperimentConfig.load(args.config)
    try:
        seed = seed_override()
    except ValueError:
        raise ConfigError("RUIN_SEED must be an integer") from None
    if seed is not None:
        logger.info(f"🎲 RUIN_SEED overrides config seed {config.seed} -> {seed}")
    try:
        return config.with_overrides(seed=seed, reps=args.reps, output=args.out)
    except (DomainError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"invalid override: {e}") from e


def cmd_variance(config, args):
    from experiments.commands import run_variance
    logger.info("📈 Tabulating sigma2 and its derivative...")
    return run_variance(config, workers=args.workers)


def cmd_approx(config, args):
    from experiments.commands import run_approx
    logger.info("📐 Evaluating exact asymptotics...")
    return run_approx(config, workers=args.workers)


def cmd_simulate(config, args):
    from experiments.commands import run_simulate
    logger.info(f"🎲 Simulating ruin ({config.estimator.value}, {config.reps} reps, "
                f"{args.workers} workers)...")
    return run_simulate(config, workers=args.workers)


def cmd_ruintime(config, args):
    from experiments.commands import run_ruintime
    logger.info("⏱️  Estimating the conditional ruin-time law...")
    return run_ruintime(config, workers=args.workers)


def cmd_pickands(config, args):
    from experiments.commands import run_pickands
    logger.info("🔢 Estimating Pickands/Piterbarg constants...")
    return run_pickands(config, workers=args.workers)


def cmd_validate(config, args):
    from experiments.acceptance import VALIDATE_COLUMNS, AcceptanceContext, run_validate
    from experiments.commands import CommandOutput

    ctx = AcceptanceContext(seed=config.seed, workers=args.workers, reps_override=args.reps,
                            chunk_reps=config.chunk_reps)
    logger.info("🧪 Running the acceptance suite...")
    results = run_validate(ctx, only=args.only)
    passed = sum(r.passed for r in results)
    logger.info(f"✅ {passed}/{len(results)} criteria passed")
    return CommandOutput(VALIDATE_COLUMNS, [r.to_dict() for r in results],
                         {"passed": passed, "total": len(results)})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Parisian and classical ruin of integrated Gaussian risk processes"
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    commands = [
        ("variance", "Tabulate sigma2(t), its derivative and closed forms", cmd_variance),
        ("approx", "Exact asymptotics per initial reserve u", cmd_approx),
        ("simulate", "Monte Carlo classical and Parisian ruin per u", cmd_simulate),
        ("ruintime", "Conditional ruin-time law vs its exponential limit", cmd_ruintime),
        ("pickands", "Generalized Pickands and Piterbarg constants", cmd_pickands),
        ("validate", "Run the acceptance suite", cmd_validate),
    ]
    for name, help_text, func in commands:
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("config", help="Path to the JSON experiment config")
        sub.add_argument("--workers", type=int, default=RUIN_WORKERS,
                         help=f"Worker threads (default: {RUIN_WORKERS})")
        sub.add_argument("--reps", type=int, default=None, help="Override config reps")
        sub.add_argument("--out", default=None, help="Override config output path")
        sub.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
        if name == "validate":
            sub.add_argument("--only", type=int, nargs="+", default=None,
                             help="Run only these criterion numbers")
        sub.set_defaults(func=func)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_CONFIG

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    if args.workers < 1:
        logger.error("--workers must be >= 1")
        return EXIT_CONFIG
    bad = invalid_settings()
    if bad:
        logger.error(f"Config error: {', '.join(bad)} must be integers")
        return EXIT_CONFIG

    from results import write_results

    try:
        config = load_config(args)
        output = args.func(config, args)
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except DomainError as e:
        logger.error(f"Invalid experiment: {e}")
        return EXIT_CONFIG

    write_results(
        config.output, output.columns, output.rows,
        config_hash=config.config_hash(), seed=config.seed, subcommand=args.command,
        extra=output.extra,
    )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
