import argparse
import logging
import sys

import results
from errors import ConfigurationError
from system import LabSystem

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def build_parser():
    parser = argparse.ArgumentParser(prog="mlshe-lab", description="Multilayer stochastic heat equation lab")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run an experiment and write results")
    run.add_argument("--config", help="YAML experiment configuration")
    run.add_argument("--threads", type=int, default=1, help="Worker pool size")
    run.add_argument("--out", help="Output directory (overrides output.directory)")
    run.add_argument("--seed", type=int, help="Master seed (overrides mc.master_seed)")
    run.add_argument("--verbose", action="store_true", help="Debug logging")

    report = commands.add_parser("report", help="Summarize a results directory")
    report.add_argument("--in", dest="in_dir", required=True, help="Results directory")
    return parser


def run_command(args):
    system = None
    try:
        system = LabSystem(config_path=args.config, threads=args.threads, out_dir=args.out, seed=args.seed)
        summary = system.run()
    except ConfigurationError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE
    finally:
        if system is not None:
            system.cleanup()
    print(summary.render())
    if not summary.passed:
        logger.error(f"Failing checks: {', '.join(row.check_id for row in summary.failing)}")
        return EXIT_FAILED
    return EXIT_OK


def report_command(args):
    try:
        summary = results.report(args.in_dir)
    except (FileNotFoundError, KeyError, ValueError) as e:
        logger.error(f"Cannot read results: {e}")
        return EXIT_USAGE
    print(summary.render())
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    if getattr(args, "verbose", False):
        logging.getLogger().setLevel(logging.DEBUG)
    if args.command == "run":
        return run_command(args)
    return report_command(args)


if __name__ == "__main__":
    sys.exit(main())
