#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Command-line interface for DickeBattery."""

from __future__ import annotations

import argparse

from dickebattery import __version__


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    _ = parser.add_argument(
        "--config",
        default=None,
        help="Path to configuration file (default: dickebattery.yaml if present)",
    )
    _ = parser.add_argument(
        "--output-dir",
        default=None,
        help="Directory for CSV, protocol and checkpoint files",
    )
    _ = parser.add_argument(
        "--rwa",
        action="store_true",
        help="Use the rotating-wave interaction instead of the full one",
    )


def _add_sweep_arguments(parser: argparse.ArgumentParser) -> None:
    _ = parser.add_argument(
        "--n", type=int, nargs="+", help="Number(s) of two-level systems"
    )
    _ = parser.add_argument(
        "--g-tau", type=float, nargs="+", help="Charging time(s) as g~ tau"
    )
    _ = parser.add_argument(
        "--g-dt",
        type=float,
        help="Fixed time step as g~ dt (default: 0.03 below g~ tau 0.6, else 0.06)",
    )


def create_parser() -> argparse.ArgumentParser:
    """Create the command-line argument parser."""
    parser = argparse.ArgumentParser(
        prog="dickebattery",
        description=(
            "Dicke quantum battery charging - on-off baselines and "
            "soft actor-critic optimized protocols"
        ),
    )

    _ = parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )

    _ = parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Set logging level (default: WARNING)",
    )

    _ = parser.add_argument(
        "--dev",
        action="store_true",
        help="Development mode (sets log-level=DEBUG)",
    )

    commands = parser.add_subparsers(dest="command", required=True)

    onoff = commands.add_parser("onoff", help="Sweep the on-off baseline")
    _add_common_arguments(onoff)
    _add_sweep_arguments(onoff)

    train = commands.add_parser("train", help="Train SAC agents, keep the best")
    _add_common_arguments(train)
    _add_sweep_arguments(train)
    _ = train.add_argument("--total-steps", type=int, help="Environment steps per run")
    _ = train.add_argument("--repetitions", type=int, help="Independent trainings")
    _ = train.add_argument("--seed", type=int, help="Seed of the first repetition")
    _ = train.add_argument("--workers", type=int, help="Worker processes")
    _ = train.add_argument(
        "--resume",
        action="store_true",
        help="Continue from checkpoints found in the output directory",
    )

    evaluate = commands.add_parser(
        "eval", help="Evaluate a protocol file, CSV on stdout"
    )
    _add_common_arguments(evaluate)
    _ = evaluate.add_argument("--protocol", required=True, help="Protocol JSON file")
    _ = evaluate.add_argument(
        "--n", dest="n_tls", type=int, required=True, help="Number of two-level systems"
    )
    _ = evaluate.add_argument(
        "--fock-multiplier",
        type=int,
        help="Photon cutoff in units of N (default: eval_fock_multiplier)",
    )
    _ = evaluate.add_argument("--output", help="Write the CSV here instead of stdout")

    compare = commands.add_parser(
        "compare", help="Compare on-off and RL results of an output directory"
    )
    _add_common_arguments(compare)

    selftest = commands.add_parser("selftest", help="Run the numerical oracles")
    _ = selftest.add_argument(
        "--full",
        action="store_true",
        help="Also train on a one-step task and check convergence",
    )
    _ = selftest.add_argument("--seed", type=int, default=0)

    validate = commands.add_parser("validate", help="Validate a configuration file")
    _ = validate.add_argument("--config", default=None, help="Configuration file")

    return parser


def main(argv: list[str] | None = None) -> int:
    """Main CLI entry point - parse arguments and delegate."""
    parser = create_parser()
    args = parser.parse_args(argv)

    # Handle --dev flag: default log level to DEBUG
    if args.dev:
        args.log_level = args.log_level or "DEBUG"

    from dickebattery.runner import run_command, setup_cli_logging

    if args.log_level:
        setup_cli_logging(args.log_level)

    return run_command(args)


if __name__ == "__main__":
    import sys

    sys.exit(main())
