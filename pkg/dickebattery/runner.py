#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Application runtime logic for DickeBattery subcommands."""

from __future__ import annotations

import sys
import signal
import logging as logthings
from typing import TYPE_CHECKING
from pathlib import Path
from dataclasses import replace


if TYPE_CHECKING:
    import argparse

from dickebattery import protocol as protocols
from dickebattery import harness
from dickebattery.config import ExperimentConfig
from dickebattery.errors import RunInterrupted, DickeBatteryError
from dickebattery.logger import LOG
from dickebattery.hilbert import ModelParams
from dickebattery.metrics import init_metrics, export_textfile
from dickebattery.settings import NAMESPACE, get_config_file


# Set by SIGINT/SIGTERM; training finishes its episode, checkpoints and stops
shutdown_requested = False


def should_stop() -> bool:
    return shutdown_requested


def setup_signal_handlers() -> None:
    """First signal requests a graceful stop, a second one aborts."""

    def signal_handler(signum, frame):
        global shutdown_requested
        if shutdown_requested:
            LOG.warning("Received signal %d again, aborting", signum)
            raise KeyboardInterrupt
        shutdown_requested = True
        LOG.info("Received signal %d, stopping after the current episode", signum)

    signal.signal(signal.SIGTERM, signal_handler)
    signal.signal(signal.SIGINT, signal_handler)


def validate_config_file(config_path: str | None) -> bool:
    """Validate configuration file."""
    try:
        _ = ExperimentConfig.from_file(config_path)
        LOG.info("Configuration is valid")
        return True
    except Exception as error:
        LOG.error("Configuration validation failed: %s", str(error))
        return False


def setup_cli_logging(log_level: str) -> None:
    """Setup logging level from CLI arguments."""
    level = getattr(logthings, log_level.upper())
    LOG.setLevel(level)
    for handler in LOG.handlers:
        handler.setLevel(level)


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Configuration file (if any) with command-line overrides applied.

    Without ``--config`` the default file is used when it exists, built-in
    defaults plus environment overrides otherwise.
    """
    config_path = getattr(args, "config", None)
    if config_path is None and Path(get_config_file(NAMESPACE)).exists():
        config_path = get_config_file(NAMESPACE)
    config = (
        ExperimentConfig.from_file(config_path)
        if config_path
        else ExperimentConfig.from_dict({})
    )

    model_overrides = {}
    if getattr(args, "n", None):
        model_overrides["n_tls"] = tuple(args.n)
    if getattr(args, "rwa", False):
        model_overrides["rwa"] = True
    grid_overrides = {}
    if getattr(args, "g_tau", None):
        grid_overrides["g_tau"] = tuple(args.g_tau)
    if getattr(args, "g_dt", None) is not None:
        grid_overrides["g_dt"] = args.g_dt
    sac = config.sac
    if getattr(args, "total_steps", None) is not None:
        sac = sac.with_overrides(total_steps=args.total_steps)

    return config.with_overrides(
        model=replace(config.model, **model_overrides),
        grid=replace(config.grid, **grid_overrides),
        sac=sac,
        n_repetitions=getattr(args, "repetitions", None),
        seed=getattr(args, "seed", None),
        workers=getattr(args, "workers", None),
        output_dir=getattr(args, "output_dir", None),
    )


def start_metrics(config: ExperimentConfig) -> None:
    init_metrics()
    if not config.metrics.prometheus.enabled:
        return
    from prometheus_client import start_http_server

    from dickebattery.metrics import REGISTRY as DICKEBATTERY_REGISTRY

    try:
        start_http_server(
            port=config.metrics.prometheus.port,
            addr=config.metrics.prometheus.host,
            registry=DICKEBATTERY_REGISTRY,
        )
        LOG.info(
            "Prometheus metrics server started on %s:%d using DickeBattery registry",
            config.metrics.prometheus.host,
            config.metrics.prometheus.port,
        )
    except Exception as error:
        LOG.error("Failed to start metrics server: %s", error)


def finish_metrics(config: ExperimentConfig) -> None:
    if config.metrics.prometheus.textfile:
        export_textfile(Path(config.output_dir) / "metrics.prom")


def run_onoff(args: argparse.Namespace) -> int:
    config = load_config(args)
    start_metrics(config)
    results = harness.run_onoff_sweep(config)
    LOG.info("Wrote %d on-off curves to %s", len(results), config.output_dir)
    finish_metrics(config)
    return 0


def run_train(args: argparse.Namespace) -> int:
    setup_signal_handlers()
    config = load_config(args)
    start_metrics(config)
    results = []
    try:
        for n_tls in config.model.n_tls:
            for g_tau in config.grid.g_tau:
                try:
                    results.append(
                        harness.run_rl_experiment(
                            config,
                            n_tls,
                            g_tau,
                            resume=args.resume,
                            should_stop=should_stop,
                        )
                    )
                except RunInterrupted as error:
                    LOG.warning("%s", error)
                    return 130
                if should_stop():
                    LOG.warning("Stopped after N=%d g_tau=%.4f", n_tls, g_tau)
                    return 130
    finally:
        finish_metrics(config)
    if len(config.grid.g_tau) > 1:
        report = harness.monotonicity_report(results)
        LOG.info("Best ergotropy monotone in g_tau per N: %s", report)
    return 0


def run_eval(args: argparse.Namespace) -> int:
    """Evaluate a protocol file; records go to stdout or ``--output``."""
    config = load_config(args)
    protocol = protocols.load(args.protocol)
    params = ModelParams(
        n_tls=args.n_tls,
        omega0=protocol.omega0,
        lambda_max=protocol.lambda_max,
        coupling_scale=config.model.coupling_scale,
    )
    evaluation = harness.evaluate_protocol(
        protocol,
        params,
        args.fock_multiplier or config.model.eval_fock_multiplier,
        reference_multiplier=config.model.train_fock_multiplier,
        rwa=config.model.rwa,
    )
    LOG.info(
        "Final ergotropy %.6g, cutoff convergence %.3e",
        evaluation.final.ergotropy1,
        evaluation.convergence,
    )
    if args.output:
        harness.write_records_csv(args.output, evaluation.records, params.omega0)
    else:
        sys.stdout.write(harness.records_to_csv(evaluation.records, params.omega0))
    return 0


def run_compare(args: argparse.Namespace) -> int:
    config = load_config(args)
    rows = harness.compare_from_dir(config.output_dir, rwa=config.model.rwa)
    sys.stdout.write(harness.comparison_to_csv(rows))
    return 0


def run_selftest(args: argparse.Namespace) -> int:
    from dickebattery.selftest import run_selftest as run_checks

    results = run_checks(full=args.full, seed=args.seed or 0)
    failed = [result.name for result in results if not result.passed]
    if failed:
        LOG.error("Self-test failed: %s", ", ".join(failed))
        return 1
    LOG.info("All %d self-test checks passed", len(results))
    return 0


def run_validate(args: argparse.Namespace) -> int:
    return 0 if validate_config_file(args.config) else 1


COMMANDS = {
    "onoff": run_onoff,
    "train": run_train,
    "eval": run_eval,
    "compare": run_compare,
    "selftest": run_selftest,
    "validate": run_validate,
}


def run_command(args: argparse.Namespace) -> int:
    """Run one subcommand, turning failures into a nonzero exit code."""
    try:
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        LOG.info("Interrupted")
        return 130
    except (DickeBatteryError, OSError) as error:
        LOG.error("%s failed: %s", args.command, error)
        return 1
    except Exception as error:
        LOG.exception("Fatal error: %s", str(error))
        return 1
