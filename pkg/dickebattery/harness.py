#  SPDX-License-Identifier: MPL-2.0
#  Copyright 2025-present John Mille <john@ews-network.net>

"""Experiment orchestration: on-off sweeps, RL repetitions, reports.

Output files, all written atomically into the experiment output directory::

    onoff_N4_gtau1.5000.csv          on-off curve at the evaluation cutoff
    rl_N4_gtau1.5000.csv             best RL protocol at the evaluation cutoff
    rl_N4_gtau1.5000_best.json       best RL protocol
    rl_N4_gtau1.5000_rep0.json       protocol of each repetition
    rl_N4_gtau1.5000_rep0_log.csv    training log of each repetition
    rl_N4_gtau1.5000_summary.json    per-repetition figures and the winner
    compare.csv                      on-off against RL, per (N, g~ tau)

Runs with the rotating-wave interaction carry an ``_rwa`` suffix.
"""

from __future__ import annotations

import io
import re
import csv
import json
import math
from typing import Any
from pathlib import Path
from dataclasses import field, fields, dataclass
from collections.abc import Callable, Sequence, Mapping
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from dickebattery import protocol as protocols
from dickebattery.config import ExperimentConfig
from dickebattery.errors import GridMismatch, RunInterrupted, RecordInvariantError
from dickebattery.logger import LOG, run_context
from dickebattery.rl_env import EnvConfig, ChargingEnv
from dickebattery.hilbert import DickeModel, ModelParams
from dickebattery.storage import atomic_write_text
from dickebattery.dynamics import Propagator, rollout
from dickebattery.protocol import Protocol
from dickebattery.sac.training import TrainingLog, train
from dickebattery.observables import CSV_HEADER, StepRecord, record


_STEM = re.compile(r"^(?P<kind>onoff|rl)_N(?P<n>\d+)_gtau(?P<g>[0-9.]+)(?P<rwa>_rwa)?$")


def run_stem(kind: str, n_tls: int, g_tau: float, rwa: bool = False) -> str:
    return f"{kind}_N{n_tls}_gtau{g_tau:.4f}{'_rwa' if rwa else ''}"


def records_to_csv(records: Sequence[StepRecord], omega0: float = 1.0) -> str:
    """CSV text of ``records``; refuses rows that break the record invariants."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in records:
        problems = row.violations(omega0)
        if problems:
            raise RecordInvariantError(f"Record at t={row.t!r}: {'; '.join(problems)}")
        writer.writerow(row.as_row())
    return buffer.getvalue()


def write_records_csv(
    path: str | Path, records: Sequence[StepRecord], omega0: float = 1.0
) -> Path:
    return atomic_write_text(path, records_to_csv(records, omega0))


def read_records_csv(path: str | Path) -> list[StepRecord]:
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise ValueError(f"{path} does not start with the record header")
        return [StepRecord(*(float(value) for value in row)) for row in reader if row]


@dataclass(frozen=True)
class Evaluation:
    """Records at the evaluation cutoff plus the cutoff convergence diagnostic."""

    records: list[StepRecord]
    convergence: float
    fock_multiplier: int
    reference_ergotropy: float

    @property
    def final(self) -> StepRecord:
        return self.records[-1]


def protocol_records(
    protocol: Protocol, params: ModelParams, *, rwa: bool = False
) -> list[StepRecord]:
    """Figures of merit at every grid time.

    The ``lambda`` of a record is the coupling applied from that time on, 0 at
    the final time when the battery is disconnected.
    """
    model = DickeModel.build(params, rwa=rwa)
    propagator = Propagator.for_model(model, protocol.dt)
    trajectory = rollout(propagator, model.initial_state(), protocol)
    controls = [*protocol.values, 0.0]
    return [
        record(model, state, lam, t)
        for state, lam, t in zip(trajectory.states, controls, trajectory.times)
    ]


def evaluate_protocol(
    protocol: Protocol,
    params: ModelParams,
    fock_multiplier: int = 6,
    *,
    reference_multiplier: int = 2,
    rwa: bool = False,
) -> Evaluation:
    """Records with ``fock_multiplier * N`` photons.

    ``convergence`` is the final ergotropy gap to the ``reference_multiplier``
    cutoff.
    """
    enlarged = protocol_records(
        protocol, params.with_fock_multiplier(fock_multiplier), rwa=rwa
    )
    reference = protocol_records(
        protocol, params.with_fock_multiplier(reference_multiplier), rwa=rwa
    )
    return Evaluation(
        records=enlarged,
        convergence=abs(enlarged[-1].ergotropy1 - reference[-1].ergotropy1),
        fock_multiplier=fock_multiplier,
        reference_ergotropy=reference[-1].ergotropy1,
    )


@dataclass(frozen=True)
class CurveResult:
    n_tls: int
    g_tau: float
    protocol: Protocol
    evaluation: Evaluation
    path: Path | None = None


def run_onoff_sweep(
    config: ExperimentConfig, *, write: bool = True
) -> dict[tuple[int, float], CurveResult]:
    """On-off curve for every (N, g~ tau) of the configuration."""
    model_config = config.model
    results: dict[tuple[int, float], CurveResult] = {}
    for n_tls in model_config.n_tls:
        params = model_config.params(n_tls)
        for g_tau in config.grid.g_tau:
            with run_context(experiment="onoff", n_tls=n_tls, g_tau=g_tau):
                tau, dt = config.grid.time_grid(g_tau, params)
                baseline = protocols.on_off(
                    tau, dt, params.lambda_max, omega0=params.omega0
                )
                evaluation = evaluate_protocol(
                    baseline,
                    params,
                    model_config.eval_fock_multiplier,
                    reference_multiplier=model_config.train_fock_multiplier,
                    rwa=model_config.rwa,
                )
                path = None
                if write:
                    stem = run_stem("onoff", n_tls, g_tau, model_config.rwa)
                    path = write_records_csv(
                        Path(config.output_dir) / f"{stem}.csv",
                        evaluation.records,
                        params.omega0,
                    )
                LOG.info(
                    "On-off N=%d g_tau=%.4f: ergotropy %.6g, energy %.6g",
                    n_tls,
                    g_tau,
                    evaluation.final.ergotropy1,
                    evaluation.final.energy_per_unit,
                )
                results[(n_tls, g_tau)] = CurveResult(
                    n_tls, g_tau, baseline, evaluation, path
                )
    return results


@dataclass(frozen=True)
class RepetitionTask:
    """Everything a worker process needs for one training."""

    index: int
    seed: int
    n_tls: int
    g_tau: float
    config: ExperimentConfig
    checkpoint_path: str | None = None
    resume: bool = False


@dataclass(frozen=True)
class RepetitionResult:
    index: int
    seed: int
    protocol: Protocol
    train_ergotropy: float
    eval_ergotropy: float
    convergence: float
    log: TrainingLog


@dataclass(frozen=True)
class RunResult:
    n_tls: int
    g_tau: float
    best_index: int
    repetitions: list[RepetitionResult]
    records: list[StepRecord]
    rwa: bool = False
    paths: dict[str, Path] = field(default_factory=dict)

    @property
    def best(self) -> RepetitionResult:
        return self.repetitions[self.best_index]

    @property
    def best_protocol(self) -> Protocol:
        return self.best.protocol

    @property
    def eval_ergotropies(self) -> list[float]:
        return [rep.eval_ergotropy for rep in self.repetitions]

    @property
    def mean_ergotropy(self) -> float:
        return float(np.mean(self.eval_ergotropies))

    @property
    def std_ergotropy(self) -> float:
        return float(np.std(self.eval_ergotropies))

    def summary(self) -> dict[str, Any]:
        return {
            "n_tls": self.n_tls,
            "g_tau": self.g_tau,
            "rwa": self.rwa,
            "best_index": self.best_index,
            "best_seed": self.best.seed,
            "mean_ergotropy": self.mean_ergotropy,
            "std_ergotropy": self.std_ergotropy,
            "repetitions": [
                {
                    "index": rep.index,
                    "seed": rep.seed,
                    "train_ergotropy": rep.train_ergotropy,
                    "eval_ergotropy": rep.eval_ergotropy,
                    "convergence": rep.convergence,
                    "episodes": len(rep.log.episodes),
                    "updates": rep.log.total_updates,
                }
                for rep in self.repetitions
            ],
        }


def select_best(eval_ergotropies: Sequence[float]) -> int:
    """Index of the largest final ergotropy; the earliest wins ties."""
    if not eval_ergotropies:
        raise ValueError("No repetitions to select from")
    return int(np.argmax(np.asarray(eval_ergotropies, dtype=float)))


def train_environment(
    config: ExperimentConfig, n_tls: int, g_tau: float
) -> ChargingEnv:
    params = config.model.params(n_tls, config.model.train_fock_multiplier)
    tau, dt = config.grid.time_grid(g_tau, params)
    env_config = EnvConfig.for_charging_time(
        params,
        tau,
        dt,
        c_mean=config.sac.c_mean,
        c_width=config.sac.c_width,
        rwa=config.model.rwa,
    )
    return ChargingEnv(env_config)


def run_repetition(
    task: RepetitionTask, should_stop: Callable[[], bool] | None = None
) -> RepetitionResult:
    """Train one agent and score its deterministic protocol at both cutoffs."""
    config = task.config
    with run_context(
        experiment="rl",
        n_tls=task.n_tls,
        g_tau=task.g_tau,
        repetition=task.index,
        seed=task.seed,
    ):
        env = train_environment(config, task.n_tls, task.g_tau)
        resume_from = None
        if task.resume and task.checkpoint_path and Path(task.checkpoint_path).exists():
            resume_from = task.checkpoint_path
            LOG.info("Resuming from %s", resume_from)
        agent, log = train(
            env,
            config.sac,
            task.seed,
            repetition=task.index,
            checkpoint_path=task.checkpoint_path,
            resume_from=resume_from,
            should_stop=should_stop,
        )
        learned = protocols.from_policy(agent, env)
        evaluation = evaluate_protocol(
            learned,
            config.model.params(task.n_tls),
            config.model.eval_fock_multiplier,
            reference_multiplier=config.model.train_fock_multiplier,
            rwa=config.model.rwa,
        )
        if evaluation.convergence > 1e-3 * config.model.omega0:
            LOG.warning(
                "Photon cutoff not converged: ergotropy moves by %.3e",
                evaluation.convergence,
            )
        LOG.info(
            "Repetition %d: final ergotropy %.6g at the evaluation cutoff",
            task.index,
            evaluation.final.ergotropy1,
        )
        return RepetitionResult(
            index=task.index,
            seed=task.seed,
            protocol=learned,
            train_ergotropy=evaluation.reference_ergotropy,
            eval_ergotropy=evaluation.final.ergotropy1,
            convergence=evaluation.convergence,
            log=log,
        )


def _run_tasks(
    tasks: list[RepetitionTask],
    workers: int,
    should_stop: Callable[[], bool] | None,
) -> list[RepetitionResult]:
    if workers <= 1 or len(tasks) == 1:
        results: list[RepetitionResult] = []
        for task in tasks:
            if should_stop is not None and should_stop():
                LOG.warning(
                    "Stop requested, %d repetitions not started",
                    len(tasks) - len(results),
                )
                break
            results.append(run_repetition(task, should_stop))
        return results
    if should_stop is not None and should_stop():
        LOG.warning("Stop requested, %d repetitions not started", len(tasks))
        return []
    LOG.info("Running %d repetitions on %d workers", len(tasks), workers)
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as executor:
        return list(executor.map(run_repetition, tasks))


def run_rl_experiment(
    config: ExperimentConfig,
    n_tls: int,
    g_tau: float,
    *,
    write: bool = True,
    resume: bool = False,
    should_stop: Callable[[], bool] | None = None,
) -> RunResult:
    """Train ``n_repetitions`` agents with seeds seed..seed+reps-1, keep the best.

    ``should_stop`` is only honoured when repetitions run in this process. A
    stopped run persists nothing but its checkpoints and raises
    :class:`RunInterrupted`.
    """
    output_dir = Path(config.output_dir)
    rwa = config.model.rwa
    stem = run_stem("rl", n_tls, g_tau, rwa)
    tasks = [
        RepetitionTask(
            index=index,
            seed=config.seed + index,
            n_tls=n_tls,
            g_tau=g_tau,
            config=config,
            checkpoint_path=(
                str(output_dir / "checkpoints" / f"{stem}_rep{index}.npz")
                if write
                else None
            ),
            resume=resume,
        )
        for index in range(config.n_repetitions)
    ]
    repetitions = _run_tasks(tasks, config.workers, should_stop)
    if len(repetitions) < len(tasks) or any(
        rep.log.stopped_early for rep in repetitions
    ):
        raise RunInterrupted(stem, len(repetitions), len(tasks))
    best_index = select_best([rep.eval_ergotropy for rep in repetitions])
    params = config.model.params(n_tls)
    best_records = evaluate_protocol(
        repetitions[best_index].protocol,
        params,
        config.model.eval_fock_multiplier,
        reference_multiplier=config.model.train_fock_multiplier,
        rwa=rwa,
    ).records
    result = RunResult(
        n_tls=n_tls,
        g_tau=g_tau,
        best_index=best_index,
        repetitions=repetitions,
        records=best_records,
        rwa=rwa,
    )
    LOG.info(
        "N=%d g_tau=%.4f: best repetition %d, ergotropy %.6g (mean %.6g, std %.3g)",
        n_tls,
        g_tau,
        best_index,
        result.best.eval_ergotropy,
        result.mean_ergotropy,
        result.std_ergotropy,
    )
    if write:
        result.paths.update(persist_run(result, output_dir, params.omega0))
    return result


def persist_run(result: RunResult, output_dir: Path, omega0: float) -> dict[str, Path]:
    stem = run_stem("rl", result.n_tls, result.g_tau, result.rwa)
    paths = {
        "records": write_records_csv(
            output_dir / f"{stem}.csv", result.records, omega0
        ),
        "best": protocols.save(result.best_protocol, output_dir / f"{stem}_best.json"),
        "summary": atomic_write_text(
            output_dir / f"{stem}_summary.json",
            json.dumps(result.summary(), indent=2) + "\n",
        ),
    }
    for rep in result.repetitions:
        paths[f"rep{rep.index}"] = protocols.save(
            rep.protocol, output_dir / f"{stem}_rep{rep.index}.json"
        )
        paths[f"rep{rep.index}_log"] = rep.log.save(
            output_dir / f"{stem}_rep{rep.index}_log.csv"
        )
    return paths


def select_best_from_dir(
    output_dir: str | Path,
    n_tls: int,
    g_tau: float,
    *,
    params: ModelParams,
    fock_multiplier: int = 6,
    rwa: bool = False,
) -> int:
    """Re-score every persisted repetition protocol and return the winner."""
    stem = run_stem("rl", n_tls, g_tau, rwa)
    pattern = re.compile(rf"^{re.escape(stem)}_rep(\d+)\.json$")
    scored: dict[int, float] = {}
    for path in Path(output_dir).iterdir():
        match = pattern.match(path.name)
        if not match:
            continue
        evaluation = evaluate_protocol(
            protocols.load(path), params, fock_multiplier, rwa=rwa
        )
        scored[int(match.group(1))] = evaluation.final.ergotropy1
    if not scored:
        raise FileNotFoundError(f"No persisted repetitions for {stem} in {output_dir}")
    indices = sorted(scored)
    return indices[select_best([scored[index] for index in indices])]


def monotonicity_report(results: Sequence[RunResult]) -> dict[int, bool]:
    """Per N, whether best final ergotropy never decreases with g~ tau."""
    by_size: dict[int, list[RunResult]] = {}
    for result in results:
        by_size.setdefault(result.n_tls, []).append(result)
    report = {}
    for n_tls, runs in sorted(by_size.items()):
        ordered = sorted(runs, key=lambda run: run.g_tau)
        values = [run.best.eval_ergotropy for run in ordered]
        report[n_tls] = all(b >= a for a, b in zip(values, values[1:]))
        if not report[n_tls]:
            LOG.warning(
                "Best ergotropy for N=%d is not monotone in g_tau: %s", n_tls, values
            )
    return report


@dataclass(frozen=True)
class ComparisonRow:
    n_tls: int
    g_tau: float
    ergotropy_onoff: float
    ergotropy_rl: float
    delta_ergotropy: float
    ergotropy_gain: float
    variance_ratio: float
    entropy_onoff: float
    entropy_rl: float
    etot_ratio_onoff: float
    etot_ratio_rl: float

    def as_row(self) -> list[str]:
        return [
            str(getattr(self, item.name))
            if isinstance(getattr(self, item.name), int)
            else f"{getattr(self, item.name):.12g}"
            for item in fields(self)
        ]


def _ratio(numerator: float, denominator: float) -> float:
    if denominator == 0.0:
        return 1.0 if numerator == 0.0 else math.inf
    return numerator / denominator


def compare_report(
    onoff: Mapping[tuple[int, float], StepRecord],
    rl: Mapping[tuple[int, float], StepRecord],
) -> list[ComparisonRow]:
    """Final-time comparison per (N, g~ tau); both sides must cover the same grid.

    ``ergotropy_gain`` and ``variance_ratio`` are RL over on-off, 1 when both
    vanish.
    """
    if set(onoff) != set(rl):
        missing = sorted(set(onoff) ^ set(rl))
        raise GridMismatch(f"On-off and RL grids differ at {missing}")
    rows = []
    for key in sorted(onoff):
        base, learned = onoff[key], rl[key]
        rows.append(
            ComparisonRow(
                n_tls=key[0],
                g_tau=key[1],
                ergotropy_onoff=base.ergotropy1,
                ergotropy_rl=learned.ergotropy1,
                delta_ergotropy=learned.ergotropy1 - base.ergotropy1,
                ergotropy_gain=_ratio(learned.ergotropy1, base.ergotropy1),
                variance_ratio=_ratio(learned.variance1, base.variance1),
                entropy_onoff=base.entropy1,
                entropy_rl=learned.entropy1,
                etot_ratio_onoff=base.etot_ratio,
                etot_ratio_rl=learned.etot_ratio,
            )
        )
    return rows


def comparison_to_csv(rows: Sequence[ComparisonRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([item.name for item in fields(ComparisonRow)])
    writer.writerows(row.as_row() for row in rows)
    return buffer.getvalue()


def final_records_from_dir(
    output_dir: str | Path, kind: str, rwa: bool = False
) -> dict[tuple[int, float], StepRecord]:
    """Final record of every ``kind`` curve CSV in ``output_dir``."""
    finals = {}
    for path in sorted(Path(output_dir).glob(f"{kind}_N*.csv")):
        match = _STEM.match(path.stem)
        if not match or bool(match.group("rwa")) != rwa:
            continue
        records = read_records_csv(path)
        if records:
            finals[(int(match.group("n")), float(match.group("g")))] = records[-1]
    return finals


def compare_from_dir(output_dir: str | Path, rwa: bool = False) -> list[ComparisonRow]:
    rows = compare_report(
        final_records_from_dir(output_dir, "onoff", rwa),
        final_records_from_dir(output_dir, "rl", rwa),
    )
    name = "compare_rwa.csv" if rwa else "compare.csv"
    atomic_write_text(Path(output_dir) / name, comparison_to_csv(rows))
    return rows
