"""Reproducible Monte Carlo experiment runner.

Each trial draws its random stream from a child seed mixed deterministically
out of (master seed, trial index) with a splitmix64 step, so results are
byte-identical regardless of worker count or scheduling order.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grouped import (RunParams, TrialResult, pull_bound_grouped, pull_bound_multistep,
                      pull_bound_worst_case, required_arm_count, run_multistep, run_two_step)
from .instances import BanditInstance, instance_from_dict

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

CSV_COLUMNS = ("trial", "instance_id", "chosen_group", "success", "total_pulls",
               "rounds", "event_a", "max_bucket_size")


def mix_seed(master_seed: int, trial_index: int) -> int:
    """splitmix64 finalizer applied to master_seed + (trial_index+1)*golden."""
    z = (master_seed + (trial_index + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment byte-for-byte."""

    instance: BanditInstance
    eps: float | None = None
    gap: float | None = None
    eps_schedule: tuple[float, ...] | None = None
    gap_schedule: tuple[float, ...] | None = None
    delta: float = 0.1
    trials: int = 100
    seed: int = 0
    c: float = 1.0
    d: float = 1.0
    noiseless: bool = False
    threads: int = 1
    out_csv: str | None = None
    out_summary: str | None = None

    def __post_init__(self) -> None:
        single = self.eps is not None and self.gap is not None
        multi = self.eps_schedule is not None and self.gap_schedule is not None
        if single == multi:
            raise ValueError("config needs either (eps, gap) or (eps_schedule, gap_schedule)")
        if self.trials < 0:
            raise ValueError(f"trials must be nonnegative, got {self.trials}")
        if self.threads < 1:
            raise ValueError(f"threads must be at least 1, got {self.threads}")
        # validate tolerances eagerly so bad configs fail before any work
        if single:
            RunParams(self.instance.alpha, self.eps, self.gap, self.delta)
        else:
            if len(self.eps_schedule) != len(self.gap_schedule) or not self.eps_schedule:
                raise ValueError("schedules must be equally long and nonempty")
            for e, g in zip(self.eps_schedule, self.gap_schedule):
                RunParams(self.instance.alpha, e, g, self.delta)

    @property
    def final_eps(self) -> float:
        return self.eps if self.eps is not None else self.eps_schedule[-1]

    @property
    def final_gap(self) -> float:
        return self.gap if self.gap is not None else self.gap_schedule[-1]


def config_from_dict(data: dict, base_dir: Path | None = None, path: str = "config") -> ExperimentConfig:
    """Build a config from a plain dict; validation errors carry field paths."""
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected an object")
    if "instance" in data:
        inst = instance_from_dict(data["instance"], path=f"{path}.instance")
    elif "instance_file" in data:
        ref = Path(data["instance_file"])
        if base_dir is not None and not ref.is_absolute():
            ref = base_dir / ref
        if not ref.exists():
            raise ValueError(f"{path}.instance_file: no such file: {ref}")
        inst = instance_from_dict(json.loads(ref.read_text()), path=f"{path}.instance_file")
    else:
        raise ValueError(f"{path}.instance: required (inline object or instance_file)")
    if "alpha" in data:
        inst = BanditInstance(inst.groups, inst.family, float(data["alpha"]), inst.name)
    sched = data.get("schedule")
    kwargs: dict = {}
    if sched is not None:
        if not isinstance(sched, dict) or "eps" not in sched or "delta_gap" not in sched:
            raise ValueError(f"{path}.schedule: expected an object with 'eps' and 'delta_gap' lists")
        kwargs["eps_schedule"] = tuple(float(e) for e in sched["eps"])
        kwargs["gap_schedule"] = tuple(float(g) for g in sched["delta_gap"])
    else:
        for key, name in (("eps", "eps"), ("delta_gap", "gap")):
            if key not in data:
                raise ValueError(f"{path}.{key}: required when no schedule is given")
            kwargs[name] = float(data[key])
    try:
        return ExperimentConfig(
            instance=inst,
            delta=float(data.get("delta", 0.1)),
            trials=int(data.get("trials", 100)),
            seed=int(data.get("seed", 0)),
            c=float(data.get("c", 1.0)),
            d=float(data.get("d", 1.0)),
            noiseless=bool(data.get("noiseless", False)),
            threads=int(data.get("threads", 1)),
            out_csv=data.get("out_csv"),
            out_summary=data.get("out_summary"),
            **kwargs,
        )
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def config_from_file(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    return config_from_dict(json.loads(p.read_text()), base_dir=p.parent)


def run_trial(config: ExperimentConfig, trial_index: int) -> TrialResult:
    """Run one trial on its own deterministic child stream."""
    rng = np.random.default_rng(mix_seed(config.seed, trial_index))
    if config.eps is not None:
        params = RunParams(config.instance.alpha, config.eps, config.gap, config.delta)
        return run_two_step(config.instance, params, rng, noiseless=config.noiseless)
    return run_multistep(config.instance, config.eps_schedule, config.gap_schedule,
                         config.delta, rng, noiseless=config.noiseless)


@dataclass
class AggregateReport:
    """Summary of an experiment; rates are None when there were no trials."""

    trials: int
    success_rate: float | None
    success_ci_3sigma: tuple[float, float] | None
    mean_pulls: float | None
    median_pulls: float | None
    max_pulls: int | None
    event_a_rate: float | None
    partition_bound_rate: float | None
    bound_grouped: float
    bound_worst_case: float
    wall_clock_s: float

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "success_rate": self.success_rate if self.success_rate is not None else "undefined",
            "success_ci_3sigma": list(self.success_ci_3sigma) if self.success_ci_3sigma else "undefined",
            "mean_pulls": self.mean_pulls if self.mean_pulls is not None else "undefined",
            "median_pulls": self.median_pulls if self.median_pulls is not None else "undefined",
            "max_pulls": self.max_pulls if self.max_pulls is not None else "undefined",
            "event_a_rate": self.event_a_rate if self.event_a_rate is not None else "undefined",
            "partition_bound_rate": self.partition_bound_rate if self.partition_bound_rate is not None else "undefined",
            "bound_grouped": self.bound_grouped,
            "bound_worst_case": self.bound_worst_case,
            "wall_clock_s": self.wall_clock_s,
        }


def _csv_lines(results: list[TrialResult]) -> list[str]:
    lines = [",".join(CSV_COLUMNS)]
    for i, r in enumerate(results):
        lines.append(f"{i},{r.instance_id},{r.chosen_group},{int(r.success)},"
                     f"{r.total_pulls},{r.rounds},{int(r.event_a)},{r.max_bucket_size}")
    return lines


def run_experiment(config: ExperimentConfig) -> AggregateReport:
    """Run all trials (optionally across processes), write CSV and summary.

    Results are collected in any order and sorted by trial index before
    writing, so the artifacts do not depend on scheduling.
    """
    start = time.perf_counter()
    indices = list(range(config.trials))
    if config.threads > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(run_trial, [config] * len(indices), indices,
                                    chunksize=max(1, len(indices) // (4 * config.threads))))
    else:
        results = [run_trial(config, i) for i in indices]

    num_groups = len(config.instance.groups)
    if config.eps is not None:
        params = RunParams(config.instance.alpha, config.eps, config.gap, config.delta)
        bound = pull_bound_grouped(config.instance, params, c=config.c)
    else:
        bound = pull_bound_multistep(config.instance, config.eps_schedule,
                                     config.gap_schedule, config.delta, c=config.c)
    worst = pull_bound_worst_case(
        RunParams(config.instance.alpha, config.final_eps, config.final_gap, config.delta),
        num_groups, d=config.d)

    if results:
        pulls = [r.total_pulls for r in results]
        rate = sum(r.success for r in results) / len(results)
        half = 3.0 * math.sqrt(max(rate * (1.0 - rate), 1e-12) / len(results))
        ci = (max(rate - half, 0.0), min(rate + half, 1.0))
        n_cap = required_arm_count(config.final_eps, config.delta, num_groups)
        part_rate = sum(r.max_bucket_size <= 3.0 * config.final_eps * n_cap for r in results) / len(results)
        report = AggregateReport(
            trials=len(results), success_rate=rate, success_ci_3sigma=ci,
            mean_pulls=float(np.mean(pulls)), median_pulls=float(np.median(pulls)),
            max_pulls=int(max(pulls)),
            event_a_rate=sum(r.event_a for r in results) / len(results),
            partition_bound_rate=part_rate,
            bound_grouped=bound, bound_worst_case=worst,
            wall_clock_s=time.perf_counter() - start,
        )
    else:
        report = AggregateReport(0, None, None, None, None, None, None, None,
                                 bound, worst, time.perf_counter() - start)

    if config.out_csv:
        Path(config.out_csv).parent.mkdir(parents=True, exist_ok=True)
        Path(config.out_csv).write_text("\n".join(_csv_lines(results)) + "\n")
    if config.out_summary:
        Path(config.out_summary).parent.mkdir(parents=True, exist_ok=True)
        Path(config.out_summary).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return report


def read_trial_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
