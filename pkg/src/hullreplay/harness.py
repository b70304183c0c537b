"""Experiment driver: sequential episodes, comparisons and result files."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ReplayBuffer, ReplayError, Stream, ValidationError
from .metrics import Direction, MetricsReport, PerformanceMatrix, build_report
from .model import METRIC_DIRECTIONS, SynthConfig, TrainerConfig, evaluate, fit
from .policies import BufferUpdateRecord, Policy, PolicyConfig, PolicyKind, bound_training_set

__all__ = [
    "EvalConfig",
    "RunResult",
    "EpisodeError",
    "run_episode",
    "Comparison",
    "summarize_runs",
    "write_outputs",
    "compare",
    "replay_training_sets",
]

log = logging.getLogger(__name__)

METRICS = tuple(METRIC_DIRECTIONS)


class EpisodeError(ReplayError):
    code = "episode_error"


@dataclass(frozen=True)
class EvalConfig:
    id_dims: tuple = (0, 1, 2, 3)
    synth: SynthConfig = field(default_factory=SynthConfig)
    metrics: tuple = METRICS

    def __post_init__(self):
        object.__setattr__(self, "id_dims", tuple(int(i) for i in self.id_dims))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ValidationError(f"unknown metrics: {sorted(unknown)}")
        if not self.metrics:
            raise ValidationError("at least one metric must be enabled")
        if not self.id_dims:
            raise ValidationError("id_dims must be non-empty")


@dataclass
class RunResult:
    policy_id: str
    seed: int
    matrices: dict
    report: MetricsReport
    buffer_trace: list
    training_sets: list
    timings: dict

    def to_json(self) -> dict:
        return {
            "policy": self.policy_id,
            "seed": self.seed,
            "metrics": self.report.to_json(),
        }


def eval_seed(seed: int, i: int, j: int) -> list:
    return [seed, 2, i, j]


def run_episode(
    stream: Stream,
    policy: PolicyConfig,
    trainer: TrainerConfig | None = None,
    eval_config: EvalConfig | None = None,
    seed: int = 0,
) -> RunResult:
    """Train and evaluate one policy over the whole stream.

    At each timestamp ``t``: build the training set (current batch plus the
    buffer, or the bound's set), fit, evaluate on batches ``1..t`` and update
    the buffer for ``t + 1``.
    """
    trainer = trainer or TrainerConfig()
    eval_config = eval_config or EvalConfig()
    runner = Policy(policy, seed)
    matrices = {
        name: PerformanceMatrix(
            name, Direction.POSITIVE if METRIC_DIRECTIONS[name] else Direction.NEGATIVE
        )
        for name in eval_config.metrics
    }
    buffer = ReplayBuffer(policy.capacity)
    trace: list[BufferUpdateRecord] = []
    training_sets = []
    timings = {"fit": 0.0, "evaluate": 0.0, "update": 0.0}

    for batch in stream:
        t = batch.timestamp
        try:
            tic = time.perf_counter()
            train = runner.training_set(stream.batches[: t - 1], batch, buffer)
            training_sets.append(sorted(s.key for s in train))
            model = fit(train, t, trainer)
            timings["fit"] += time.perf_counter() - tic

            tic = time.perf_counter()
            for j in range(1, t + 1):
                scores = evaluate(
                    model,
                    stream.batch(j),
                    eval_config.id_dims,
                    eval_config.synth,
                    np.random.default_rng(eval_seed(seed, t, j)),
                ).as_dict()
                for name, m in matrices.items():
                    m.set(t, j, scores[name])
            timings["evaluate"] += time.perf_counter() - tic

            tic = time.perf_counter()
            buffer, record = runner.update(batch, buffer)
            trace.append(record)
            timings["update"] += time.perf_counter() - tic
        except ReplayError as exc:
            raise EpisodeError(f"{policy.label} seed {seed}, timestamp {t}: {exc}") from exc

    report = build_report(matrices.values())
    return RunResult(policy.label, seed, matrices, report, trace, training_sets, timings)


def _episode_job(args):
    stream, policy, trainer, eval_config, seed = args
    return run_episode(stream, policy, trainer, eval_config, seed)


def _sd(values) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def _g6(x) -> str:
    return "" if x is None else format(float(x), ".6g")


@dataclass
class Comparison:
    summary: list
    curves: list
    runs: list

    def row(self, policy: str, metric: str) -> dict:
        for r in self.summary:
            if r["policy"] == policy and r["metric"] == metric:
                return r
        raise KeyError((policy, metric))


def summarize_runs(runs: Sequence[RunResult], labels: Sequence[str], metrics: Sequence[str]) -> Comparison:
    summary, curves = [], []
    for label in labels:
        mine = [r for r in runs if r.policy_id == label]
        if not mine:
            continue
        for metric in metrics:
            aips = [r.report.per_metric[metric].aip for r in mine]
            forg = [r.report.per_metric[metric].forgetting for r in mine]
            forg = [f for f in forg if f is not None]
            summary.append(
                {
                    "policy": label,
                    "metric": metric,
                    "runs": len(mine),
                    "aip_mean": float(np.mean(aips)),
                    "aip_sd": _sd(aips),
                    "forgetting_mean": float(np.mean(forg)) if forg else None,
                    "forgetting_sd": _sd(forg) if forg else None,
                    "forgetting_x10_mean": float(np.mean(forg)) * 10 if forg else None,
                }
            )
            finals = np.array([r.matrices[metric].row(r.matrices[metric].size) for r in mine])
            for j in range(finals.shape[1]):
                curves.append(
                    {
                        "policy": label,
                        "metric": metric,
                        "j": j + 1,
                        "mean": float(finals[:, j].mean()),
                        "sd": _sd(finals[:, j]),
                    }
                )
    return Comparison(summary, curves, list(runs))


SUMMARY_FIELDS = [
    "policy", "metric", "runs", "aip_mean", "aip_sd",
    "forgetting_mean", "forgetting_sd", "forgetting_x10_mean",
]
CURVE_FIELDS = ["policy", "metric", "j", "mean", "sd"]


def _write_csv(path: Path, rows, columns) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_g6(r[c]) if isinstance(r[c], float) or r[c] is None else r[c] for c in columns])
    path.write_text(buf.getvalue())


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def write_outputs(comparison: Comparison, out_dir, partial: bool = False) -> None:
    """Write summary/curve tables, per-run reports and buffer logs into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "summary.csv", comparison.summary, SUMMARY_FIELDS)
    _write_csv(out / "curves.csv", comparison.curves, CURVE_FIELDS)
    _dump_json(
        out / "summary.json",
        {"partial": partial, "summary": comparison.summary, "curves": comparison.curves},
    )
    _dump_json(out / "runs.json", [r.to_json() for r in comparison.runs])
    with (out / "buffer_log.jsonl").open("w") as fh:
        for r in comparison.runs:
            for rec in r.buffer_trace:
                line = {"policy": r.policy_id, "seed": r.seed, **rec.to_json()}
                fh.write(json.dumps(line, sort_keys=True) + "\n")


def compare(config, write: bool = True) -> Comparison:
    """Run every (policy, seed) episode of ``config`` and tabulate the results.

    If an episode fails, whatever finished is written out (flagged partial)
    before the error propagates.
    """
    labels = [p.label for p in config.policies]
    eval_config = config.eval_config
    jobs = []
    for seed in config.seeds:
        stream = config.stream.stream_for(seed)
        for policy in config.policies:
            jobs.append((stream, policy, config.trainer, eval_config, seed))

    runs: list[RunResult] = []
    try:
        if config.jobs > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=config.jobs) as ex:
                for r in ex.map(_episode_job, jobs):
                    runs.append(r)
        else:
            for job in jobs:
                log.info("episode %s seed %d", job[1].label, job[4])
                runs.append(_episode_job(job))
    except ReplayError:
        if write:
            write_outputs(summarize_runs(runs, labels, eval_config.metrics), config.output, partial=True)
        raise
    comparison = summarize_runs(runs, labels, eval_config.metrics)
    if write:
        write_outputs(comparison, config.output)
    return comparison


def replay_training_sets(stream: Stream, policy: PolicyConfig, trace: Sequence) -> list:
    """Rebuild each timestamp's training-set identities from a buffer log.

    ``trace`` holds :class:`BufferUpdateRecord` objects or their JSON form.
    """
    sets = []
    buffer_keys: list = []
    for batch in stream:
        t = batch.timestamp
        if policy.kind in (PolicyKind.LOWER, PolicyKind.UPPER):
            train = [s.key for s in bound_training_set(policy.kind, stream.batches[: t - 1], batch)]
        else:
            train = [s.key for s in batch.train] + buffer_keys
        sets.append(sorted(train))
        rec = trace[t - 1]
        chosen = rec.chosen if isinstance(rec, BufferUpdateRecord) else rec["chosen"]
        buffer_keys = [tuple(k) for k in chosen]
    return sets
