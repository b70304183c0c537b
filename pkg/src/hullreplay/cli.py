"""Command line entry point: ``hullreplay {gen,run,compare,oracle}``.

On failure a single JSON error record is printed to stderr and the process
exits with a nonzero status.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .core import ReplayError, StreamConfig
from .datagen import StreamSpec, generate_stream, load_stream, save_stream
from .harness import EvalConfig, compare, summarize_runs, write_outputs, run_episode
from .model import SynthConfig, TrainerConfig
from .policies import PolicyConfig, PolicyKind

log = logging.getLogger("hullreplay")


def _cmd_gen(args) -> int:
    spec = StreamSpec(
        StreamConfig(args.timestamps, args.train, args.test, args.dim, args.seed),
        id_dims=args.id_dims,
        style_drift=args.drift,
        within_noise=args.noise,
    )
    save_stream(generate_stream(spec), args.out)
    print(json.dumps({"written": str(args.out), "T": args.timestamps, "d": args.dim}))
    return 0


def _cmd_run(args) -> int:
    stream = load_stream(args.stream, args.format)
    policy = PolicyConfig(
        PolicyKind(args.policy),
        capacity=args.buffer_size,
        ransac_samples=args.ransac_n,
        seed=args.policy_seed,
    )
    id_dims = tuple(int(x) for x in args.id_dims.split(",")) if args.id_dims else tuple(
        range(min(4, stream.dim))
    )
    eval_config = EvalConfig(id_dims, SynthConfig(args.synth_count, args.concentration))
    result = run_episode(stream, policy, TrainerConfig(replay_weight=args.replay_weight), eval_config, args.seed)
    comparison = summarize_runs([result], [policy.label], eval_config.metrics)
    write_outputs(comparison, args.out)
    for row in comparison.summary:
        f = row["forgetting_mean"]
        print(
            f"{row['policy']:<12} {row['metric']:<14} AIP {row['aip_mean']:.6g}  "
            f"Forg {'-' if f is None else format(f, '.6g')}"
        )
    return 0


def _cmd_compare(args) -> int:
    from .config import load_config

    config = load_config(args.config)
    if args.out:
        from dataclasses import replace

        config = replace(config, output=str(args.out))
    comparison = compare(config)
    for row in comparison.summary:
        f = row["forgetting_mean"]
        print(
            f"{row['policy']:<12} {row['metric']:<14} n={row['runs']:<3} "
            f"AIP {row['aip_mean']:.6g} ± {row['aip_sd']:.3g}  "
            f"Forg {'-' if f is None else format(f, '.6g')}"
        )
    return 0


def _cmd_oracle(args) -> int:
    from .hull import project_onto_hull
    from .oracle import exhaustive_er_hull, er_hull_cases, grid_hull_distance, hull_cases
    from .policies import er_hull_update

    ok = True
    tic = time.perf_counter()
    worst = 0.0
    for case in hull_cases(args.hull_cases, args.seed):
        fw = project_onto_hull(case.query, case.anchors).distance
        worst = max(worst, abs(fw - grid_hull_distance(case.query, case.anchors, args.step)))
    passed = worst <= 1e-3
    ok &= passed
    print(
        f"[{'PASS' if passed else 'FAIL'}] hull grid oracle: {args.hull_cases} cases, "
        f"max |FW - grid| = {worst:.3g} ({time.perf_counter() - tic:.1f}s)"
    )

    tic = time.perf_counter()
    mismatches = 0
    cases = er_hull_cases(args.hull_er_cases, args.seed)
    for batch, buffer in cases:
        chosen, _ = er_hull_update(batch, buffer, 2, 10**6, np.random.default_rng(0))
        scored = exhaustive_er_hull(batch, buffer, 2, args.step)
        best = scored[0][0]
        mine = next(v for v, c in scored if {s.key for s in c} == chosen.identities)
        if mine > best + 1e-3:
            mismatches += 1
    passed = mismatches == 0
    ok &= passed
    print(
        f"[{'PASS' if passed else 'FAIL'}] ER-Hull exhaustive argmin: {len(cases)} cases, "
        f"{mismatches} mismatches ({time.perf_counter() - tic:.1f}s)"
    )
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hullreplay", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic drifting stream")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--timestamps", type=int, default=10)
    p.add_argument("--train", type=int, default=20)
    p.add_argument("--test", type=int, default=10)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--id-dims", type=int, default=4)
    p.add_argument("--drift", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("run", help="run one episode on a stream file")
    p.add_argument("--stream", type=Path, required=True)
    p.add_argument("--format", choices=["jsonl", "csv"], default=None)
    p.add_argument("--policy", choices=[k.value for k in PolicyKind], required=True)
    p.add_argument("--buffer-size", type=int, default=3)
    p.add_argument("--ransac-n", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policy-seed", type=int, default=0)
    p.add_argument("--id-dims", default=None, help="comma-separated identity coordinates")
    p.add_argument("--synth-count", type=int, default=50)
    p.add_argument("--concentration", type=float, default=1.0)
    p.add_argument("--replay-weight", type=float, default=1.0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="run a full comparison from a YAML config")
    p.add_argument("config", type=Path)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("oracle", help="brute-force verification suite")
    p.add_argument("--hull-cases", type=int, default=200)
    p.add_argument("--hull-er-cases", type=int, default=50)
    p.add_argument("--step", type=float, default=0.002)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ReplayError as exc:
        print(json.dumps(exc.to_record()), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "io_error", "message": str(exc)}), file=sys.stderr)
        return 2
    except (KeyError, TypeError, ValueError) as exc:
        print(json.dumps({"error": "invalid_input", "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
