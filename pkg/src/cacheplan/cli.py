"""Command-line front end for the caching-schedule pipeline.

Each subcommand consumes and produces file artifacts so stages compose on
disk: gen-traj -> build-pact -> plan -> run -> eval, plus ablate for
sweeps. Outputs are deterministic for fixed flags, seed and input bytes;
nothing volatile (timestamps, timings) goes into an artifact.

Exit codes: 2 bad configuration, 3 file-format violation, 4 infeasible
plan, 1 any other failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .cost import CostVariant, build_pact, load_cost_tensor, save_cost_tensor
from .errors import CachePlanError, ConfigError, FormatError, InfeasibleError
from .evaluate import (
    evaluate_playback,
    pca_project,
    write_series_csv,
    write_tracks_csv,
)
from .planner import (
    brute_force_plan,
    objective_of,
    plan_exact_dp,
    plan_paper_dp,
    schedule_from_json,
    schedule_to_json,
)
from .runtime import playback_model, run_schedule, run_sidecar
from .trajectory import (
    ToyModelSpec,
    generate_synthetic,
    load_trajectory,
    run_toy_sampler,
    save_trajectory,
)

GEN_KINDS = (
    "polynomial",
    "exp-decay",
    "two-regime",
    "toy-linear",
    "toy-two-regime",
    "toy-oscillatory",
)

_TOY_FIELD = {
    "toy-linear": "linear-field",
    "toy-two-regime": "two-regime",
    "toy-oscillatory": "oscillatory",
}


def _variant_from_args(args) -> CostVariant:
    return CostVariant(
        dim_mode=args.cost_dim,
        aggregate_mode=args.cost_agg,
        bound_mode=args.cost_bounds,
    )


def _load_trajs(args):
    paths = list(args.traj or [])
    if getattr(args, "traj_dir", None):
        paths.extend(sorted(Path(args.traj_dir).glob("*.dptj")))
    if not paths:
        raise ConfigError("no input trajectories: pass --traj and/or --traj-dir")
    trajs = []
    for path in paths:
        if not Path(path).exists():
            raise ConfigError(f"--traj file not found: {path}")
        traj, _ = load_trajectory(path)
        trajs.append(traj)
    return trajs


def _solve(tensor, num_steps, prefix, solver):
    if solver == "paper":
        return plan_paper_dp(tensor, num_steps, prefix)[0]
    if solver == "exact":
        return plan_exact_dp(tensor, num_steps, prefix)[0]
    return brute_force_plan(tensor, num_steps, prefix)


def cmd_gen_traj(args) -> int:
    out = Path(args.out)
    if args.count > 1:
        out.mkdir(parents=True, exist_ok=True)
    params = {"noise": args.noise}
    if args.degree is not None:
        params["degree"] = args.degree
    for index in range(args.count):
        seed = args.seed + index
        if args.kind in _TOY_FIELD:
            spec = ToyModelSpec(dim=args.dim, kind=_TOY_FIELD[args.kind], seed=seed)
            init = np.random.default_rng(seed).uniform(0.5, 1.5, size=args.dim)
            traj, _ = run_toy_sampler(spec, args.T, init)
        else:
            traj = generate_synthetic(args.kind, args.T, args.dim, params, seed=seed)
        metadata = {
            "kind": args.kind,
            "seed": seed,
            "T": args.T,
            "dim": args.dim,
            "label": traj.label,
        }
        path = out / f"traj_{index:03d}.dptj" if args.count > 1 else out
        save_trajectory(path, traj, metadata)
    return 0


def cmd_build_pact(args) -> int:
    trajs = _load_trajs(args)
    tensor = build_pact(trajs, order=args.O, variant=_variant_from_args(args))
    save_cost_tensor(args.out, tensor)
    return 0


def cmd_plan(args) -> int:
    if not Path(args.pact).exists():
        raise ConfigError(f"--pact file not found: {args.pact}")
    tensor = load_cost_tensor(args.pact)
    started = time.perf_counter()
    schedule = _solve(tensor, args.K, args.M, args.solver)
    elapsed = time.perf_counter() - started
    if args.compare:
        paper = plan_paper_dp(tensor, args.K, args.M)[0]
        exact = plan_exact_dp(tensor, args.K, args.M)[0]
        gap = paper.objective - exact.objective
        print(f"paper objective: {paper.objective!r}")
        print(f"exact objective: {exact.objective!r}")
        print(f"gap (paper - exact): {gap!r}")
    if args.verbose:
        print(f"planned {len(schedule.steps)} steps in {elapsed:.3f}s", file=sys.stderr)
    Path(args.out).write_text(schedule_to_json(schedule, args.solver, tensor.variant))
    return 0


def _read_schedule(path):
    if not Path(path).exists():
        raise ConfigError(f"--schedule file not found: {path}")
    return schedule_from_json(Path(path).read_text())


def cmd_run(args) -> int:
    if not Path(args.traj).exists():
        raise ConfigError(f"--traj file not found: {args.traj}")
    truth, _ = load_trajectory(args.traj)
    schedule, _ = _read_schedule(args.schedule)
    if schedule.total_steps != truth.total_steps:
        raise ConfigError(
            f"--schedule T={schedule.total_steps} does not match --traj T={truth.total_steps}"
        )
    record = run_schedule(
        playback_model(truth), schedule, np.zeros(truth.dim), order=args.O
    )
    save_trajectory(args.out, record.trajectory, {"source": "run", "T": truth.total_steps})
    sidecar = Path(args.sidecar) if args.sidecar else Path(str(args.out) + ".json")
    sidecar.write_text(json.dumps(run_sidecar(record), sort_keys=True, indent=2) + "\n")
    if args.verbose:
        print(f"ran schedule in {record.wall_time:.3f}s", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    if not Path(args.traj).exists():
        raise ConfigError(f"--traj file not found: {args.traj}")
    truth, _ = load_trajectory(args.traj)
    schedule, _ = _read_schedule(args.schedule)
    if schedule.total_steps != truth.total_steps:
        raise ConfigError(
            f"--schedule T={schedule.total_steps} does not match --traj T={truth.total_steps}"
        )
    tensor = None
    if args.pact:
        if not Path(args.pact).exists():
            raise ConfigError(f"--pact file not found: {args.pact}")
        tensor = load_cost_tensor(args.pact)
    report, record, _ = evaluate_playback(truth, schedule, args.O, tensor=tensor)
    Path(args.out).write_text(report.to_json())
    if args.series_csv:
        write_series_csv(args.series_csv, report.per_step, truth.total_steps)
    if args.pca_csv:
        projection = pca_project([truth, record.trajectory])
        write_tracks_csv(args.pca_csv, projection, truth.total_steps)
    return 0


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from exc
    if not values:
        raise ConfigError(f"{flag} is empty")
    return values


def _ablate_one(trajs, config):
    variant, cal_size, num_steps, prefix, order, solver = config
    tensor = build_pact(trajs[:cal_size], order=order, variant=variant)
    schedule = _solve(tensor, num_steps, prefix, solver)
    devs, psnrs = [], []
    for traj in trajs:
        report, _, _ = evaluate_playback(traj, schedule, order, tensor=tensor)
        devs.append(report.realized_deviation)
        psnrs.append(report.final_psnr)
    return {
        "dim_mode": variant.dim_mode,
        "aggregate_mode": variant.aggregate_mode,
        "bound_mode": variant.bound_mode,
        "cal_size": cal_size,
        "K": num_steps,
        "M": prefix,
        "O": order,
        "solver": solver,
        "steps": " ".join(str(s) for s in schedule.steps),
        "planned_objective": repr(objective_of(schedule, tensor)),
        "realized_deviation": repr(float(np.mean(devs))),
        "final_psnr": repr(float(np.mean(psnrs))),
        "invocation_ratio": repr(schedule.total_steps / len(schedule.steps)),
    }


def cmd_ablate(args) -> int:
    trajs = _load_trajs(args)
    ks = _parse_int_list(args.sweep_k, "--sweep-k") if args.sweep_k else [args.K]
    orders = _parse_int_list(args.sweep_o, "--sweep-o") if args.sweep_o else [args.O]
    sizes = (
        _parse_int_list(args.sweep_cal, "--sweep-cal") if args.sweep_cal else [len(trajs)]
    )
    for size in sizes:
        if not 1 <= size <= len(trajs):
            raise ConfigError(f"--sweep-cal size {size} outside [1, {len(trajs)}]")
    if args.sweep_variants:
        variants = [
            CostVariant(dim, agg, args.cost_bounds)
            for dim in ("3d", "2d")
            for agg in ("cum", "term")
        ]
    else:
        variants = [_variant_from_args(args)]
    configs = [
        (variant, size, k, args.M, order, args.solver)
        for variant in variants
        for size in sizes
        for k in ks
        for order in orders
    ]
    workers = max(1, int(os.environ.get("PACT_THREADS", "1")))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(configs))) as pool:
            rows = list(pool.map(lambda c: _ablate_one(trajs, c), configs))
    else:
        rows = [_ablate_one(trajs, config) for config in configs]
    fields = [
        "dim_mode",
        "aggregate_mode",
        "bound_mode",
        "cal_size",
        "K",
        "M",
        "O",
        "solver",
        "steps",
        "planned_objective",
        "realized_deviation",
        "final_psnr",
        "invocation_ratio",
    ]
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cacheplan",
        description="Plan, execute and evaluate feature-cache schedules.",
    )
    parser.add_argument("--verbose", action="store_true", help="timing notes on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-traj", help="generate synthetic or toy-sampler trajectories")
    p.add_argument("--kind", choices=GEN_KINDS, default="two-regime")
    p.add_argument("-T", type=int, default=50, help="full-step count")
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1, help="trajectories to emit (dir output)")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--degree", type=int, default=None, help="polynomial degree")
    p.add_argument("--out", required=True, help="output file (count=1) or directory")
    p.set_defaults(func=cmd_gen_traj)

    p = sub.add_parser("build-pact", help="calibrate a cost tensor from trajectories")
    p.add_argument("--traj", action="append", help="trajectory file (repeatable)")
    p.add_argument("--traj-dir", help="directory of .dptj files")
    p.add_argument("-O", type=int, default=2, help="prediction order")
    p.add_argument("--cost-dim", choices=("3d", "2d"), default="3d")
    p.add_argument("--cost-agg", choices=("cum", "term"), default="cum")
    p.add_argument("--cost-bounds", choices=("paper", "skipped"), default="paper")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_pact)

    p = sub.add_parser("plan", help="select key timesteps over a cost tensor")
    p.add_argument("--pact", required=True)
    p.add_argument("-K", type=int, required=True, help="schedule length")
    p.add_argument("-M", type=int, default=3, help="enforced initial steps")
    p.add_argument("--solver", choices=("paper", "exact", "brute"), default="paper")
    p.add_argument("--compare", action="store_true", help="print paper vs exact objectives")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="replay a trajectory under a schedule")
    p.add_argument("--traj", required=True, help="ground-truth trajectory (playback model)")
    p.add_argument("--schedule", required=True)
    p.add_argument("-O", type=int, default=2)
    p.add_argument("--out", required=True, help="produced trajectory file")
    p.add_argument("--sidecar", help="run summary JSON (default: <out>.json)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score a schedule against ground truth")
    p.add_argument("--traj", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--pact", help="cost tensor for the planned objective")
    p.add_argument("-O", type=int, default=2)
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--series-csv", help="per-step deviation CSV")
    p.add_argument("--pca-csv", help="2D projection CSV of truth + run")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="sweep variants/K/order/calibration size")
    p.add_argument("--traj", action="append")
    p.add_argument("--traj-dir")
    p.add_argument("-K", type=int, default=13)
    p.add_argument("-M", type=int, default=3)
    p.add_argument("-O", type=int, default=2)
    p.add_argument("--solver", choices=("paper", "exact", "brute"), default="paper")
    p.add_argument("--cost-dim", choices=("3d", "2d"), default="3d")
    p.add_argument("--cost-agg", choices=("cum", "term"), default="cum")
    p.add_argument("--cost-bounds", choices=("paper", "skipped"), default="paper")
    p.add_argument("--sweep-k", help="comma list of K values")
    p.add_argument("--sweep-o", help="comma list of prediction orders")
    p.add_argument("--sweep-cal", help="comma list of calibration sizes")
    p.add_argument("--sweep-variants", action="store_true", help="all dim x agg combinations")
    p.add_argument("--out", required=True, help="CSV matrix")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return 3
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 4
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CachePlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
