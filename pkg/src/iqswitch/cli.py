"""Command-line front end: single runs, experiment sweeps, and the
throughput comparison table.

Exit codes: 0 success, 2 usage error, 3 runtime failure.  Sweep rows are
seeded from a stable hash of (master seed, config), so re-running a sweep
reproduces its CSV byte for byte regardless of worker count.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor

from .engine import RunConfig, measure_max_throughput, run
from .schedulers import ALGORITHMS
from .traffic import PATTERNS

CSV_HEADER = ("algorithm,pattern,N,T,load,arrival_model,burst,seed,"
              "slots,throughput,mean_delay,delay_ci,stable")

WORKERS_ENV = "IQSWITCH_WORKERS"

# Published maximum-throughput reference values for the default
# N=64, T=16 configuration at offered load 0.9999.
REFERENCE_MAX_THROUGHPUT = {
    "swqps": {"uniform": 0.9256, "quasidiag": 0.9171, "logdiag": 0.9140, "diag": 0.8774},
    "sbqps": {"uniform": 0.8688, "quasidiag": 0.8710, "logdiag": 0.8731, "diag": 0.8647},
    "islip": {"uniform": 0.9956, "quasidiag": 0.8043, "logdiag": 0.8316, "diag": 0.8296},
    "qps1": {"uniform": 0.6354, "quasidiag": 0.6660, "logdiag": 0.6878, "diag": 0.7516},
}
TABLE1_ALGORITHMS = ("swqps", "sbqps", "islip", "qps1")


def derive_seed(master: int, *parts) -> int:
    """Stable 63-bit seed from the master seed and a config signature."""
    key = "|".join([str(master)] + [str(p) for p in parts])
    digest = hashlib.sha256(key.encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def _row_from_task(task: dict) -> str:
    cfg = RunConfig(
        n=task["n"], algorithm=task["alg"], load=task["load"], t=task["t"],
        pattern=task["pattern"], arrival_model=task["arrivals"],
        burst_size=task["burst"] or 16.0, knockout=task["knockout"],
        seed=task["seed"], max_slots=task["max_slots"],
        engine=task.get("engine", "auto"),
    )
    st = run(cfg)
    burst_field = "" if task["arrivals"] == "bernoulli" else f"{task['burst']:g}"
    return ",".join([
        task["alg"], task["pattern"], str(task["n"]), str(task["t"]),
        f"{task['load']:g}", task["arrivals"], burst_field, str(task["seed"]),
        str(st.slots), _fmt(st.throughput), _fmt(st.mean_delay),
        _fmt(st.delay_ci_half) if st.delay_ci_half != float("inf") else "inf",
        "true" if st.stable else "false",
    ])


def _positive_int(name):
    def parse(value):
        try:
            v = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer")
        if v < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1")
        return v
    return parse


def _float_list(value: str) -> list[float]:
    return [float(x) for x in value.split(",") if x]


def _str_list(value: str) -> list[str]:
    return [x.strip() for x in value.split(",") if x.strip()]


def _int_list(value: str) -> list[int]:
    return [int(x) for x in value.split(",") if x]


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alg", choices=ALGORITHMS, default="swqps")
    p.add_argument("--pattern", choices=PATTERNS, default="uniform")
    p.add_argument("--n", type=_positive_int("--n"), default=64)
    p.add_argument("--t", type=_positive_int("--t"), default=16)
    p.add_argument("--load", type=float, default=0.5)
    p.add_argument("--arrivals", choices=("bernoulli", "onoff"), default="bernoulli")
    p.add_argument("--burst-size", type=float, default=16.0)
    p.add_argument("--knockout", type=_positive_int("--knockout"), default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-slots", type=int, default=0)
    p.add_argument("--engine", choices=("auto", "python", "kernel"), default="auto")


def _validate_common(parser: argparse.ArgumentParser, args) -> None:
    if not 0.0 <= args.load <= 1.0:
        parser.error("--load: load must be in [0,1]")
    if args.arrivals == "onoff" and not 0.0 < args.load < 1.0:
        parser.error("--load: onoff arrivals need load in (0,1)")
    if args.burst_size < 1:
        parser.error("--burst-size: burst size must be >= 1")


def _warn_expensive(alg: str, n: int) -> None:
    if alg == "mwm" and n >= 512:
        warnings.warn(
            f"mwm solves an O(N^3) assignment every slot; N={n} runs may "
            "take a very long time", RuntimeWarning, stacklevel=2)


def cmd_run(args, parser) -> int:
    _validate_common(parser, args)
    _warn_expensive(args.alg, args.n)
    task = {
        "alg": args.alg, "pattern": args.pattern, "n": args.n, "t": args.t,
        "load": args.load, "arrivals": args.arrivals,
        "burst": args.burst_size, "knockout": args.knockout,
        "seed": args.seed, "max_slots": args.max_slots,
        "engine": args.engine,
    }
    row = _row_from_task(task)
    print(CSV_HEADER)
    print(row)
    if args.out:
        _atomic_write(args.out, CSV_HEADER + "\n" + row + "\n")
    return 0


def _atomic_write(path: str, content: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(content)
    os.replace(tmp, path)


def _sweep_tasks(args) -> list[dict]:
    bursts: list[float | None]
    if args.arrivals == "onoff":
        bursts = list(args.burst_sizes)
    else:
        bursts = [None]
    tasks = []
    for alg in args.algs:
        for pattern in args.patterns:
            for n in args.ns:
                for t in args.ts:
                    for load in args.loads:
                        for burst in bursts:
                            for rep in range(args.reps):
                                seed = derive_seed(
                                    args.seed, alg, pattern, n, t, load,
                                    args.arrivals, burst, rep)
                                tasks.append({
                                    "alg": alg, "pattern": pattern, "n": n,
                                    "t": t, "load": load,
                                    "arrivals": args.arrivals,
                                    "burst": burst, "knockout": args.knockout,
                                    "seed": seed, "max_slots": args.max_slots,
                                })
    return tasks


def _resolve_workers(value: int | None) -> int:
    if value:
        return value
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def cmd_sweep(args, parser) -> int:
    if args.spec:
        with open(args.spec) as fh:
            spec = json.load(fh)
        for key in ("algs", "patterns", "loads", "ns", "ts", "burst_sizes"):
            if key in spec:
                setattr(args, key, spec[key])
        for key in ("reps", "seed", "arrivals", "knockout", "max_slots", "out"):
            if key in spec:
                setattr(args, key, spec[key])
    if not args.out:
        parser.error("--out: sweep needs an output CSV path")
    for alg in args.algs:
        if alg not in ALGORITHMS:
            parser.error(f"--algs: unknown algorithm {alg!r}")
    for pattern in args.patterns:
        if pattern not in PATTERNS:
            parser.error(f"--patterns: unknown pattern {pattern!r}")
    for load in args.loads:
        if not 0.0 <= load <= 1.0:
            parser.error("--loads: load must be in [0,1]")
    out_dir = os.path.dirname(os.path.abspath(args.out))
    if not os.path.isdir(out_dir) or not os.access(out_dir, os.W_OK):
        print(f"error: output path not writable: {args.out}", file=sys.stderr)
        return 3
    tasks = _sweep_tasks(args)
    if not tasks:
        parser.error("sweep grid is empty")
    for task in tasks:
        _warn_expensive(task["alg"], task["n"])
    workers = _resolve_workers(args.workers)
    rows: list[str] = []
    if workers == 1 or len(tasks) == 1:
        for k, task in enumerate(tasks):
            rows.append(_row_from_task(task))
            print(f"[{k + 1}/{len(tasks)}] done", file=sys.stderr)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for k, row in enumerate(pool.map(_row_from_task, tasks)):
                rows.append(row)
                print(f"[{k + 1}/{len(tasks)}] done", file=sys.stderr)
    _atomic_write(args.out, "\n".join([CSV_HEADER] + rows) + "\n")
    print(f"wrote {len(rows)} rows to {args.out}", file=sys.stderr)
    return 0


def _table1_cell(task: dict) -> float:
    cfg = RunConfig(n=task["n"], algorithm=task["alg"], load=0.9999,
                    t=task["t"], pattern=task["pattern"], seed=task["seed"])
    return measure_max_throughput(cfg, horizon=task["slots"])


def cmd_table1(args, parser) -> int:
    slots = args.slots if args.slots else 500 * args.n * args.n
    tasks = []
    for alg in TABLE1_ALGORITHMS:
        for pattern in PATTERNS:
            seed = derive_seed(args.seed, "table1", alg, pattern, args.n, args.t)
            tasks.append({"alg": alg, "pattern": pattern, "n": args.n,
                          "t": args.t, "seed": seed, "slots": slots})
    workers = _resolve_workers(args.workers)
    if workers == 1:
        measured = [_table1_cell(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            measured = list(pool.map(_table1_cell, tasks))
    print(f"Maximum achievable throughput, N={args.n}, T={args.t}, "
          f"load 0.9999, {slots} slots per cell")
    print(f"{'algorithm':10s} {'pattern':10s} {'measured':>9s} "
          f"{'reference':>9s} {'deviation':>9s}")
    worst = 0.0
    for task, got in zip(tasks, measured):
        ref = REFERENCE_MAX_THROUGHPUT[task["alg"]][task["pattern"]]
        dev = got - ref
        worst = max(worst, abs(dev))
        flag = "  <-- |dev| > 0.02" if abs(dev) > 0.02 else ""
        print(f"{task['alg']:10s} {task['pattern']:10s} {got:9.4f} "
              f"{ref:9.4f} {dev:+9.4f}{flag}")
    if args.out:
        lines = ["algorithm,pattern,measured,reference,deviation"]
        for task, got in zip(tasks, measured):
            ref = REFERENCE_MAX_THROUGHPUT[task["alg"]][task["pattern"]]
            lines.append(f"{task['alg']},{task['pattern']},{_fmt(got)},"
                         f"{_fmt(ref)},{got - ref:+.4f}")
        _atomic_write(args.out, "\n".join(lines) + "\n")
    print(f"largest absolute deviation: {worst:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iqswitch",
        description="Input-queued crossbar switch scheduling simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation, print a CSV row")
    _add_run_flags(p_run)
    p_run.add_argument("--out", default=None, help="also write the CSV here")

    p_sweep = sub.add_parser("sweep", help="run a grid of simulations to CSV")
    p_sweep.add_argument("--algs", type=_str_list, default=["swqps"])
    p_sweep.add_argument("--patterns", type=_str_list, default=["uniform"])
    p_sweep.add_argument("--loads", type=_float_list, default=[0.5])
    p_sweep.add_argument("--ns", type=_int_list, default=[64])
    p_sweep.add_argument("--ts", type=_int_list, default=[16])
    p_sweep.add_argument("--arrivals", choices=("bernoulli", "onoff"),
                         default="bernoulli")
    p_sweep.add_argument("--burst-sizes", type=_float_list, default=[16.0])
    p_sweep.add_argument("--knockout", type=_positive_int("--knockout"), default=3)
    p_sweep.add_argument("--reps", type=_positive_int("--reps"), default=1)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--max-slots", type=int, default=0)
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--spec", default=None,
                         help="JSON file with the sweep grid (overrides flags)")

    p_t1 = sub.add_parser("table1", help="reproduce the throughput table")
    p_t1.add_argument("--n", type=_positive_int("--n"), default=64)
    p_t1.add_argument("--t", type=_positive_int("--t"), default=16)
    p_t1.add_argument("--seed", type=int, default=0)
    p_t1.add_argument("--slots", type=int, default=0,
                      help="horizon per cell (default 500 N^2)")
    p_t1.add_argument("--workers", type=int, default=None)
    p_t1.add_argument("--out", default=None, help="also write a CSV here")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args, parser)
        if args.command == "sweep":
            return cmd_sweep(args, parser)
        if args.command == "table1":
            return cmd_table1(args, parser)
        parser.error(f"unknown command {args.command!r}")
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
