"""Command-line front end: instance generation, recovery runs, sweeps, and
the lower-bound experiment.

Exit codes: 0 success, 1 usage error, 2 input error, 3 internal error.
Reports go to stdout as a human summary plus one JSON line; ``--report``
appends the JSON line to a file as well.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .batch import RecoveryReport, batch_recover_const, batch_recover_eps
from .core import matrix_l1_error, optimal_tail_error
from .generators import generate_instance
from .lowerbound import experiment_rows_to_csv, lowerbound_experiment
from .matrixio import load_matrix, save_matrix
from .measurement import MeasurementOracle
from .primitives import RecoveryConfig, noise_capped_recover_matrix, two_round_exact_recover

EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3

BENCH_HEADER = "algo,n,m,k,eps,kind,mean_ratio,max_ratio,mean_meas,rounds"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def ratio_display(eps_opt: float, error: float):
    """error / eps_opt, with "exact" when the optimum is 0 and the error is
    numerically 0, and "inf" when the optimum is 0 but the error is not."""
    if eps_opt > 0.0:
        return error / eps_opt
    return "exact" if error <= 1e-9 else "inf"


@dataclasses.dataclass
class RunReport:
    """One recovery run, machine readable.  The seed makes it replayable."""

    algorithm: str
    n: int
    m: int
    k: int
    eps: float | None
    mode: str
    seed: int
    eps_opt: float
    l1_error: float
    ratio: object
    measurements: int
    rounds: int
    ledger: dict
    wall_time_s: float

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


def _build_config(args) -> RecoveryConfig:
    return RecoveryConfig(mode=args.mode, seed=args.seed)


def _run_algorithm(matrix, algo: str, k: int, eps: float, cfg: RecoveryConfig):
    """Returns (estimate, eps_opt, l1_error, ledger snapshot, rounds)."""
    oracle = MeasurementOracle(matrix)
    if algo == "const":
        estimate, report = batch_recover_const(oracle, k, cfg)
        return estimate, report.eps_opt, report.l1_error, oracle.ledger.snapshot(), oracle.ledger.rounds
    if algo == "eps":
        estimate, report = batch_recover_eps(oracle, k, eps, cfg)
        return estimate, report.eps_opt, report.l1_error, oracle.ledger.snapshot(), oracle.ledger.rounds
    if algo == "noisecapped":
        estimate = noise_capped_recover_matrix(oracle, eps, cfg)
    elif algo == "tworound":
        estimate, _ = two_round_exact_recover(oracle.handles(), cfg)
    else:
        raise ValueError(f"unknown algorithm {algo!r}")
    eps_opt = optimal_tail_error(matrix, k).eps_opt
    err = matrix_l1_error(matrix, estimate)
    return estimate, eps_opt, err, oracle.ledger.snapshot(), oracle.ledger.rounds


def cmd_gen(args) -> int:
    matrix = generate_instance(args.kind, args.n, args.m, args.k, args.noise, args.seed)
    save_matrix(args.out, matrix)
    eps_opt = optimal_tail_error(matrix, args.k).eps_opt
    print(f"wrote {args.kind} instance n={args.n} m={args.m} k={args.k} "
          f"seed={args.seed} eps_opt={eps_opt:.6g} -> {args.out}")
    return 0


def cmd_recover(args) -> int:
    matrix = load_matrix(args.matrix)
    cfg = _build_config(args)
    start = time.perf_counter()
    _, eps_opt, err, ledger, rounds = _run_algorithm(matrix, args.algo, args.k, args.eps, cfg)
    wall = time.perf_counter() - start
    run = RunReport(
        algorithm=args.algo, n=matrix.n, m=matrix.m, k=args.k,
        eps=args.eps if args.algo in ("eps", "noisecapped") else None,
        mode=args.mode, seed=args.seed,
        eps_opt=eps_opt, l1_error=err, ratio=ratio_display(eps_opt, err),
        measurements=ledger["total"], rounds=rounds, ledger=ledger,
        wall_time_s=wall,
    )
    print(f"algo={run.algorithm} n={run.n} m={run.m} k={run.k} eps={run.eps} "
          f"eps_opt={run.eps_opt:.6g} error={run.l1_error:.6g} ratio={run.ratio} "
          f"measurements={run.measurements} rounds={run.rounds} "
          f"seed={run.seed} wall={wall:.3f}s")
    line = run.to_json()
    print(line)
    if args.report:
        with open(args.report, "a", encoding="ascii") as fh:
            fh.write(line + "\n")
    return 0


def _parse_bench_config(path) -> dict[str, list[str]]:
    values: dict[str, list[str]] = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, val = line.split("=", 1)
            values.setdefault(key.strip(), []).append(val.strip())
    return values


def _bench_cell(algo, kind, n, m, k, eps, noise, seeds, mode):
    ratios, totals, rounds = [], [], []
    for seed in seeds:
        matrix = generate_instance(kind, n, m, k, noise, seed)
        cfg = RecoveryConfig(mode=mode, seed=seed)
        _, eps_opt, err, ledger, rnds = _run_algorithm(matrix, algo, k, eps, cfg)
        ratios.append(err / eps_opt if eps_opt > 0 else (1.0 if err <= 1e-9 else math.inf))
        totals.append(ledger["total"])
        rounds.append(rnds)
    if len(set(rounds)) != 1:
        raise AssertionError("round count varied across seeds within one cell")
    return (f"{algo},{n},{m},{k},{eps:g},{kind},"
            f"{np.mean(ratios):.6g},{np.max(ratios):.6g},{np.mean(totals):.6g},{rounds[0]}")


def cmd_bench(args) -> int:
    conf = _parse_bench_config(args.config)

    def ints(key, default):
        return [int(v) for v in conf[key]] if key in conf else [default]

    def floats(key, default):
        return [float(v) for v in conf[key]] if key in conf else [default]

    algos = conf.get("algo", ["const"])
    kinds = conf.get("kind", ["planted"])
    ns = ints("n", 64)
    ms = ints("m", 8)
    ks = ints("k", 1)
    epss = floats("eps", 0.25)
    noise = floats("noise", 1.0)[0]
    mode = conf.get("mode", ["idealized"])[0]
    jobs = int(conf.get("jobs", ["4"])[0])
    if "seed" in conf:
        seeds = [int(v) for v in conf["seed"]]
    else:
        seeds = list(range(int(conf.get("seeds", ["3"])[0])))

    for algo in algos:
        if algo not in ("const", "eps"):
            raise ValueError(f"bench supports algo const or eps, got {algo!r}")
    cells = [(algo, kind, n, m, k, eps)
             for algo in algos for kind in kinds
             for n in ns for m in ms for k in ks for eps in epss]
    lines = [BENCH_HEADER]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        futures = [pool.submit(_bench_cell, algo, kind, n, m, k, eps, noise, seeds, mode)
                   for (algo, kind, n, m, k, eps) in cells]
        lines.extend(f.result() for f in futures)
    table = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(table)
    print(table, end="")
    return 0


def cmd_lowerbound(args) -> int:
    half = [args.n if j < args.m // 2 else args.n - 1 for j in range(args.m)]
    profiles = [
        (f"all={args.n}", args.n),
        (f"all={args.n - 1}", args.n - 1),
        (f"half={args.n}", half),
    ]
    rows = lowerbound_experiment(args.n, args.m, profiles, args.trials, args.seed)
    table = experiment_rows_to_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(table)
    print(table, end="")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="batchsparse",
                     description="Batch sparse recovery from counted linear measurements")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an instance file")
    gen.add_argument("--kind", choices=["planted", "adversarial", "powerlaw"], required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--k", type=int, default=1)
    gen.add_argument("--noise", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    rec = sub.add_parser("recover", help="run a recovery algorithm on a matrix file")
    rec.add_argument("matrix")
    rec.add_argument("--algo", choices=["const", "eps", "noisecapped", "tworound"],
                     required=True)
    rec.add_argument("--k", type=int, default=1)
    rec.add_argument("--eps", type=float, default=0.25,
                     help="accuracy for eps, error cap for noisecapped")
    rec.add_argument("--mode", choices=["idealized", "sketch"], default="idealized")
    rec.add_argument("--seed", type=int, default=0)
    rec.add_argument("--report", help="append the JSON report line to this file")
    rec.set_defaults(func=cmd_recover)

    bench = sub.add_parser("bench", help="sweep a config cross-product, emit CSV")
    bench.add_argument("config", help="key=value file; repeat keys to sweep")
    bench.add_argument("--out")
    bench.set_defaults(func=cmd_bench)

    lb = sub.add_parser("lowerbound", help="non-adaptive vs adaptive separation, emit CSV")
    lb.add_argument("--n", type=int, required=True)
    lb.add_argument("--m", type=int, required=True)
    lb.add_argument("--trials", type=int, default=100)
    lb.add_argument("--seed", type=int, default=0)
    lb.add_argument("--out")
    lb.set_defaults(func=cmd_lowerbound)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"batchsparse: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"batchsparse: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
