"""
DynSC - Command Line Interface
Entry point for the `dynsc` command: replay operation streams against the
dynamic structures or the baselines (`run`), generate instances (`gen`), run
the walk-load and Barnes-Feige experiments, and queue batches of runs on
Redis (`batch`). Every subcommand writes CSV or plain text files; `run`
exits 0 only when the replay kept all hard invariants.
"""
# src/main.py

import argparse
import csv
import logging
import sys
from typing import List, Optional, Sequence

from dotenv import load_dotenv

# Load environment variables before config reads them
load_dotenv()

from config import (
    APP_C_RHO, MAX_DEGREE, PROJ_BUDGET_SCALE, SPARSIFIER, SPARSIFIER_BACKENDS,
    log_configuration, validate_configuration,
)
from graph_core import DynSCError, read_graph, write_graph

logger = logging.getLogger(__name__)


def _weights(text: Optional[str]) -> Optional[List[float]]:
    if not text:
        return None
    return [float(x) for x in text.split(",")]


def _open_out(path: Optional[str]):
    return open(path, 'w', encoding='utf-8', newline='') if path else sys.stdout


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynsc", description="Dynamic approximate Schur complements")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    from harness import ALGORITHMS, MODES
    run_p = sub.add_parser("run", help="replay an operation stream")
    run_p.add_argument("--graph", required=True)
    run_p.add_argument("--stream", required=True)
    run_p.add_argument("--mode", choices=MODES, default="er")
    run_p.add_argument("--algo", choices=ALGORITHMS, default="dynamic")
    run_p.add_argument("--beta", type=float, default=None)
    run_p.add_argument("--eps", type=float, default=0.5)
    run_p.add_argument("--c-rho", type=float, default=None, help=f"walk copies constant (default {APP_C_RHO:g})")
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--oracle", action="store_true", help="diff every query against the dense oracle")
    run_p.add_argument("--out", default=None, help="CSV path (stdout when omitted)")
    run_p.add_argument("--demand", default=None, help="demand file for solver and energy modes")
    run_p.add_argument("--sparsifier", choices=SPARSIFIER_BACKENDS, default=SPARSIFIER)
    run_p.add_argument("--presparsify", action="store_true")
    run_p.add_argument("--max-degree", type=int, default=MAX_DEGREE)
    run_p.add_argument("--budget-scale", type=float, default=PROJ_BUDGET_SCALE)
    run_p.add_argument("--min-pass-rate", type=float, default=0.9)

    gen_p = sub.add_parser("gen", help="generate graphs, demands and streams")
    gen_sub = gen_p.add_subparsers(dest="kind", required=True)

    g = gen_sub.add_parser("graph", help="G(n, p), optionally weighted or degree-bounded")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--p", type=float, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--weights", default=None, help="comma separated weight choices, e.g. 1,10,100")
    g.add_argument("--max-degree", type=int, default=None)
    g.add_argument("--out", required=True)

    g = gen_sub.add_parser("snake", help="path with alternating weights 1 and n^10")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--heavy", type=float, default=None)
    g.add_argument("--out", required=True)

    g = gen_sub.add_parser("expander", help="random regular core with rays")
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    g = gen_sub.add_parser("demand", help="zero-sum Gaussian demand")
    g.add_argument("--graph", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    from generators import STREAM_KINDS, STREAM_MODES
    g = gen_sub.add_parser("stream", help="oblivious operation stream")
    g.add_argument("--graph", required=True)
    g.add_argument("--kind", dest="stream_kind", choices=sorted(STREAM_KINDS), default="mixed")
    g.add_argument("--length", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--mode", choices=STREAM_MODES, default="er")
    g.add_argument("--demand", default=None)
    g.add_argument("--weights", default=None)
    g.add_argument("--max-degree", type=int, default=MAX_DEGREE)
    g.add_argument("--out", default=None)

    load_p = sub.add_parser("load", help="maximum walk load on path-augmented expanders")
    load_p.add_argument("--k", type=int, nargs="+", default=[16, 32, 64])
    load_p.add_argument("--seed", type=int, default=0)
    load_p.add_argument("--out", default=None)

    bf_p = sub.add_parser("bf", help="steps to reach m distinct edges on 3-regular graphs")
    bf_p.add_argument("--targets", type=int, nargs="+", default=[8, 16, 32, 64])
    bf_p.add_argument("--seed", type=int, default=0)
    bf_p.add_argument("--trials", type=int, default=21)
    bf_p.add_argument("--out", default=None)

    batch_p = sub.add_parser("batch", help="queue runs from a JSON list of configs")
    batch_p.add_argument("--configs", required=True)
    batch_p.add_argument("--wait", action="store_true", help="poll until every job finishes")
    batch_p.add_argument("--timeout", type=float, default=None)
    batch_p.add_argument("--poll-interval", type=float, default=1.0)

    sub.add_parser("config", help="validate and print the configuration")
    return parser


def cmd_run(args) -> int:
    from harness import RunConfig, run
    config = RunConfig(
        graph=args.graph, stream=args.stream, mode=args.mode, algo=args.algo, beta=args.beta,
        epsilon=args.eps, c_rho=args.c_rho, seed=args.seed, oracle=args.oracle, out=args.out,
        demand=args.demand, sparsifier=args.sparsifier, presparsify=args.presparsify,
        max_degree=args.max_degree, budget_scale=args.budget_scale, min_pass_rate=args.min_pass_rate,
    )
    result = run(config)
    if not args.out:
        sys.stdout.write(result.csv_text)
    if result.exit_code != 0:
        logger.warning(f"Run failed: pass rate {result.pass_rate}, NaN answers: {result.has_nan}")
    return result.exit_code


def cmd_gen(args) -> int:
    import generators
    if args.kind == "graph":
        if args.max_degree is not None:
            g = generators.random_bounded_degree_graph(args.n, args.p, args.seed, args.max_degree)
        else:
            g = generators.random_graph(args.n, args.p, args.seed, _weights(args.weights))
        write_graph(g, args.out)
    elif args.kind == "snake":
        write_graph(generators.gen_snake(args.n, args.heavy), args.out)
    elif args.kind == "expander":
        write_graph(generators.gen_path_augmented_expander(args.k, args.seed), args.out)
    elif args.kind == "demand":
        g = read_graph(args.graph)
        generators.write_demand(generators.random_demand(g, args.seed), args.out)
    else:
        g = read_graph(args.graph)
        b = generators.read_demand(args.demand, g.n) if args.demand else None
        if args.mode == "solver" and b is None:
            raise ValueError("solver streams need --demand (see `dynsc gen demand`)")
        lines = generators.gen_stream(args.stream_kind, g, args.length, args.seed, mode=args.mode, b=b,
                                      weights=_weights(args.weights), max_degree=args.max_degree)
        out = _open_out(args.out)
        try:
            generators.write_stream(lines, out)
        finally:
            if out is not sys.stdout:
                out.close()
    logger.info(f"Generated {args.kind}")
    return 0


def cmd_load(args) -> int:
    from harness import load_experiment
    rows = load_experiment(args.k, args.seed)
    out = _open_out(args.out)
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["k", "vertices", "max_load", "argmax", "in_core"])
        for row in rows:
            writer.writerow([row.k, row.vertices, row.max_load, row.argmax, int(row.in_core)])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_bf(args) -> int:
    from harness import barnes_feige_trend
    out = _open_out(args.out)
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["target", "median_steps", "bound"])
        for target, median, bound in barnes_feige_trend(args.targets, args.seed, args.trials):
            writer.writerow([target, f"{median:g}", bound])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_batch(args) -> int:
    from batch import load_configs, enqueue_runs, summary_passed, wait_for_jobs
    from run_queue import initialize_run_queue

    configs = load_configs(args.configs)
    if not initialize_run_queue():
        logger.error("Redis unavailable; cannot queue runs")
        return 1
    job_ids = enqueue_runs(configs)
    for job_id, config in zip(job_ids, configs):
        print(f"{job_id} {config['stream']}")
    if not args.wait:
        return 0

    results = wait_for_jobs(job_ids, timeout=args.timeout, poll_interval=args.poll_interval)
    exit_code = 0
    for job_id, config in zip(job_ids, configs):
        outcome = results[job_id]
        csv_text = outcome["result"]
        if csv_text is None:
            logger.error(f"Job {job_id} ended with status {outcome['status']}")
            exit_code = 1
            continue
        if config.get("out"):
            with open(config["out"], 'w', encoding='utf-8') as f:
                f.write(csv_text)
        if not summary_passed(csv_text):
            exit_code = 1
        print(f"{job_id} {outcome['status']} {'ok' if summary_passed(csv_text) else 'FAILED'}")
    return exit_code


def cmd_config(args) -> int:
    log_configuration()
    ok, issues = validate_configuration()
    for issue in issues:
        print(f"config issue: {issue}", file=sys.stderr)
    return 0 if ok else 1


COMMANDS = {"run": cmd_run, "gen": cmd_gen, "load": cmd_load, "bf": cmd_bf, "batch": cmd_batch,
            "config": cmd_config}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    ok, issues = validate_configuration()
    if not ok and args.command != "config":
        for issue in issues:
            logger.error(f"Configuration issue: {issue}")
        return 2
    try:
        return COMMANDS[args.command](args)
    except DynSCError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
