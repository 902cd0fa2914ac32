"""Command-line interface.

Subcommands: ``run`` (single simulation from a config file), ``sweep``
(Monte-Carlo sweep from a spec file), ``markov`` (walk quantities for a
topology), ``verify`` (verification suites), ``params`` (closed-form
protocol parameters), ``bench`` (backend benchmark). All outputs are UTF-8.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import engine, experiments, markov, protocols, topology, verification
from .benchmark import format_report, run_benchmark


def _load(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _add_topology_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topology", default="grid",
                   choices=["grid", "line", "barabasi_albert", "erdos_renyi", "explicit"])
    p.add_argument("--rows", type=int, default=3)
    p.add_argument("--cols", type=int, default=3)
    p.add_argument("--n", type=int, help="site count for line/BA/ER topologies")
    p.add_argument("--k", type=int, help="attachment count for barabasi_albert")
    p.add_argument("--p", type=float, help="edge probability for erdos_renyi")
    p.add_argument("--edges-file", help="edge-list file for explicit topologies")


def _graph_from_flags(args) -> topology.SiteGraph:
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    kind = args.topology
    if kind == "grid":
        return topology.grid(args.rows, args.cols)
    if kind == "line":
        return topology.line(args.n if args.n else args.rows * args.cols)
    if kind == "barabasi_albert":
        return topology.barabasi_albert(args.n, args.k, rng)
    if kind == "erdos_renyi":
        return topology.erdos_renyi(args.n, args.p, rng)
    edges = topology.parse_edge_list(_load(args.edges_file))
    return topology.explicit(edges)


def _cmd_run(args) -> int:
    cfg = engine.parse_config(_load(args.config))
    overrides = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.cap is not None:
        overrides["cap"] = args.cap
    if overrides:
        cfg = replace(cfg, **overrides)
    record = engine.simulate(cfg, args.seed, backend=args.backend)
    print(f"protocol={cfg.protocol} mode={cfg.mode} backend={record.backend}")
    print(f"status={record.status} steps_run={record.steps_run} "
          f"first_correct_time={record.first_correct_time}")
    ids = np.array(record.legit_ids, dtype=np.int64)
    ok = engine.success_check(record.final[ids], record.truth) if len(ids) else True
    print(f"final_vectors_correct={ok}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        trace_path = os.path.join(args.out, "record.txt")
        with open(trace_path, "w", encoding="utf-8") as fh:
            fh.write(record.serialize())
        ledger_path = os.path.join(args.out, "ledgers.csv")
        with open(ledger_path, "w", encoding="utf-8") as fh:
            fh.write(record.ledgers_csv())
        print(f"wrote {trace_path} and {ledger_path}")
    return 0


def _cmd_sweep(args) -> int:
    spec = experiments.parse_sweep_spec(_load(args.spec))
    result = experiments.run_sweep(spec, args.seed if args.seed is not None else 0)
    for value, series, mean, sd, lo, hi, runs, failures in result.stat_fields():
        print(f"{result.axis}={value} {series}: mean={mean:.1f} sd={sd:.1f} "
              f"ci=[{lo:.1f}, {hi:.1f}] runs={runs} failures={failures}")
    formats = tuple(f.strip() for f in args.format.split(",") if f.strip())
    paths = experiments.export(result, args.out, formats=formats, stem=args.stem)
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_markov(args) -> int:
    graph = _graph_from_flags(args)
    P = markov.lazy_transition_matrix(graph)
    mq = markov.compute_markov_quantities(P)
    print(f"sites={graph.num_sites} edges={len(graph.edges)}")
    print(f"t_hit={mq.t_hit!r}")
    print(f"t_meet={mq.t_meet!r}")
    print(f"t_mix={mq.t_mix}")
    print(f"meet_probability={mq.meet_probability!r}")
    print("stationary=" + ",".join(repr(float(v)) for v in mq.stationary))
    if args.out:
        for path in markov.export_markov_csv(mq, args.out):
            print(f"wrote {path}")
    return 0


def _cmd_params(args) -> int:
    cfg = engine.parse_config(_load(args.config))
    graph = engine.build_graph(cfg, np.random.default_rng(args.seed if args.seed is not None else 0))
    P = markov.lazy_transition_matrix(graph)
    mq = markov.compute_markov_quantities(P)
    print(f"t_hit={mq.t_hit!r} t_meet={mq.t_meet!r} t_mix={mq.t_mix}")
    ind = protocols.individual_params(cfg.n_robots, cfg.delta, cfg.epsilon_alpha, mq.t_meet)
    print("[individual]")
    print(ind.config_lines(), end="")
    dcv = protocols.dcv_params(
        cfg.n_robots, cfg.n_legit, cfg.delta, cfg.epsilon_alpha, mq.t_hit, mq.t_meet,
        (cfg.rho1, cfg.rho2, cfg.rho3, cfg.rho4),
    )
    print("[dcv]")
    print(dcv.config_lines(), end="")
    n_alpha, tau = experiments.calibrated_dcv_thresholds(
        cfg.delta, cfg.epsilon_alpha, mq.meet_probability
    )
    print(f"[dcv simulation calibration]\nn_alpha = {n_alpha}\ntau = {tau}")
    return 0


def _cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else 0
    failures = 0

    def report(name: str, passed: bool, detail: str = ""):
        nonlocal failures
        mark = "PASS" if passed else "FAIL"
        print(f"[{mark}] {name}" + (f" ({detail})" if detail else ""))
        if not passed:
            failures += 1

    trials = 20_000 if args.quick else 100_000
    for check in verification.run_bound_suites(seed, trials=trials):
        report(
            f"{check.name} {check.detail}",
            check.passed,
            f"empirical={check.empirical:.3g} bound={check.bound:.3g}",
        )
    max_robots = 64 if args.quick else 256
    report(
        f"proba-bound sweep |L| <= N <= {max_robots}",
        verification.run_proba_bound_sweep(max_robots=max_robots),
    )

    profile_bad = 0
    total = 0
    cap = 12 if args.quick else 30
    for f_lp in range(0, cap + 1):
        for f_lm in range(0, cap + 1 - f_lp):
            for f_mm in range(0, cap + 1 - f_lp - f_lm):
                if f_lp <= f_lm + f_mm:
                    continue
                for legit in (True, False):
                    total += 1
                    if not verification.fusion_profile_correct(f_lp, f_lm, f_mm, legit):
                        profile_bad += 1
    report(f"fusion profiles (totals <= {cap}, {total} cases)", profile_bad == 0)

    n_runs = args.runs if args.runs else (100 if args.quick else 1000)
    outcomes = verification.sample_event_E_runs(n_runs, seed)
    held = [(r, s) for r, _, a, s in outcomes if a.holds]
    bad = sum(1 for _, s in held if not s)
    report(
        f"event-conditioned fusion correctness ({len(held)}/{n_runs} runs held)",
        bad == 0 and len(held) > 0,
        f"counterexamples={bad}",
    )
    print(f"{failures} failing check(s)" if failures else "all checks passed")
    return 1 if failures else 0


def _cmd_bench(args) -> int:
    report = run_benchmark(
        seeds=range(args.seed, args.seed + args.runs),
        n_robots=args.n_robots,
    )
    print(format_report(report))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="roamtrust", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single simulation from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out", help="directory for record.txt and ledgers.csv")
    p_run.add_argument("--mode", choices=["fixed", "until-correct"])
    p_run.add_argument("--cap", type=int)
    p_run.add_argument("--backend", default="auto", choices=["auto", "python", "compiled"])
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="Monte-Carlo sweep from a spec file")
    p_sweep.add_argument("--spec", required=True)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--out", default=".")
    p_sweep.add_argument("--format", default="csv,svg")
    p_sweep.add_argument("--stem", default="sweep")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_markov = sub.add_parser("markov", help="walk quantities for a topology")
    _add_topology_flags(p_markov)
    p_markov.add_argument("--seed", type=int)
    p_markov.add_argument("--out", help="directory for CSV matrices")
    p_markov.set_defaults(func=_cmd_markov)

    p_params = sub.add_parser("params", help="closed-form protocol parameters")
    p_params.add_argument("--config", required=True)
    p_params.add_argument("--seed", type=int)
    p_params.set_defaults(func=_cmd_params)

    p_verify = sub.add_parser("verify", help="verification suites")
    p_verify.add_argument("--seed", type=int)
    p_verify.add_argument("--runs", type=int, help="event-conditioned run count")
    p_verify.add_argument("--quick", action="store_true")
    p_verify.set_defaults(func=_cmd_verify)

    p_bench = sub.add_parser("bench", help="compare compiled and pure backends")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--runs", type=int, default=5)
    p_bench.add_argument("--n-robots", type=int, default=32)
    p_bench.set_defaults(func=_cmd_bench)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
