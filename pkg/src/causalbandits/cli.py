"""Command-line front door.

Subcommands: ``gen`` (write instance files), ``inspect`` (structural and
oracle diagnostics), ``run`` (one algorithm on one instance), and
``experiment`` (full seeded reproduction plans).  Every stochastic command
requires an explicit ``--seed``; nothing reads the clock.

Exit codes: 0 success, 2 usage error, 3 model/structural error,
4 infeasible oracle.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

import numpy as np

from .admg import StructuralError, check_identifiability, latent_projection, pa_plus_and_pa_c, topological_order, c_components
from .bandits import BanditEnv, run_crm, run_srm, run_successive_rejects, run_ucb1, run_uniform_exploration
from .cbn import (
    Arm,
    EnumerationInfeasible,
    arms_of,
    exact_q_and_m,
    exact_reward,
    load_cbn,
    save_cbn,
)
from .harness import ExperimentPlan, arm_means, execute, mix_seed
from .instances import (
    InfeasibleTarget,
    gen_experiment1,
    gen_experiment2,
    gen_experiment3,
    gen_experiment5,
    gen_tree_lower_bound,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MODEL = 3
EXIT_ORACLE = 4


def default_jobs() -> int:
    env = os.environ.get("CB_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _print_oracle_summary(cbn) -> None:
    try:
        q, m = exact_q_and_m(cbn)
        print(f"m = {m}")
        rewards = {str(a): exact_reward(cbn, a) for a in arms_of(cbn.graph)}
        best = max(rewards, key=rewards.get)
        print(f"best arm = {best} (reward {rewards[best]:.6f})")
    except EnumerationInfeasible:
        print("oracle: enumeration-infeasible")


def cmd_gen(args: argparse.Namespace) -> int:
    os.makedirs(args.out, exist_ok=True)
    kind = args.family
    if kind == "exp3":
        paths = [(os.path.join(args.out, "exp3.json"), gen_experiment3())]
    elif kind == "exp1":
        paths = [
            (os.path.join(args.out, f"exp1_{i}.json"), gen_experiment1(mix_seed(args.seed, i)))
            for i in range(args.count)
        ]
    elif kind == "exp2":
        paths = [
            (
                os.path.join(args.out, f"exp2_{i}.json"),
                gen_experiment2(mix_seed(args.seed, i), args.n, args.m_target),
            )
            for i in range(args.count)
        ]
    elif kind == "exp5":
        paths = [
            (os.path.join(args.out, f"exp5_{i}.json"), gen_experiment5(mix_seed(args.seed, i)))
            for i in range(args.count)
        ]
    else:  # tree-lb
        cbns, targets = gen_tree_lower_bound(args.branching, args.depth, args.M, args.T)
        paths = [(os.path.join(args.out, f"tree_c{i}.json"), c) for i, c in enumerate(cbns)]
        print(f"targets: {targets}")
    for path, cbn in paths:
        save_cbn(cbn, path)
        print(f"wrote {path}")
    _print_oracle_summary(paths[0][1])
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    cbn = load_cbn(args.instance)
    g = cbn.graph
    print(f"nodes: {g.n_nodes} ({len(g.hidden)} hidden), edges: {len(g.directed)}, "
          f"bidirected: {len(g.bidirected)}")
    print(f"topological order: {list(topological_order(g))}")
    h = latent_projection(g)
    print(f"c-components: {[sorted(c) for c in c_components(h)]}")
    for x in sorted(h.intervenable):
        _, _, pa_c, k = pa_plus_and_pa_c(h, x)
        print(f"  Pa_c({h.label(x)}) = {sorted(h.label(v) for v in pa_c)}  k={k}")
    ok, witness = check_identifiability(g)
    print(f"identifiable: {ok}" + ("" if ok else f"  witness path: {witness}"))
    if not ok:
        return EXIT_MODEL
    try:
        q, m = exact_q_and_m(cbn)
        print(f"m = {m}")
        print("q =", {h.label(i): round(v, 6) for i, v in sorted(q.items())})
        rewards = {str(a): round(exact_reward(cbn, a), 6) for a in arms_of(g)}
        print("exact rewards:", json.dumps(rewards, indent=1))
    except EnumerationInfeasible as exc:
        print(f"oracle: enumeration-infeasible ({exc})")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    cbn = load_cbn(args.instance)
    env = BanditEnv(cbn)
    plan = ExperimentPlan(
        experiment="custom",
        algorithms=(args.algo,),
        horizons=tuple(args.horizons),
        n_instances=1,
        runs=args.runs,
        base_seed=args.seed,
        instance_paths=(args.instance,),
    )
    if args.algo == "crm" and (env.has_hidden or env.visible_graph.bidirected):
        print(
            "error: the cumulative-regret algorithm requires a fully observable "
            "network (no hidden confounders)",
            file=sys.stderr,
        )
        return EXIT_MODEL
    report = execute(plan, jobs=args.jobs)
    paths = report.write(args.out, svg=args.svg)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


CANONICAL_PLANS = {
    "exp1": dict(n_instances=50, runs=100, horizons=(500, 1000, 1500, 2000, 2500),
                 algorithms=("srm", "ue", "sr")),
    "exp3": dict(n_instances=1, runs=30, horizons=(10000, 20000, 30000, 40000, 50000),
                 algorithms=("crm", "ucb1")),
    "exp5": dict(n_instances=50, runs=30, horizons=(2000, 4000, 6000, 8000, 10000),
                 algorithms=("crm", "ucb1")),
}


def cmd_experiment(args: argparse.Namespace) -> int:
    if args.id == "exp2":
        # regret-vs-m sweep at fixed horizon: one plan per m value
        m_values = list(range(10, 51, 2))
        all_rows = []
        for m in m_values:
            plan = ExperimentPlan(
                experiment="exp2",
                algorithms=("srm", "sr"),
                horizons=(1600,),
                n_instances=args.instances or 10,
                runs=args.runs or 20,
                base_seed=args.seed,
                params=(("n", args.N), ("m_target", m)),
            )
            rep = execute(plan, jobs=args.jobs)
            for r in rep.rows:
                r["experiment"] = f"exp2_m{m}"
                all_rows.append(r)
            last = rep
        last.rows = all_rows
        paths = last.write(args.out, svg=args.svg)
    else:
        if args.id not in CANONICAL_PLANS:
            print(f"error: unknown experiment id {args.id!r}", file=sys.stderr)
            return EXIT_USAGE
        spec = dict(CANONICAL_PLANS[args.id])
        if args.instances:
            spec["n_instances"] = args.instances
        if args.runs:
            spec["runs"] = args.runs
        if args.horizons:
            spec["horizons"] = tuple(args.horizons)
        plan = ExperimentPlan(experiment=args.id, base_seed=args.seed, **spec)
        report = execute(plan, jobs=args.jobs, with_bounds=args.bounds)
        paths = report.write(args.out, svg=args.svg)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def _horizon_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causal-bandits",
        description="Causal bandit algorithms: generation, inspection, runs, experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate instance files")
    p_gen.add_argument("family", choices=["exp1", "exp2", "exp3", "exp5", "tree-lb"])
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.add_argument("--out", default=".")
    p_gen.add_argument("--count", type=int, default=1)
    p_gen.add_argument("--n", type=int, default=100)
    p_gen.add_argument("--m-target", type=int, default=10)
    p_gen.add_argument("--branching", type=int, default=2)
    p_gen.add_argument("--depth", type=int, default=3)
    p_gen.add_argument("--M", type=int, default=5)
    p_gen.add_argument("--T", type=int, default=1000)
    p_gen.set_defaults(func=cmd_gen, needs_seed=lambda a: a.family not in ("exp3", "tree-lb"))

    p_ins = sub.add_parser("inspect", help="structural and oracle diagnostics")
    p_ins.add_argument("instance")
    p_ins.set_defaults(func=cmd_inspect, needs_seed=lambda a: False)

    p_run = sub.add_parser("run", help="run one algorithm on one instance")
    p_run.add_argument("instance")
    p_run.add_argument("--algo", required=True, choices=["srm", "crm", "ue", "sr", "ucb1"])
    p_run.add_argument("--horizons", type=_horizon_list, required=True,
                       help="comma-separated, strictly increasing")
    p_run.add_argument("--runs", type=int, default=1)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default="report")
    p_run.add_argument("--svg", action="store_true")
    p_run.add_argument("--jobs", type=int, default=None)
    p_run.set_defaults(func=cmd_run, needs_seed=lambda a: True)

    p_exp = sub.add_parser("experiment", help="full seeded reproduction plan")
    p_exp.add_argument("id", choices=["exp1", "exp2", "exp3", "exp5"])
    p_exp.add_argument("--seed", type=int, default=None)
    p_exp.add_argument("--out", default="experiment")
    p_exp.add_argument("--instances", type=int, default=0)
    p_exp.add_argument("--runs", type=int, default=0)
    p_exp.add_argument("--horizons", type=_horizon_list, default=None)
    p_exp.add_argument("--N", type=int, default=100)
    p_exp.add_argument("--svg", action="store_true")
    p_exp.add_argument("--bounds", action="store_true")
    p_exp.add_argument("--jobs", type=int, default=None)
    p_exp.set_defaults(func=cmd_experiment, needs_seed=lambda a: True)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.needs_seed(args) and getattr(args, "seed", None) is None:
        print("error: --seed is required (no wall-clock default)", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "jobs", None) is None:
        args.jobs = default_jobs()
    try:
        return args.func(args)
    except (StructuralError, InfeasibleTarget) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except EnumerationInfeasible as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
