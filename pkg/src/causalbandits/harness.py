"""Seeded experiment orchestration.

A plan names an instance family, counts, horizons and algorithms; execution
derives one 64-bit seed per (instance, run, algorithm, horizon) cell with a
splitmix64 chain, runs every cell, scores it against the exact oracle, and
aggregates into a byte-stable CSV report with a JSON sidecar.

Simple-regret algorithms (srm, ue, sr) are run once per horizon.  The
cumulative-regret algorithms (crm, ucb1) are anytime, so each run executes
at the largest horizon and the cumulative regret is read off at every
checkpoint; their seed is derived with that largest horizon.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional, Sequence

import numpy as np

from .admg import NodeId
from .bandits import (
    BanditEnv,
    run_crm,
    run_srm,
    run_successive_rejects,
    run_ucb1,
    run_uniform_exploration,
    srm_bound,
    crm_bound,
)
from .cbn import (
    Arm,
    Cbn,
    EnumerationInfeasible,
    exact_q_and_m,
    exact_reward,
    load_cbn,
    sample_batch,
)
from .instances import (
    gen_experiment1,
    gen_experiment2,
    gen_experiment3,
    gen_experiment5,
    gen_tree_lower_bound,
)

SIMPLE_REGRET_ALGOS = ("srm", "ue", "sr")
CUMULATIVE_ALGOS = ("crm", "ucb1")
ALGORITHMS = SIMPLE_REGRET_ALGOS + CUMULATIVE_ALGOS

MC_ORACLE_SAMPLES = 1_000_000


def splitmix64(x: int) -> int:
    """One splitmix64 step; the fixed seed-mixing primitive."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def mix_seed(base: int, *parts: int) -> int:
    """Chain splitmix64 over the base seed and the cell coordinates."""
    h = splitmix64(base & 0xFFFFFFFFFFFFFFFF)
    for p in parts:
        h = splitmix64(h ^ (p & 0xFFFFFFFFFFFFFFFF))
    return h


@dataclass(frozen=True)
class ExperimentPlan:
    experiment: str  # exp1 | exp2 | exp3 | exp5 | tree_lb | custom
    algorithms: tuple[str, ...]
    horizons: tuple[int, ...]
    n_instances: int
    runs: int
    base_seed: int
    params: tuple[tuple[str, int], ...] = ()
    instance_paths: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if list(self.horizons) != sorted(set(self.horizons)):
            raise ValueError("horizons must be strictly increasing")
        if self.n_instances <= 0 or self.runs <= 0 or not self.horizons:
            raise ValueError("counts must be positive")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")
        if self.experiment == "custom" and len(self.instance_paths) != self.n_instances:
            raise ValueError("custom plans need one instance path per instance")

    def param(self, name: str, default: Optional[int] = None) -> Optional[int]:
        for k, v in self.params:
            if k == name:
                return v
        return default


def build_instance(plan: ExperimentPlan, idx: int) -> Cbn:
    """Materialise instance ``idx`` of the plan (deterministic in the seed)."""
    seed = mix_seed(plan.base_seed, 0xA5, idx)
    if plan.experiment == "exp1":
        return gen_experiment1(seed)
    if plan.experiment == "exp2":
        return gen_experiment2(seed, plan.param("n", 100), plan.param("m_target", 10))
    if plan.experiment == "exp3":
        return gen_experiment3()
    if plan.experiment == "exp5":
        return gen_experiment5(seed)
    if plan.experiment == "tree_lb":
        cbns, _ = gen_tree_lower_bound(
            plan.param("branching", 2),
            plan.param("depth", 3),
            plan.param("m", 5),
            max(plan.horizons),
        )
        return cbns[idx % len(cbns)]
    if plan.experiment == "custom":
        return load_cbn(plan.instance_paths[idx])
    raise ValueError(f"unknown experiment {plan.experiment!r}")


def arm_means(cbn: Cbn, env: BanditEnv, mc_fallback: bool = True) -> tuple[np.ndarray, str]:
    """True reward of every arm, exact when feasible.

    Falls back to a flagged large-sample Monte-Carlo estimate when the
    enumeration closure is too large and ``mc_fallback`` is set.
    """
    means = np.empty(len(env.arms))
    kind = "exact"
    obs = cbn.observables
    for k, a in enumerate(env.arms):
        orig = a if a.is_observational else Arm(obs[a.target], a.value)
        try:
            means[k] = exact_reward(cbn, orig)
        except EnumerationInfeasible:
            if not mc_fallback:
                raise
            rng = np.random.default_rng(mix_seed(0xFACADE, k))
            _, r = sample_batch(cbn, orig, MC_ORACLE_SAMPLES, rng)
            means[k] = float(r.mean())
            kind = "mc"
    return means, kind


_ALGO_IDS = {name: i for i, name in enumerate(ALGORITHMS)}


def run_cell(
    cbn: Cbn, algo: str, horizons: Sequence[int], instance_idx: int, run_idx: int,
    base_seed: int, means: np.ndarray,
) -> list[float]:
    """One (instance, run, algorithm): regret at each horizon."""
    env = BanditEnv(cbn)
    if algo in CUMULATIVE_ALGOS:
        t_max = max(horizons)
        rng = np.random.default_rng(
            mix_seed(base_seed, instance_idx, run_idx, _ALGO_IDS[algo], t_max)
        )
        if algo == "crm":
            trace, _ = run_crm(env, t_max, rng)
        else:
            trace = run_ucb1(env, t_max, rng)
        series = trace.cumulative_regret(means)
        return [float(series[t - 1]) for t in horizons]
    out = []
    for t in horizons:
        rng = np.random.default_rng(
            mix_seed(base_seed, instance_idx, run_idx, _ALGO_IDS[algo], t)
        )
        if algo == "srm":
            trace = run_srm(env, t, rng).trace
        elif algo == "ue":
            trace = run_uniform_exploration(env, t, rng)
        else:
            trace = run_successive_rejects(env, t, rng)
        out.append(trace.simple_regret(means))
    return out


@dataclass
class RegretReport:
    plan: ExperimentPlan
    rows: list[dict] = field(default_factory=list)
    instances: list[dict] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["experiment,algorithm,instance,horizon,runs,mean_regret,stderr"]
        for r in self.rows:
            lines.append(
                f"{r['experiment']},{r['algorithm']},{r['instance']},{r['horizon']},"
                f"{r['runs']},{r['mean_regret']!r},{r['stderr']!r}"
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {"plan": asdict(self.plan), "instances": self.instances, "rows": self.rows},
            indent=1,
            sort_keys=True,
        )

    def write(self, prefix: str, svg: bool = False) -> list[str]:
        paths = [prefix + ".csv", prefix + ".json"]
        with open(paths[0], "w") as fh:
            fh.write(self.to_csv())
        with open(paths[1], "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")
        if svg:
            paths.append(prefix + ".svg")
            with open(paths[2], "w") as fh:
                fh.write(render_svg(self))
        return paths


def _cell_task(args: tuple) -> tuple[tuple[int, str], list[list[float]]]:
    plan, instance_idx, algo = args
    cbn = build_instance(plan, instance_idx)
    env = BanditEnv(cbn)
    means, _ = arm_means(cbn, env)
    per_run = [
        run_cell(cbn, algo, plan.horizons, instance_idx, r, plan.base_seed, means)
        for r in range(plan.runs)
    ]
    return (instance_idx, algo), per_run


def execute(plan: ExperimentPlan, jobs: int = 1, with_bounds: bool = False) -> RegretReport:
    """Run the whole plan and aggregate."""
    report = RegretReport(plan=plan)
    for idx in range(plan.n_instances):
        cbn = build_instance(plan, idx)
        env = BanditEnv(cbn)
        means, oracle = arm_means(cbn, env)
        info = {
            "instance": idx,
            "oracle": oracle,
            "arm_means": [float(x) for x in means],
            "seed": mix_seed(plan.base_seed, 0xA5, idx),
        }
        try:
            q, m = exact_q_and_m(cbn)
            info["m"] = m
            info["q"] = {str(k): float(v) for k, v in sorted(q.items())}
        except EnumerationInfeasible:
            info["m"] = None
        report.instances.append(info)

    tasks = [(plan, idx, algo) for idx in range(plan.n_instances) for algo in plan.algorithms]
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(_cell_task, tasks))
    else:
        results = dict(_cell_task(t) for t in tasks)

    for algo in plan.algorithms:
        for idx in range(plan.n_instances):
            per_run = np.asarray(results[(idx, algo)])  # (runs, horizons)
            for j, t in enumerate(plan.horizons):
                vals = per_run[:, j]
                stderr = (
                    float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
                )
                report.rows.append(
                    {
                        "experiment": plan.experiment,
                        "algorithm": algo,
                        "instance": idx,
                        "horizon": t,
                        "runs": len(vals),
                        "mean_regret": float(vals.mean()),
                        "stderr": stderr,
                    }
                )
    if with_bounds:
        overlay_bounds(report)
    return report


def overlay_bounds(report: RegretReport) -> RegretReport:
    """Append the published bound curves (shape only) as extra series."""
    plan = report.plan
    for info in report.instances:
        idx = info["instance"]
        means = np.asarray(info["arm_means"])
        if "srm" in plan.algorithms and info.get("m"):
            n = (len(means) - 1) // 2
            for t in plan.horizons:
                report.rows.append(
                    {
                        "experiment": plan.experiment,
                        "algorithm": "bound_srm",
                        "instance": idx,
                        "horizon": t,
                        "runs": 0,
                        "mean_regret": srm_bound(info["m"], n, t),
                        "stderr": 0.0,
                    }
                )
        if "crm" in plan.algorithms and info.get("q") is not None:
            cbn = build_instance(plan, idx)
            env = BanditEnv(cbn)
            delta_0 = float(means.max() - means[0])
            stats = _crm_stats(cbn, env)
            deltas = [float(means.max() - means[k]) for k in range(1, len(means))]
            for t in plan.horizons:
                report.rows.append(
                    {
                        "experiment": plan.experiment,
                        "algorithm": "bound_crm",
                        "instance": idx,
                        "horizon": t,
                        "runs": 0,
                        "mean_regret": crm_bound(t, delta_0, deltas, stats[0], stats[1]),
                        "stderr": 0.0,
                    }
                )
    return report


def _crm_stats(cbn: Cbn, env: BanditEnv) -> tuple[list[float], list[int]]:
    """Per interventional arm: min_z P(X=x, Pa=z) and parent-domain size."""
    from .admg import pa
    from .cbn import joint_table

    g = env.visible_graph
    p_min: list[float] = []
    n_z: list[int] = []
    for a in env.arms[1:]:
        i = a.target
        cols = [i] + sorted(pa(g, i))
        table = joint_table(cbn, [cbn.observables[c] for c in cols])
        cells = [table[z] for z in range(len(table)) if (z & 1) == a.value]
        p_min.append(float(min(cells)))
        n_z.append(1 << (len(cols) - 1))
    return p_min, n_z


def render_svg(report: RegretReport) -> str:
    """Minimal deterministic line chart: mean regret vs horizon per algorithm."""
    width, height, pad = 640, 420, 50
    series: dict[str, list[tuple[float, float]]] = {}
    for r in report.rows:
        series.setdefault(r["algorithm"], []).append((r["horizon"], r["mean_regret"]))
    agg: dict[str, list[tuple[float, float]]] = {}
    for name, pts in series.items():
        by_t: dict[float, list[float]] = {}
        for t, v in pts:
            by_t.setdefault(t, []).append(v)
        agg[name] = sorted((t, sum(v) / len(v)) for t, v in by_t.items())
    xs = [t for pts in agg.values() for t, _ in pts]
    ys = [v for pts in agg.values() for _, v in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(0.0, min(ys)), max(ys) or 1.0
    if x_hi == x_lo:
        x_hi = x_lo + 1
    if y_hi == y_lo:
        y_hi = y_lo + 1

    def sx(x: float) -> float:
        return pad + (x - x_lo) / (x_hi - x_lo) * (width - 2 * pad)

    def sy(y: float) -> float:
        return height - pad - (y - y_lo) / (y_hi - y_lo) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#7f7f7f"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 10}" font-size="12" text-anchor="middle">horizon</text>',
        f'<text x="14" y="{height // 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {height // 2})">mean regret</text>',
    ]
    for k, (name, pts) in enumerate(sorted(agg.items())):
        color = colors[k % len(colors)]
        coords = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in pts)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        parts.append(
            f'<text x="{width - pad + 4}" y="{pad + 14 * k + 10}" font-size="11" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
