"""Causal Bayesian networks over binary variables.

A CBN pairs an :class:`~causalbandits.admg.Admg` with one conditional
probability table per node.  Tables are indexed by a little-endian bitmask
over the node's parents: bit ``j`` carries the value of ``parent_order[j]``.
A table may declare a ``support`` — the subset of parents it actually
depends on — which keeps ground-truth instances with structurally dense but
functionally sparse reward nodes representable.

Exact inference enumerates assignments of the ancestral closure of the
queried nodes, where ancestry follows the *support* parents.  Queries whose
closure exceeds the enumeration limit raise :class:`EnumerationInfeasible`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .admg import (
    Admg,
    NodeId,
    StructuralError,
    latent_projection,
    parents_all,
    pa_plus_and_pa_c,
    topological_order,
)

ENUMERATION_LIMIT = 22


class EnumerationInfeasible(RuntimeError):
    """An exact query would require enumerating too many assignments."""


class PositivityViolation(RuntimeError):
    """An observational conditioning event has probability zero."""


@dataclass(frozen=True)
class Cpt:
    """P(owner = 1 | parents), as a table over the support bitmask."""

    owner: NodeId
    parent_order: tuple[NodeId, ...]
    table: tuple[float, ...]
    support: Optional[tuple[NodeId, ...]] = None

    def __post_init__(self) -> None:
        eff = self.effective_parents
        if len(self.table) != 1 << len(eff):
            raise StructuralError(
                f"cpt for node {self.owner}: table length {len(self.table)} != 2**{len(eff)}"
            )
        if self.support is not None and not set(self.support) <= set(self.parent_order):
            raise StructuralError(f"cpt for node {self.owner}: support not within parents")
        for p in self.table:
            if not (0.0 <= p <= 1.0):
                raise StructuralError(f"cpt for node {self.owner}: entry {p} outside [0, 1]")

    @property
    def effective_parents(self) -> tuple[NodeId, ...]:
        return self.parent_order if self.support is None else self.support

    def p1(self, values: Mapping[NodeId, int]) -> float:
        idx = 0
        for j, p in enumerate(self.effective_parents):
            idx |= (values[p] & 1) << j
        return self.table[idx]


@dataclass(frozen=True)
class Arm:
    """An intervention ``do(target = value)``; ``target is None`` observes."""

    target: Optional[NodeId]
    value: int = 0

    @property
    def is_observational(self) -> bool:
        return self.target is None


OBSERVE = Arm(None, 0)


@dataclass(frozen=True)
class ObsRecord:
    """One sample: values of the observable nodes (in id order) and reward."""

    values: tuple[int, ...]
    reward: int


@dataclass(frozen=True)
class Cbn:
    graph: Admg
    cpts: tuple[Cpt, ...]

    def __post_init__(self) -> None:
        g = self.graph
        if len(self.cpts) != g.n_nodes:
            raise StructuralError("need exactly one cpt per node")
        for v, cpt in enumerate(self.cpts):
            if cpt.owner != v:
                raise StructuralError(f"cpt at slot {v} owned by {cpt.owner}")
            if cpt.parent_order != parents_all(g, v):
                raise StructuralError(f"cpt for node {v} does not match its graph parents")

    @property
    def observables(self) -> tuple[NodeId, ...]:
        return self.graph.observables


def arms_of(g: Admg) -> tuple[Arm, ...]:
    """The action set: observe first, then ``do(x = 0), do(x = 1)`` by node id."""
    out = [OBSERVE]
    for x in sorted(g.intervenable):
        out.append(Arm(x, 0))
        out.append(Arm(x, 1))
    return tuple(out)


@lru_cache(maxsize=None)
def _sampling_plan(cbn: Cbn) -> tuple[tuple[tuple[NodeId, tuple[NodeId, ...], np.ndarray], ...], dict]:
    """Per-node (node, effective parents, table array) in topological order."""
    plan = []
    for v in topological_order(cbn.graph):
        cpt = cbn.cpts[v]
        plan.append((v, cpt.effective_parents, np.asarray(cpt.table)))
    obs_pos = {v: i for i, v in enumerate(cbn.observables)}
    return tuple(plan), obs_pos


def sample_batch(cbn: Cbn, arm: Arm, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` ancestral samples under ``arm``.

    Returns ``(values, rewards)`` where ``values`` is a ``(n, n_observable)``
    uint8 array with columns in observable-id order.
    """
    plan, obs_pos = _sampling_plan(cbn)
    cols: dict[NodeId, np.ndarray] = {}
    for v, eff, table in plan:
        if arm.target == v:
            cols[v] = np.full(n, arm.value, dtype=np.uint8)
            continue
        if eff:
            idx = np.zeros(n, dtype=np.int64)
            for j, p in enumerate(eff):
                idx |= cols[p].astype(np.int64) << j
            p1 = table[idx]
        else:
            p1 = table[0]
        cols[v] = (rng.random(n) < p1).astype(np.uint8)
    values = np.empty((n, len(obs_pos)), dtype=np.uint8)
    for v, i in obs_pos.items():
        values[:, i] = cols[v]
    return values, values[:, obs_pos[cbn.graph.reward]].copy()


def sample(cbn: Cbn, arm: Arm, rng: np.random.Generator) -> ObsRecord:
    """Draw a single ancestral sample under ``arm``."""
    values, rewards = sample_batch(cbn, arm, 1, rng)
    return ObsRecord(tuple(int(b) for b in values[0]), int(rewards[0]))


def _closure(cbn: Cbn, targets: Iterable[NodeId], do_target: Optional[NodeId]) -> tuple[NodeId, ...]:
    """Support-ancestral closure of ``targets`` in the (mutilated) network."""
    seen: set[NodeId] = set()
    stack = list(targets)
    while stack:
        v = stack.pop()
        if v in seen:
            continue
        seen.add(v)
        if v == do_target:
            continue
        stack.extend(cbn.cpts[v].effective_parents)
    return tuple(sorted(seen))


def joint_table(
    cbn: Cbn,
    nodes: Sequence[NodeId],
    arm: Arm = OBSERVE,
    limit: int = ENUMERATION_LIMIT,
) -> np.ndarray:
    """Exact joint distribution of ``nodes`` under ``arm``.

    Returns an array of length ``2 ** len(nodes)`` indexed by the
    little-endian bitmask over ``nodes``.
    """
    closure = _closure(cbn, nodes, arm.target)
    k = len(closure)
    if k > limit:
        raise EnumerationInfeasible(
            f"query closure has {k} nodes, above the enumeration limit {limit}"
        )
    pos = {v: j for j, v in enumerate(closure)}
    idx = np.arange(1 << k, dtype=np.int64)
    prob = np.ones(1 << k)
    for v in closure:
        bit_v = (idx >> pos[v]) & 1
        if v == arm.target:
            prob *= bit_v == arm.value
            continue
        cpt = cbn.cpts[v]
        eff = cpt.effective_parents
        if eff:
            pidx = np.zeros(1 << k, dtype=np.int64)
            for j, p in enumerate(eff):
                pidx |= ((idx >> pos[p]) & 1) << j
            p1 = np.asarray(cpt.table)[pidx]
        else:
            p1 = cpt.table[0]
        prob *= np.where(bit_v == 1, p1, 1.0 - p1)
    out = np.zeros(1 << len(nodes))
    key = np.zeros(1 << k, dtype=np.int64)
    for j, v in enumerate(nodes):
        key |= ((idx >> pos[v]) & 1) << j
    np.add.at(out, key, prob)
    return out


def exact_reward(cbn: Cbn, arm: Arm, limit: int = ENUMERATION_LIMIT) -> float:
    """Exact P(reward = 1) under ``arm``."""
    table = joint_table(cbn, (cbn.graph.reward,), arm, limit)
    return float(table[1])


def exact_q_and_m(cbn: Cbn, limit: int = ENUMERATION_LIMIT) -> tuple[dict[NodeId, float], int]:
    """Exact per-node observation hardness ``q`` and the instance index ``m``.

    ``q[x]`` is the smallest joint probability of any assignment to ``x``
    together with its confounded parent set; ``m`` is the smallest
    ``tau in [2, 2N]`` such that at most ``tau`` nodes have
    ``q ** k < 1 / tau``, with fallback ``2N``.  Node ids refer to the
    latent projection of the graph (the identity when nothing is hidden).
    """
    h = latent_projection(cbn.graph)
    obs = cbn.observables
    q: dict[NodeId, float] = {}
    kk: dict[NodeId, int] = {}
    for x in sorted(h.intervenable):
        _, _, pa_c, k = pa_plus_and_pa_c(h, x)
        nodes = [obs[x]] + [obs[z] for z in sorted(pa_c)]
        table = joint_table(cbn, nodes, OBSERVE, limit)
        q[x] = float(table.min())
        kk[x] = k
    n_arms_nodes = len(h.intervenable)
    m = 2 * n_arms_nodes
    for tau in range(2, 2 * n_arms_nodes + 1):
        count = sum(1 for x in q if q[x] ** kk[x] < 1.0 / tau)
        if count <= tau:
            m = tau
            break
    return q, m


def backdoor_reward(cbn: Cbn, x: NodeId, value: int, limit: int = ENUMERATION_LIMIT) -> float:
    """Adjustment-formula reward: sum_z P(Y=1 | X=v, Pa=z) P(Pa=z).

    Requires a fully observable network and positivity of every
    ``(X = v, Pa = z)`` cell.
    """
    if cbn.graph.hidden or cbn.graph.bidirected:
        raise StructuralError("backdoor adjustment needs a fully observable network")
    pa_x = sorted(parents_all(cbn.graph, x))
    nodes = [cbn.graph.reward, x] + pa_x
    table = joint_table(cbn, nodes, OBSERVE, limit)
    total = 0.0
    for z in range(1 << len(pa_x)):
        base = (z << 2) | (value << 1)
        p_xz = table[base] + table[base | 1]
        p_z = sum(
            table[(z << 2) | (xv << 1) | yv] for xv in (0, 1) for yv in (0, 1)
        )
        if p_xz <= 0.0:
            raise PositivityViolation(
                f"P(X{x}={value}, parents={z:b}) = 0; adjustment undefined"
            )
        total += table[base | 1] / p_xz * p_z
    return float(total)


# --- serialisation ---------------------------------------------------------


def cbn_to_dict(cbn: Cbn) -> dict:
    g = cbn.graph
    return {
        "nodes": [
            {
                "index": v,
                "label": g.label(v),
                "hidden": v in g.hidden,
                "intervenable": v in g.intervenable,
                "reward": v == g.reward,
            }
            for v in range(g.n_nodes)
        ],
        "edges": sorted([u, v] for u, v in g.directed),
        "bidirected": sorted([u, v] for u, v in g.bidirected),
        "cpts": [
            {
                "node": c.owner,
                "parent_order": list(c.parent_order),
                **({"support": list(c.support)} if c.support is not None else {}),
                "table": list(c.table),
            }
            for c in cbn.cpts
        ],
    }


def cbn_from_dict(data: dict) -> Cbn:
    nodes = sorted(data["nodes"], key=lambda d: d["index"])
    n = len(nodes)
    if [d["index"] for d in nodes] != list(range(n)):
        raise StructuralError("node indices must be dense 0..n-1")
    rewards = [d["index"] for d in nodes if d.get("reward")]
    if len(rewards) != 1:
        raise StructuralError("exactly one reward node required")
    g = Admg(
        n_nodes=n,
        directed=frozenset((u, v) for u, v in data.get("edges", [])),
        bidirected=frozenset((min(u, v), max(u, v)) for u, v in data.get("bidirected", [])),
        intervenable=frozenset(d["index"] for d in nodes if d.get("intervenable")),
        reward=rewards[0],
        hidden=frozenset(d["index"] for d in nodes if d.get("hidden")),
        labels=tuple(d.get("label", f"V{d['index']}") for d in nodes),
    )
    cpt_by_node = {c["node"]: c for c in data["cpts"]}
    cpts = []
    for v in range(n):
        if v not in cpt_by_node:
            raise StructuralError(f"missing cpt for node {v}")
        c = cpt_by_node[v]
        cpts.append(
            Cpt(
                owner=v,
                parent_order=tuple(c["parent_order"]),
                table=tuple(float(p) for p in c["table"]),
                support=tuple(c["support"]) if "support" in c else None,
            )
        )
    return Cbn(graph=g, cpts=tuple(cpts))


def save_cbn(cbn: Cbn, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(cbn_to_dict(cbn), fh, indent=1)
        fh.write("\n")


def load_cbn(path: str) -> Cbn:
    with open(path) as fh:
        return cbn_from_dict(json.load(fh))
