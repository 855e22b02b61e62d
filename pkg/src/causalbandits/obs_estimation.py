"""Estimating interventional rewards from observational samples.

For each arm ``do(X = x)`` the pipeline
1. reduces the graph to the reward, ``X`` and its confounded parent set,
2. builds the surrogate network ``D`` in which everything outside ``X``'s
   c-component conditions on a clone of ``X`` frozen at ``x``,
3. fits each node's conditional from the observational samples with
   add-one smoothing,
4. reads off P(reward = 1) in ``D`` — exactly by enumeration when the
   reduced graph is small, otherwise by forward sampling.

Samples are passed as a ``(T, n_observable)`` uint8 array whose columns
follow the observable-id order of the sampled network, which coincides with
the node ids of its latent projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .admg import (
    Admg,
    NodeId,
    StructuralError,
    c_component_of,
    c_components,
    pa,
    reduce_graph,
    topological_order,
)
from .cbn import ENUMERATION_LIMIT, Arm, arms_of


def effective_parents(h: Admg, v: NodeId) -> tuple[NodeId, ...]:
    """Conditioning set of ``v`` in the c-component factorisation of ``h``.

    With the topological order fixed, this is ``v``'s c-component members up
    to and including ``v``, plus all their observable parents, minus ``v``.
    """
    order = topological_order(h)
    rank = {u: i for i, u in enumerate(order)}
    comp = c_component_of(h, v)
    upto = {u for u in comp if rank[u] <= rank[v]}
    z = set(upto)
    for u in upto:
        z |= pa(h, u)
    z.discard(v)
    return tuple(sorted(z, key=rank.__getitem__))


CLONE = -1  # placeholder id for the frozen copy of the arm node


@dataclass(frozen=True)
class SurrogateNetwork:
    """The learned network ``D`` for one arm, ready for evaluation.

    ``conditioning[v]`` lists the nodes whose values index ``tables[v]``
    (little-endian); an entry equal to :data:`CLONE` reads the frozen arm
    value instead of a sampled one.
    """

    h: Admg
    node_map: tuple[NodeId, ...]
    x: NodeId  # arm node, in h's ids
    value: int
    conditioning: tuple[tuple[NodeId, ...], ...]
    tables: tuple[tuple[float, ...], ...]


def build_conditioning(h: Admg, x: NodeId) -> tuple[tuple[NodeId, ...], ...]:
    """Per-node conditioning sets of ``D``: nodes outside ``x``'s c-component
    see the clone wherever their factor conditions on ``x``."""
    s1 = c_component_of(h, x)
    out = []
    for v in range(h.n_nodes):
        z = effective_parents(h, v)
        if v not in s1:
            z = tuple(CLONE if u == x else u for u in z)
        out.append(z)
    return tuple(out)


def learn_surrogate(
    h: Admg,
    node_map: tuple[NodeId, ...],
    x: NodeId,
    value: int,
    samples: np.ndarray,
    smoothing_threshold: int = 0,
) -> SurrogateNetwork:
    """Fit the conditionals of ``D`` from observational samples.

    Nodes in ``x``'s c-component always get add-one smoothed estimates;
    the remaining nodes fall back to 1/2 whenever a conditioning cell has
    at most ``smoothing_threshold`` samples.
    """
    s1 = c_component_of(h, x)
    conditioning = build_conditioning(h, x)
    cols = {v: samples[:, node_map[v]].astype(np.int64) for v in range(h.n_nodes)}
    x_col = cols[x]
    tables = []
    for v in range(h.n_nodes):
        z = conditioning[v]
        idx = np.zeros(len(samples), dtype=np.int64)
        for j, u in enumerate(z):
            src = x_col if u == CLONE else cols[u]
            idx |= src << j
        mask = np.ones(len(samples), dtype=bool)
        if v not in s1 and CLONE in z:
            mask = x_col == value
        k = len(z)
        n_cell = np.bincount(idx[mask], minlength=1 << k).astype(float)
        n_one = np.bincount(idx[mask & (cols[v] == 1)], minlength=1 << k).astype(float)
        table = (n_one + 1.0) / (n_cell + 2.0)
        if v not in s1:
            table = np.where(n_cell <= smoothing_threshold, 0.5, table)
        tables.append(tuple(float(p) for p in table))
    return SurrogateNetwork(
        h=h, node_map=node_map, x=x, value=value, conditioning=conditioning, tables=tuple(tables)
    )


def surrogate_reward_exact(d: SurrogateNetwork) -> float:
    """P(reward = 1) in ``D`` by full enumeration of the reduced nodes."""
    h = d.h
    k = h.n_nodes
    idx = np.arange(1 << k, dtype=np.int64)
    prob = np.ones(1 << k)
    for v in range(k):
        bit_v = (idx >> v) & 1
        z = d.conditioning[v]
        pidx = np.zeros(1 << k, dtype=np.int64)
        for j, u in enumerate(z):
            bit = np.full(1 << k, d.value, dtype=np.int64) if u == CLONE else (idx >> u) & 1
            pidx |= bit << j
        p1 = np.asarray(d.tables[v])[pidx]
        prob *= np.where(bit_v == 1, p1, 1.0 - p1)
    y = h.reward
    return float(prob[((idx >> y) & 1) == 1].sum())


def surrogate_reward_sampled(d: SurrogateNetwork, budget: int, rng: np.random.Generator) -> float:
    """P(reward = 1) in ``D`` by forward sampling ``budget`` draws."""
    h = d.h
    cols: dict[int, np.ndarray] = {}
    for v in topological_order(h):
        z = d.conditioning[v]
        pidx = np.zeros(budget, dtype=np.int64)
        for j, u in enumerate(z):
            bit = np.full(budget, d.value, dtype=np.int64) if u == CLONE else cols[u]
            pidx |= bit << j
        p1 = np.asarray(d.tables[v])[pidx]
        cols[v] = (rng.random(budget) < p1).astype(np.int64)
    return float(cols[h.reward].mean())


def estimate_arm_reward(
    g: Admg,
    x: NodeId,
    value: int,
    samples: np.ndarray,
    smoothing_threshold: int = 0,
    enumeration_limit: int = ENUMERATION_LIMIT,
    sample_budget: int = 100_000,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Estimated reward of ``do(x = value)`` from observational samples of
    the (hidden-free, projected) graph ``g``."""
    h, node_map = reduce_graph(g, x)
    x_new = node_map.index(x)
    d = learn_surrogate(h, node_map, x_new, value, samples, smoothing_threshold)
    if h.n_nodes <= enumeration_limit:
        return surrogate_reward_exact(d)
    if rng is None:
        rng = np.random.default_rng(0)
    return surrogate_reward_sampled(d, sample_budget, rng)


def estimate_all_rewards(
    g: Admg,
    samples: np.ndarray,
    rewards: np.ndarray,
    smoothing_threshold: int = 0,
    enumeration_limit: int = ENUMERATION_LIMIT,
    sample_budget: int = 100_000,
    rng: Optional[np.random.Generator] = None,
) -> dict[Arm, float]:
    """Estimated rewards for every arm: the observational arm by its
    empirical mean, each interventional arm through the surrogate network."""
    if g.hidden:
        raise StructuralError("estimate_all_rewards expects a projected graph")
    out: dict[Arm, float] = {Arm(None, 0): float(np.mean(rewards)) if len(rewards) else 0.5}
    for arm in arms_of(g)[1:]:
        out[arm] = estimate_arm_reward(
            g, arm.target, arm.value, samples,
            smoothing_threshold, enumeration_limit, sample_budget, rng,
        )
    return out
