"""Generators for the benchmark CBN families.

All generators are binary-node networks with the reward node last.  The
random families take an integer seed and are deterministic given it.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .admg import Admg, NodeId, StructuralError
from .cbn import Cbn, Cpt, exact_q_and_m


class InfeasibleTarget(ValueError):
    """The requested instance index m cannot be realised by this recipe."""


def _const(v: NodeId, parents: tuple[NodeId, ...], p: float) -> Cpt:
    return Cpt(owner=v, parent_order=parents, table=(p,), support=())


def _scale_free_parent_sets(
    rng: np.random.Generator, n: int, max_parents: int
) -> list[tuple[NodeId, ...]]:
    """For each node i, up to ``max_parents`` distinct parents uniform from 0..i-1."""
    out: list[tuple[NodeId, ...]] = []
    for i in range(n):
        k = min(max_parents, i)
        if k:
            ps = rng.choice(i, size=k, replace=False)
            out.append(tuple(sorted(int(p) for p in ps)))
        else:
            out.append(())
    return out


def gen_sparse_chain(
    seed: int,
    n: int = 100,
    m_target: int = 9,
    eps: float = 0.3,
    max_parents: int = 2,
    check_m: bool = False,
) -> Cbn:
    """Random n-variable instance with a planted rarely-active best arm.

    ``n - m_target`` head nodes are fair coins; the last ``m_target`` nodes
    fire with probability ``1 / (2 * m_target)``, which pins the instance
    index at ``m_target``.  The reward depends on one uniformly chosen tail
    node j: ``P(Y=1 | X_j=1) = 0.5 + eps`` and ``P(Y=1 | X_j=0)`` is set so
    the observational reward is exactly 0.5.  Every conditional is constant
    in its parents, so the wiring shapes the graph (and what the algorithms
    must estimate) without changing the marginals.
    """
    if not (0 < m_target < n):
        raise StructuralError("need 0 < m_target < n")
    rng = np.random.default_rng(seed)
    parent_sets = _scale_free_parent_sets(rng, n, max_parents)
    q = 1.0 / (2.0 * m_target)
    head = n - m_target
    j = int(rng.integers(head, n))
    eps_lo = q * eps / (1.0 - q)

    y = n
    directed = set()
    for i, ps in enumerate(parent_sets):
        for p in ps:
            directed.add((p, i))
        directed.add((i, y))
    g = Admg(
        n_nodes=n + 1,
        directed=frozenset(directed),
        intervenable=frozenset(range(n)),
        reward=y,
        labels=tuple(f"X{i + 1}" for i in range(n)) + ("Y",),
    )
    cpts = [
        _const(i, parent_sets[i], 0.5 if i < head else q) for i in range(n)
    ]
    cpts.append(
        Cpt(
            owner=y,
            parent_order=tuple(range(n)),
            table=(0.5 - eps_lo, 0.5 + eps),
            support=(j,),
        )
    )
    cbn = Cbn(graph=g, cpts=tuple(cpts))
    if check_m:
        _, m = exact_q_and_m(cbn)
        if m != m_target:
            raise InfeasibleTarget(f"recipe produced m={m}, wanted {m_target}")
    return cbn


def gen_experiment1(seed: int) -> Cbn:
    """The 100-variable family: m = 9, best-arm gap 0.3."""
    return gen_sparse_chain(seed, n=100, m_target=9, eps=0.3)


def gen_experiment2(seed: int, n: int, m_target: int) -> Cbn:
    """Like :func:`gen_experiment1` but with n variables and a chosen m.

    The recipe realises ``m_target`` exactly whenever ``m_target >= 8``
    (below that, fair-coin nodes with two parents fall inside the scan
    window); the result is verified against the exact oracle and an
    :class:`InfeasibleTarget` raised otherwise.
    """
    return gen_sparse_chain(seed, n=n, m_target=m_target, eps=0.3, check_m=True)


def gen_experiment3() -> Cbn:
    """Fixed 4-node network where observing beats every intervention.

    X2 and X3 both copy X1 with probability 0.75, and the reward is the
    agreement indicator Y = 1{X2 = X3}.  Observationally P(Y=1) = 5/8 while
    do(X2) or do(X3) breaks the correlation and yields 1/2.  Only X2 and X3
    are intervenable, so the observational arm is strictly best (forcing X1
    would leave the agreement probability at 5/8 and merely tie it).
    """
    x1, x2, x3, y = 0, 1, 2, 3
    g = Admg(
        n_nodes=4,
        directed=frozenset({(x1, x2), (x1, x3), (x2, y), (x3, y)}),
        intervenable=frozenset({x2, x3}),
        reward=y,
        labels=("X1", "X2", "X3", "Y"),
    )
    agree = Cpt(owner=y, parent_order=(x2, x3), table=(1.0, 0.0, 0.0, 1.0))
    cpts = (
        Cpt(owner=x1, parent_order=(), table=(0.5,)),
        Cpt(owner=x2, parent_order=(x1,), table=(0.25, 0.75)),
        Cpt(owner=x3, parent_order=(x1,), table=(0.25, 0.75)),
        agree,
    )
    return Cbn(graph=g, cpts=cpts)


def gen_experiment5(seed: int, n: int = 10, eps: float = 0.1) -> Cbn:
    """Small fair-coin family: every node is a fair coin with at most one
    parent, and one uniformly chosen node drives the reward with gap ``eps``."""
    rng = np.random.default_rng(seed)
    parent_sets = _scale_free_parent_sets(rng, n, 1)
    j = int(rng.integers(0, n))
    q = 0.5
    eps_lo = q * eps / (1.0 - q)
    y = n
    directed = set()
    for i, ps in enumerate(parent_sets):
        for p in ps:
            directed.add((p, i))
        directed.add((i, y))
    g = Admg(
        n_nodes=n + 1,
        directed=frozenset(directed),
        intervenable=frozenset(range(n)),
        reward=y,
        labels=tuple(f"X{i + 1}" for i in range(n)) + ("Y",),
    )
    cpts = [_const(i, parent_sets[i], 0.5) for i in range(n)]
    cpts.append(
        Cpt(
            owner=y,
            parent_order=tuple(range(n)),
            table=(0.5 - eps_lo, 0.5 + eps),
            support=(j,),
        )
    )
    return Cbn(graph=g, cpts=tuple(cpts))


def gen_tree_lower_bound(
    branching: int, depth: int, m: int, horizon: int
) -> tuple[list[Cbn], list[NodeId]]:
    """Hard tree family realising instance index ``m``.

    Builds a complete ``branching``-ary tree with ``depth`` levels of
    variables, all leaves feeding the reward.  Returns ``m + 1`` networks
    ``[C_0, C_1, ..., C_m]`` over the same graph together with the target
    node of each ``C_i``: under ``C_0`` every action has reward 1/2, while
    ``C_i`` hides a bonus ``eps`` behind ``do(target_i = 1)``.  Targets are
    the last ``m`` variables in topological order (leaf side first).
    """
    if branching < 2 or depth < 1:
        raise StructuralError("need branching >= 2 and depth >= 1")
    levels = [branching**l for l in range(depth)]
    n = sum(levels)
    if not (1 <= m <= n):
        raise StructuralError("need 1 <= m <= number of variables")
    parent: list[Optional[NodeId]] = [None] * n
    nxt = 1
    for v in range(n):
        if nxt >= n:
            break
        for _ in range(branching):
            if nxt >= n:
                break
            parent[nxt] = v
            nxt += 1
    leaves = [v for v in range(n) if v >= n - levels[-1]]
    y = n
    directed = set()
    for v in range(n):
        if parent[v] is not None:
            directed.add((parent[v], v))
    for leaf in leaves:
        directed.add((leaf, y))
    g = Admg(
        n_nodes=n + 1,
        directed=frozenset(directed),
        intervenable=frozenset(range(n)),
        reward=y,
        labels=tuple(f"X{n - v}" for v in range(n)) + ("Y",),
    )

    in_tm = set(range(n - m, n))
    h = depth + 1  # longest root-to-reward path, counted in nodes
    n_leaves = len(leaves)
    alpha = min(
        1.0 / (2.0 * h * n_leaves + 2.0 ** (h + 1)),
        1.0 / (2.0**h * n_leaves * m),
    )
    eps = min(0.25, math.sqrt(m / (18.0 * horizon)))

    def var_cpt(v: NodeId) -> Cpt:
        ps = () if parent[v] is None else (parent[v],)
        if v not in in_tm:
            return _const(v, ps, 0.5)
        if parent[v] is None or parent[v] not in in_tm:
            # Root of the in-window subforest: constant alpha marginal.
            return Cpt(owner=v, parent_order=ps, table=(alpha,), support=())
        return Cpt(owner=v, parent_order=ps, table=(alpha, 1.0 - alpha))

    var_cpts = tuple(var_cpt(v) for v in range(n))
    leaf_order = tuple(leaves)
    tm_leaves = tuple(l for l in leaves if l in in_tm)

    def reward_cpt(lit: Optional[frozenset[NodeId]]) -> Cpt:
        # lit: leaves that must be 1 (all other in-window leaves must be 0)
        if lit is None:
            return Cpt(owner=y, parent_order=leaf_order, table=(0.5,), support=())
        table = []
        for mask in range(1 << len(tm_leaves)):
            on = {tm_leaves[j] for j in range(len(tm_leaves)) if (mask >> j) & 1}
            table.append(0.5 + eps if on == set(lit) else 0.5)
        return Cpt(owner=y, parent_order=leaf_order, table=tuple(table), support=tm_leaves)

    def leaves_under(v: NodeId) -> frozenset[NodeId]:
        out, stack = set(), [v]
        kids = {u: [] for u in range(n)}
        for u in range(1, n):
            kids[parent[u]].append(u)
        while stack:
            u = stack.pop()
            if u in leaves:
                out.add(u)
            stack.extend(kids[u])
        return frozenset(out)

    targets = [n - 1 - i for i in range(m)]
    cbns = [Cbn(graph=g, cpts=var_cpts + (reward_cpt(None),))]
    for t in targets:
        cbns.append(Cbn(graph=g, cpts=var_cpts + (reward_cpt(leaves_under(t)),)))
    return cbns, targets
