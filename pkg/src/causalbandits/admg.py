"""Acyclic directed mixed graphs (ADMGs) and the structural operations used
by the bandit algorithms.

A graph holds directed edges, bidirected edges (standing for unobserved
confounding between two observable nodes), an intervenable set, a reward
node, and an optional set of explicit hidden nodes.  Hidden nodes are only
permitted in the restricted form that the rest of the library can handle:
parentless, with at most two observable children, so that each one projects
onto at most a single bidirected edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
import heapq
from typing import Iterable, Optional

NodeId = int


class StructuralError(ValueError):
    """A graph (or a request against it) violates a structural precondition."""


class SemiMarkovViolation(StructuralError):
    """A hidden node is not a parentless confounder of at most two observables."""


def _norm_pair(a: NodeId, b: NodeId) -> tuple[NodeId, NodeId]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Admg:
    """An acyclic directed mixed graph over nodes ``0 .. n_nodes - 1``.

    ``directed`` holds ``(parent, child)`` pairs, ``bidirected`` holds
    unordered pairs normalised so the smaller id comes first.
    """

    n_nodes: int
    directed: frozenset[tuple[NodeId, NodeId]]
    bidirected: frozenset[tuple[NodeId, NodeId]] = frozenset()
    intervenable: frozenset[NodeId] = frozenset()
    reward: NodeId = 0
    hidden: frozenset[NodeId] = frozenset()
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        n = self.n_nodes
        if n <= 0:
            raise StructuralError("graph needs at least one node")
        for u, v in self.directed:
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise StructuralError(f"bad directed edge ({u}, {v})")
        for u, v in self.bidirected:
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise StructuralError(f"bad bidirected edge ({u}, {v})")
            if (u, v) != _norm_pair(u, v):
                raise StructuralError("bidirected pairs must be normalised (u < v)")
        if not (0 <= self.reward < n):
            raise StructuralError("reward node out of range")
        if self.reward in self.hidden:
            raise StructuralError("reward node cannot be hidden")
        if self.reward in self.intervenable:
            raise StructuralError("reward node cannot be intervenable")
        if self.intervenable & self.hidden:
            raise StructuralError("hidden nodes cannot be intervenable")
        for v in self.hidden:
            if not (0 <= v < n):
                raise StructuralError("hidden node out of range")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"V{v}" for v in range(n)))
        if len(self.labels) != n:
            raise StructuralError("labels must cover every node")
        # Acyclicity: topological_order raises on a cycle.
        topological_order(self)

    def label(self, v: NodeId) -> str:
        return self.labels[v]

    @property
    def observables(self) -> tuple[NodeId, ...]:
        return tuple(v for v in range(self.n_nodes) if v not in self.hidden)


@lru_cache(maxsize=None)
def _children_map(g: Admg) -> tuple[tuple[NodeId, ...], ...]:
    out: list[list[NodeId]] = [[] for _ in range(g.n_nodes)]
    for u, v in g.directed:
        out[u].append(v)
    return tuple(tuple(sorted(c)) for c in out)


@lru_cache(maxsize=None)
def _parent_map(g: Admg) -> tuple[tuple[NodeId, ...], ...]:
    out: list[list[NodeId]] = [[] for _ in range(g.n_nodes)]
    for u, v in g.directed:
        out[v].append(u)
    return tuple(tuple(sorted(p)) for p in out)


def parents_all(g: Admg, v: NodeId) -> tuple[NodeId, ...]:
    """Directed parents of ``v`` including hidden ones, ascending."""
    return _parent_map(g)[v]


def children(g: Admg, v: NodeId) -> tuple[NodeId, ...]:
    return _children_map(g)[v]


def pa(g: Admg, v: NodeId) -> frozenset[NodeId]:
    """Observable directed parents of ``v``."""
    return frozenset(p for p in _parent_map(g)[v] if p not in g.hidden)


@lru_cache(maxsize=None)
def topological_order(g: Admg) -> tuple[NodeId, ...]:
    """Topological order of the directed part, lowest-id-first among ties."""
    indeg = [0] * g.n_nodes
    for _, v in g.directed:
        indeg[v] += 1
    heap = [v for v in range(g.n_nodes) if indeg[v] == 0]
    heapq.heapify(heap)
    order: list[NodeId] = []
    kids = _children_map(g)
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for c in kids[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    if len(order) != g.n_nodes:
        raise StructuralError("directed part of the graph has a cycle")
    return tuple(order)


@lru_cache(maxsize=None)
def c_components(g: Admg) -> tuple[frozenset[NodeId], ...]:
    """Partition of the nodes into bidirected-connected components.

    Requires a graph without hidden nodes (project first).  Components are
    returned sorted by their smallest member.
    """
    if g.hidden:
        raise StructuralError("c_components expects a graph without hidden nodes")
    parent = list(range(g.n_nodes))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in g.bidirected:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)
    groups: dict[int, set[NodeId]] = {}
    for v in range(g.n_nodes):
        groups.setdefault(find(v), set()).add(v)
    return tuple(frozenset(groups[r]) for r in sorted(groups))


def c_component_of(g: Admg, v: NodeId) -> frozenset[NodeId]:
    for comp in c_components(g):
        if v in comp:
            return comp
    raise StructuralError(f"node {v} not in graph")


def pa_plus_and_pa_c(g: Admg, x: NodeId) -> tuple[frozenset[NodeId], frozenset[NodeId], frozenset[NodeId], int]:
    """Return ``(S, Pa_plus, Pa_c, k)`` for intervenable node ``x``.

    ``S`` is the c-component of ``x``, ``Pa_plus`` adds the parents of every
    member, ``Pa_c`` removes ``x`` itself, and ``k = |S|``.
    """
    if x not in g.intervenable:
        raise StructuralError(f"node {x} is not intervenable")
    s = c_component_of(g, x)
    pa_plus = frozenset(s) | frozenset(p for v in s for p in pa(g, v))
    return s, pa_plus, pa_plus - {x}, len(s)


def latent_projection(g: Admg) -> Admg:
    """Project hidden nodes away, replacing each by a bidirected edge.

    Every hidden node must be parentless with at most two children, all
    observable; otherwise a :class:`SemiMarkovViolation` is raised.
    Observable nodes are reindexed densely in their original order (which is
    the identity when there are no hidden nodes).
    """
    if not g.hidden:
        return g
    kids = _children_map(g)
    pars = _parent_map(g)
    for h in sorted(g.hidden):
        if pars[h]:
            raise SemiMarkovViolation(f"hidden node {h} has parents")
        ch = kids[h]
        if len(ch) > 2:
            raise SemiMarkovViolation(f"hidden node {h} has more than two children")
        if any(c in g.hidden for c in ch):
            raise SemiMarkovViolation(f"hidden node {h} has a hidden child")
        if any(h in (u, v) for u, v in g.bidirected):
            raise SemiMarkovViolation(f"hidden node {h} touches a bidirected edge")
    obs = g.observables
    new_id = {v: i for i, v in enumerate(obs)}
    directed = frozenset(
        (new_id[u], new_id[v]) for u, v in g.directed if u not in g.hidden and v not in g.hidden
    )
    bidirected = set(_norm_pair(new_id[u], new_id[v]) for u, v in g.bidirected)
    for h in g.hidden:
        ch = kids[h]
        if len(ch) == 2:
            bidirected.add(_norm_pair(new_id[ch[0]], new_id[ch[1]]))
    labels = tuple(g.labels[v] for v in obs) if g.labels else ()
    return Admg(
        n_nodes=len(obs),
        directed=directed,
        bidirected=frozenset(bidirected),
        intervenable=frozenset(new_id[v] for v in g.intervenable),
        reward=new_id[g.reward],
        labels=labels,
    )


def check_identifiability(g: Admg) -> tuple[bool, Optional[tuple[NodeId, ...]]]:
    """Check whether every interventional reward is identifiable.

    The condition: no intervenable node may be connected through bidirected
    edges to one of its own directed children.  Returns ``(True, None)`` or
    ``(False, witness)`` where the witness is the offending bidirected path
    from an intervenable node to one of its children.
    """
    h = latent_projection(g)
    adj: list[list[NodeId]] = [[] for _ in range(h.n_nodes)]
    for u, v in h.bidirected:
        adj[u].append(v)
        adj[v].append(u)
    for x in sorted(h.intervenable):
        kids = set(children(h, x))
        prev: dict[NodeId, NodeId] = {x: x}
        queue = [x]
        while queue:
            cur = queue.pop(0)
            for nxt in sorted(adj[cur]):
                if nxt in prev:
                    continue
                prev[nxt] = cur
                if nxt in kids:
                    path = [nxt]
                    while path[-1] != x:
                        path.append(prev[path[-1]])
                    return False, tuple(reversed(path))
                queue.append(nxt)
    return True, None


def _reach_observed(
    start: NodeId, keep: frozenset[NodeId], kids: tuple[tuple[NodeId, ...], ...], memo: dict
) -> frozenset[NodeId]:
    """Kept nodes reachable from ``start`` by directed paths whose
    intermediate nodes all lie outside ``keep``."""
    if start in memo:
        return memo[start]
    memo[start] = frozenset()  # cycle guard; the graph is acyclic anyway
    out: set[NodeId] = set()
    for c in kids[start]:
        if c in keep:
            out.add(c)
        else:
            out |= _reach_observed(c, keep, kids, memo)
    memo[start] = frozenset(out)
    return memo[start]


def project_onto(g: Admg, keep: Iterable[NodeId]) -> tuple[Admg, tuple[NodeId, ...]]:
    """Latent-project ``g`` onto the node subset ``keep``.

    Nodes outside ``keep`` are treated as unobserved, as are the implicit
    confounders behind bidirected edges.  Returns the projected graph (dense
    ids, ``keep`` in ascending original order) and the map from new id to
    original id.
    """
    if g.hidden:
        raise StructuralError("project_onto expects a graph without hidden nodes")
    keep_set = frozenset(keep)
    order = tuple(sorted(keep_set))
    if g.reward not in keep_set:
        raise StructuralError("the reward node must be kept")
    new_id = {v: i for i, v in enumerate(order)}
    kids = _children_map(g)

    directed: set[tuple[NodeId, NodeId]] = set()
    memo: dict[NodeId, frozenset[NodeId]] = {}
    for a in order:
        targets: set[NodeId] = set()
        for c in kids[a]:
            if c in keep_set:
                targets.add(c)
            else:
                targets |= _reach_observed(c, keep_set, kids, memo)
        for b in targets:
            directed.add((new_id[a], new_id[b]))

    # Bidirected edges: every unobserved source (a dropped node, or the
    # implicit confounder behind a bidirected edge) confounds all kept nodes
    # it reaches through dropped-node-only directed paths.
    bidirected: set[tuple[NodeId, NodeId]] = set()

    def reach_of(v: NodeId) -> frozenset[NodeId]:
        if v in keep_set:
            return frozenset([v])
        return _reach_observed(v, keep_set, kids, memo)

    sources: list[frozenset[NodeId]] = []
    for v in range(g.n_nodes):
        if v not in keep_set:
            sources.append(reach_of(v))
    for u, v in g.bidirected:
        sources.append(reach_of(u) | reach_of(v))
    for r in sources:
        hit = sorted(new_id[w] for w in r)
        for i in range(len(hit)):
            for j in range(i + 1, len(hit)):
                bidirected.add((hit[i], hit[j]))

    labels = tuple(g.labels[v] for v in order) if g.labels else ()
    h = Admg(
        n_nodes=len(order),
        directed=frozenset(directed),
        bidirected=frozenset(bidirected),
        intervenable=frozenset(new_id[v] for v in g.intervenable & keep_set),
        reward=new_id[g.reward],
        labels=labels,
    )
    return h, order


def reduce_graph(g: Admg, x: NodeId) -> tuple[Admg, tuple[NodeId, ...]]:
    """Project ``g`` onto the reward, ``x`` and its confounded parent set.

    This is the subgraph the observational estimation pipeline works on for
    arm node ``x``.  Returns the reduced graph and the new-id -> old-id map.
    """
    _, _, pa_c, _ = pa_plus_and_pa_c(g, x)
    keep = {g.reward, x} | set(pa_c)
    return project_onto(g, keep)
