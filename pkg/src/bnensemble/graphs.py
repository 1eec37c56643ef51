"""Directed and partially directed graph machinery.

Graphs are immutable values keyed by node name. All tie-breaks (topological
order, sink selection, edge orientation) are lexicographic so that every
operation is reproducible run to run.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable

from .errors import ConstraintError, CycleError, GraphError

Arc = tuple[str, str]


def _normalize_arcs(arcs: Iterable[Arc]) -> frozenset[Arc]:
    return frozenset((str(u), str(v)) for u, v in arcs)


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph over named nodes."""

    nodes: tuple[str, ...]
    arcs: frozenset[Arc] = frozenset()

    def __post_init__(self):
        nodes = tuple(str(n) for n in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "arcs", _normalize_arcs(self.arcs))
        if len(set(nodes)) != len(nodes):
            raise GraphError("duplicate node names")
        known = set(nodes)
        for u, v in self.arcs:
            if u not in known or v not in known:
                raise GraphError(f"arc ({u}, {v}) references unknown node")
            if u == v:
                raise GraphError(f"self-loop on node {u}")
        cycle = _find_cycle(nodes, self.arcs)
        if cycle:
            raise CycleError(
                "arcs contain a directed cycle: " + " -> ".join(cycle), cycle
            )

    @cached_property
    def _parents(self) -> dict[str, frozenset[str]]:
        out: dict[str, set[str]] = {n: set() for n in self.nodes}
        for u, v in self.arcs:
            out[v].add(u)
        return {n: frozenset(s) for n, s in out.items()}

    @cached_property
    def _children(self) -> dict[str, frozenset[str]]:
        out: dict[str, set[str]] = {n: set() for n in self.nodes}
        for u, v in self.arcs:
            out[u].add(v)
        return {n: frozenset(s) for n, s in out.items()}

    def parents(self, v: str) -> frozenset[str]:
        self._require(v)
        return self._parents[v]

    def children(self, u: str) -> frozenset[str]:
        self._require(u)
        return self._children[u]

    def has_arc(self, u: str, v: str) -> bool:
        return (u, v) in self.arcs

    def with_arcs(self, add=(), remove=()) -> "Dag":
        arcs = set(self.arcs) - _normalize_arcs(remove) | _normalize_arcs(add)
        return Dag(self.nodes, frozenset(arcs))

    def _require(self, *names: str) -> None:
        known = set(self.nodes)
        for n in names:
            if n not in known:
                raise GraphError(f"unknown node: '{n}'")


@dataclass(frozen=True)
class Pdag:
    """Partially directed graph: directed arcs plus undirected edges."""

    nodes: tuple[str, ...]
    directed_arcs: frozenset[Arc] = frozenset()
    undirected_edges: frozenset[frozenset[str]] = frozenset()

    def __post_init__(self):
        nodes = tuple(str(n) for n in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "directed_arcs", _normalize_arcs(self.directed_arcs))
        undirected = frozenset(
            frozenset((str(a), str(b))) for a, b in self.undirected_edges
        )
        object.__setattr__(self, "undirected_edges", undirected)
        known = set(nodes)
        if len(known) != len(nodes):
            raise GraphError("duplicate node names")
        pairs = set()
        for u, v in self.directed_arcs:
            if u == v:
                raise GraphError(f"self-loop on node {u}")
            if u not in known or v not in known:
                raise GraphError(f"arc ({u}, {v}) references unknown node")
            pairs.add(frozenset((u, v)))
        for e in undirected:
            if len(e) != 2:
                raise GraphError("undirected edge must join two distinct nodes")
            if not e <= known:
                raise GraphError(f"edge {sorted(e)} references unknown node")
            if e in pairs:
                raise GraphError(
                    f"pair {sorted(e)} appears both directed and undirected"
                )

    def adjacent(self, a: str, b: str) -> bool:
        return (
            (a, b) in self.directed_arcs
            or (b, a) in self.directed_arcs
            or frozenset((a, b)) in self.undirected_edges
        )

    def neighbors(self, v: str) -> set[str]:
        out = set()
        for u, w in self.directed_arcs:
            if u == v:
                out.add(w)
            elif w == v:
                out.add(u)
        for e in self.undirected_edges:
            if v in e:
                out |= e - {v}
        return out


@dataclass(frozen=True)
class ConstraintSpec:
    """Forbidden arcs, required arcs, and root/leaf designations.

    Roots admit no incoming whitelisted arcs; leaves admit no outgoing ones.
    Validated eagerly so use-sites can trust the invariants.
    """

    blacklist: frozenset[Arc] = frozenset()
    whitelist: frozenset[Arc] = frozenset()
    roots: frozenset[str] = frozenset()
    leaves: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "blacklist", _normalize_arcs(self.blacklist))
        object.__setattr__(self, "whitelist", _normalize_arcs(self.whitelist))
        object.__setattr__(self, "roots", frozenset(str(n) for n in self.roots))
        object.__setattr__(self, "leaves", frozenset(str(n) for n in self.leaves))
        for u, v in self.blacklist | self.whitelist:
            if u == v:
                raise ConstraintError(f"self-loop constraint on {u}")
        clash = self.blacklist & self.whitelist
        if clash:
            pair = sorted(clash)[0]
            raise ConstraintError(
                f"arc ({pair[0]}, {pair[1]}) is both blacklisted and whitelisted"
            )
        for u, v in self.whitelist:
            if v in self.roots:
                raise ConstraintError(f"whitelisted arc ({u}, {v}) enters root {v}")
            if u in self.leaves:
                raise ConstraintError(f"whitelisted arc ({u}, {v}) leaves leaf {u}")
        wl_nodes = tuple(sorted({n for arc in self.whitelist for n in arc}))
        cycle = _find_cycle(wl_nodes, self.whitelist)
        if cycle:
            raise ConstraintError(
                "whitelist induces a directed cycle: " + " -> ".join(cycle)
            )

    def allows(self, u: str, v: str) -> bool:
        return (u, v) not in self.blacklist

    def restricted_to(self, nodes: Iterable[str]) -> "ConstraintSpec":
        keep = set(nodes)
        return ConstraintSpec(
            blacklist=frozenset(a for a in self.blacklist if set(a) <= keep),
            whitelist=frozenset(a for a in self.whitelist if set(a) <= keep),
            roots=self.roots & keep,
            leaves=self.leaves & keep,
        )


def _find_cycle(nodes: Iterable[str], arcs: frozenset[Arc]) -> list[str]:
    """Return one directed cycle as a node list (closed), or [] if acyclic."""
    children: dict[str, list[str]] = {n: [] for n in nodes}
    for u, v in arcs:
        children.setdefault(u, []).append(v)
        children.setdefault(v, [])
    color: dict[str, int] = {n: 0 for n in children}  # 0 new, 1 active, 2 done
    parent: dict[str, str] = {}
    for start in sorted(children):
        if color[start]:
            continue
        stack = [(start, iter(sorted(children[start])))]
        color[start] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == 0:
                    color[nxt] = 1
                    parent[nxt] = node
                    stack.append((nxt, iter(sorted(children[nxt]))))
                    advanced = True
                    break
                if color[nxt] == 1:
                    cycle = [nxt, node]
                    cur = node
                    while cur != nxt:
                        cur = parent[cur]
                        cycle.append(cur)
                    cycle.reverse()
                    return cycle
            if not advanced:
                color[node] = 2
                stack.pop()
    return []


def creates_cycle(g: Dag, arc: Arc) -> bool:
    """Would adding u -> v close a directed cycle (i.e. does v reach u)?"""
    u, v = arc
    g._require(u, v)
    if u == v:
        raise GraphError("self-loop request")
    stack, seen = [v], {v}
    while stack:
        node = stack.pop()
        if node == u:
            return True
        for child in g._children[node]:
            if child not in seen:
                seen.add(child)
                stack.append(child)
    return False


def topological_sort(g: Dag) -> list[str]:
    """Kahn's algorithm with a lexicographic tie-break."""
    indeg = {n: len(g._parents[n]) for n in g.nodes}
    ready = [n for n in g.nodes if indeg[n] == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        node = heapq.heappop(ready)
        order.append(node)
        for child in sorted(g._children[node]):
            indeg[child] -= 1
            if indeg[child] == 0:
                heapq.heappush(ready, child)
    if len(order) != len(g.nodes):  # unreachable: Dag construction forbids cycles
        raise CycleError("internal error: cycle in a Dag value")
    return order


def ancestors(g: Dag, targets: Iterable[str]) -> set[str]:
    """All nodes with a directed path into any target (targets included)."""
    out = set(targets)
    stack = list(out)
    while stack:
        node = stack.pop()
        for p in g._parents[node]:
            if p not in out:
                out.add(p)
                stack.append(p)
    return out


def d_separated(g: Dag, x: str, y: str, z: Iterable[str]) -> bool:
    """Standard d-separation via the reachable-trail traversal.

    A trail is traversed as (node, direction) states: direction "up" means the
    trail arrived from a child, "down" means it arrived from a parent. The
    collider case opens only when the collider has a descendant in z.
    """
    zset = frozenset(z)
    g._require(x, y, *zset)
    if x == y:
        raise GraphError("x and y must differ")
    if x in zset or y in zset:
        raise GraphError("x and y must not be in the conditioning set")
    anc_z = ancestors(g, zset) if zset else set()
    visited: set[tuple[str, str]] = set()
    stack: list[tuple[str, str]] = [(x, "up")]
    while stack:
        state = stack.pop()
        if state in visited:
            continue
        visited.add(state)
        node, direction = state
        if node == y:
            return False
        if direction == "up":
            if node not in zset:
                for p in g._parents[node]:
                    stack.append((p, "up"))
                for c in g._children[node]:
                    stack.append((c, "down"))
        else:
            if node not in zset:
                for c in g._children[node]:
                    stack.append((c, "down"))
            if node in anc_z:
                for p in g._parents[node]:
                    stack.append((p, "up"))
    return True


def _meek_pass(nodes, directed: set[Arc], undirected: set[frozenset[str]]) -> bool:
    """One sweep of orientation rules R1-R4; returns True if anything fired."""

    def adjacent(a, b):
        return (
            (a, b) in directed or (b, a) in directed or frozenset((a, b)) in undirected
        )

    def reaches(src, dst):
        stack, seen = [src], {src}
        while stack:
            node = stack.pop()
            if node == dst:
                return True
            for p, q in directed:
                if p == node and q not in seen:
                    seen.add(q)
                    stack.append(q)
        return False

    def orient(a, b):
        # Guard: on inconsistent inputs (mis-detected v-structures) a rule
        # could close a directed cycle; leave the edge undirected instead.
        if reaches(b, a):
            return False
        undirected.discard(frozenset((a, b)))
        directed.add((a, b))
        return True

    changed = False
    for edge in sorted(undirected, key=sorted):
        if edge not in undirected:
            continue  # oriented earlier in this pass
        a, b = sorted(edge)
        for u, v in ((a, b), (b, a)):
            # R1: w -> u, u - v, w and v nonadjacent  =>  u -> v
            if any(
                (w, u) in directed and not adjacent(w, v)
                for w in {p for p, q in directed if q == u}
            ):
                if orient(u, v):
                    changed = True
                    break
            # R2: u -> w -> v with u - v  =>  u -> v
            if any(
                (u, w) in directed and (w, v) in directed
                for w in {q for p, q in directed if p == u}
            ):
                if orient(u, v):
                    changed = True
                    break
            # R3: u - w1, u - w2, w1 -> v, w2 -> v, w1 and w2 nonadjacent
            into_v = [w for w, q in directed if q == v]
            linked = [
                w for w in into_v if frozenset((u, w)) in undirected and w != u
            ]
            if any(
                not adjacent(w1, w2) for w1, w2 in combinations(sorted(linked), 2)
            ):
                if orient(u, v):
                    changed = True
                    break
            # R4: u adjacent d, d -> c, c -> v, d and v nonadjacent  =>  u -> v
            fired = False
            for d, c in sorted(directed):
                if (c, v) in directed and adjacent(u, d) and d != v and d != u:
                    if not adjacent(d, v) and orient(u, v):
                        changed = True
                        fired = True
                        break
            if fired:
                break
    return changed


def meek_closure(p: Pdag) -> Pdag:
    """Apply orientation rules R1-R4 to a fixpoint.

    Never introduces a new v-structure or a directed cycle; the input's
    directed part must already be acyclic.
    """
    cycle = _find_cycle(p.nodes, p.directed_arcs)
    if cycle:
        raise CycleError(
            "directed arcs already contain a cycle: " + " -> ".join(cycle), cycle
        )
    directed = set(p.directed_arcs)
    undirected = set(p.undirected_edges)
    while _meek_pass(p.nodes, directed, undirected):
        pass
    return Pdag(p.nodes, frozenset(directed), frozenset(undirected))


def extend_to_dag(p: Pdag) -> Dag:
    """Orient all undirected edges without new v-structures or cycles.

    Sink-peeling consistent extension: repeatedly remove a node with no
    outgoing directed arcs whose undirected neighbors are adjacent to all of
    its neighbors, orienting its undirected edges inward. The lexicographically
    largest eligible node is peeled first, so an isolated edge a - b orients
    a -> b. Raises CycleError with a witness when no consistent extension
    exists.
    """
    remaining = set(p.nodes)
    directed = set(p.directed_arcs)
    undirected = set(p.undirected_edges)
    oriented: set[Arc] = set(directed)

    def adjacent(a, b):
        return (
            (a, b) in directed or (b, a) in directed or frozenset((a, b)) in undirected
        )

    while remaining:
        chosen = None
        for x in sorted(remaining, reverse=True):
            if any(u == x for u, v in directed):
                continue  # has outgoing directed arc
            nbrs_un = {next(iter(e - {x})) for e in undirected if x in e}
            nbrs_all = nbrs_un | {u for u, v in directed if v == x}
            if all(
                adjacent(a, b)
                for a in nbrs_un
                for b in nbrs_all
                if a != b
            ):
                chosen = x
                break
        if chosen is None:
            cycle = _find_cycle(tuple(remaining), frozenset(directed))
            witness = cycle if cycle else sorted(remaining)
            raise CycleError(
                "PDAG admits no consistent extension; obstruction: "
                + " -> ".join(witness),
                witness,
            )
        for e in [e for e in undirected if chosen in e]:
            other = next(iter(e - {chosen}))
            oriented.add((other, chosen))
            undirected.discard(e)
        directed = {(u, v) for u, v in directed if u != chosen and v != chosen}
        undirected = {e for e in undirected if chosen not in e}
        remaining.discard(chosen)
    return Dag(p.nodes, frozenset(oriented))


def shd(g1: Dag, g2: Dag) -> int:
    """Structural Hamming distance; a reversal counts as one edit."""
    if set(g1.nodes) != set(g2.nodes):
        raise GraphError("node sets differ")
    edits = 0
    for a, b in combinations(sorted(g1.nodes), 2):
        s1 = (g1.has_arc(a, b), g1.has_arc(b, a))
        s2 = (g2.has_arc(a, b), g2.has_arc(b, a))
        if s1 != s2:
            edits += 1
    return edits
