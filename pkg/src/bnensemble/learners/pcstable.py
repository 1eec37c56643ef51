"""Order-independent constraint-based skeleton search with v-structure
orientation (the stable variant of the classic edge-deletion algorithm)."""

from __future__ import annotations

import logging
from itertools import combinations

from ..dataset import Dataset
from ..graphs import ConstraintSpec, Pdag, meek_closure
from .blanket import _reaches
from .config import CiCache, LearnerConfig, SepsetTable

logger = logging.getLogger(__name__)


def pc_stable(
    d: Dataset,
    cfg: LearnerConfig,
    constraints: ConstraintSpec = ConstraintSpec(),
    _cache: CiCache | None = None,
) -> Pdag:
    """Level-wise skeleton search with frozen per-level adjacency sets.

    Within level l, conditioning candidates come from a snapshot of the
    adjacency sets taken when the level started, so the surviving skeleton
    does not depend on edge-visit order. Pairs blacklisted in both directions
    never enter the skeleton; whitelisted pairs are exempt from removal and
    oriented as required.
    """
    cache = _cache if _cache is not None else CiCache(d)
    nodes = tuple(sorted(d.feature_names))
    wl_pairs = {frozenset(a) for a in constraints.whitelist}
    adj: dict[str, set[str]] = {x: set() for x in nodes}
    for x, y in combinations(nodes, 2):
        both_forbidden = (x, y) in constraints.blacklist and (
            y,
            x,
        ) in constraints.blacklist
        if both_forbidden and frozenset((x, y)) not in wl_pairs:
            continue
        adj[x].add(y)
        adj[y].add(x)

    sepsets: SepsetTable = {}
    cap = cfg.conditioning_cap(d)
    level = 0
    while level <= cap:
        snapshot = {x: sorted(adj[x]) for x in nodes}
        if all(len(snapshot[x]) - 1 < level for x in nodes):
            break
        for x in nodes:
            if len(snapshot[x]) - 1 < level:
                continue
            for y in snapshot[x]:
                if y not in adj[x]:
                    continue  # removed earlier in this level
                if frozenset((x, y)) in wl_pairs:
                    continue
                candidates = [w for w in snapshot[x] if w != y]
                for sub in combinations(candidates, level):
                    if cache.test(x, y, frozenset(sub)).p_value >= cfg.alpha:
                        adj[x].discard(y)
                        adj[y].discard(x)
                        sepsets[frozenset((x, y))] = frozenset(sub)
                        break
        level += 1

    directed: set[tuple[str, str]] = set()
    undirected = {frozenset((x, y)) for x in nodes for y in adj[x] if x < y}

    for u, v in sorted(constraints.whitelist):
        e = frozenset((u, v))
        if e in undirected:
            undirected.discard(e)
            directed.add((u, v))

    def orient(a, b):
        if (b, a) in directed or (a, b) in constraints.blacklist:
            return
        if _reaches(directed, b, a):
            return  # conflicting v-structure would close a cycle
        e = frozenset((a, b))
        if e in undirected:
            undirected.discard(e)
            directed.add((a, b))

    for w in nodes:
        nbrs = sorted(adj[w])
        for x, y in combinations(nbrs, 2):
            pair = frozenset((x, y))
            if y in adj[x] or pair not in sepsets:
                continue
            if w not in sepsets[pair]:
                orient(x, w)
                orient(y, w)

    return meek_closure(Pdag(nodes, frozenset(directed), frozenset(undirected)))
