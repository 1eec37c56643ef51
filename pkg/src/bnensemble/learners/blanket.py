"""Markov-blanket discovery (grow-shrink and incremental-association variants)
and the blanket-to-graph step."""

from __future__ import annotations

import logging

from ..dataset import Dataset
from ..graphs import Pdag, meek_closure
from ..stats import bh_adjust
from .config import AlgorithmId, CiCache, LearnerConfig, SepsetTable, iter_subsets

logger = logging.getLogger(__name__)

_MB_VARIANTS = (AlgorithmId.GS, AlgorithmId.IAMB, AlgorithmId.IAMB_FDR)


def _reaches(directed: set[tuple[str, str]], src: str, dst: str) -> bool:
    """Directed-path reachability; guards v-structure orientation conflicts."""
    stack, seen = [src], {src}
    while stack:
        node = stack.pop()
        if node == dst:
            return True
        for u, v in directed:
            if u == node and v not in seen:
                seen.add(v)
                stack.append(v)
    return False


def markov_blanket(
    d: Dataset,
    target: str,
    variant: AlgorithmId,
    cfg: LearnerConfig,
    _cache: CiCache | None = None,
) -> set[str]:
    """Estimate the Markov blanket of ``target``.

    GS sweeps candidates lexicographically and admits any that test dependent
    given the current blanket; IAMB admits the candidate with the highest
    conditional mutual information each round; IAMB.FDR additionally gates
    admission and removal on Benjamini-Hochberg-adjusted p-values across the
    current candidate set. All variants finish with a shrink phase.
    """
    if variant not in _MB_VARIANTS:
        raise ValueError(f"{variant} is not a Markov-blanket variant")
    cache = _cache if _cache is not None else CiCache(d)
    d.column_index(target)  # validates the name
    others = sorted(n for n in d.feature_names if n != target)
    cap = cfg.conditioning_cap(d)
    mb: set[str] = set()

    def grow_gs():
        # The admission test conditions on the current blanket, so growth
        # stops once the blanket itself exceeds the conditioning cap.
        changed = True
        while changed:
            changed = False
            for x in others:
                if x in mb or len(mb) > cap:
                    continue
                if cache.test(target, x, frozenset(mb)).p_value < cfg.alpha:
                    mb.add(x)
                    changed = True

    def grow_iamb(fdr: bool):
        while len(mb) <= cap:
            candidates = [x for x in others if x not in mb]
            if not candidates:
                break
            cond = frozenset(mb)
            if fdr:
                pvals = [cache.test(target, x, cond).p_value for x in candidates]
                adjusted = dict(zip(candidates, bh_adjust(pvals)))
                candidates = [x for x in candidates if adjusted[x] < cfg.alpha]
                if not candidates:
                    break
            best, best_mi = None, float("-inf")
            for x in candidates:
                mi = cache.mi(target, x, cond)
                if mi > best_mi:
                    best, best_mi = x, mi
            if not fdr and cache.test(target, best, cond).p_value >= cfg.alpha:
                break
            mb.add(best)

    def shrink(fdr: bool):
        while mb:
            members = sorted(mb)
            pvals = [
                cache.test(target, x, frozenset(mb - {x})).p_value for x in members
            ]
            if fdr:
                pvals = bh_adjust(pvals)
            worst, worst_p = None, -1.0
            for x, p in zip(members, pvals):
                if p >= cfg.alpha and p > worst_p:
                    worst, worst_p = x, p
            if worst is None:
                break
            mb.discard(worst)

    if variant == AlgorithmId.GS:
        grow_gs()
    else:
        grow_iamb(fdr=variant == AlgorithmId.IAMB_FDR)
    shrink(fdr=variant == AlgorithmId.IAMB_FDR)
    return mb


def symmetry_correct(blankets: dict[str, set[str]]) -> dict[str, set[str]]:
    """Keep x in MB(y) only when y is also in MB(x)."""
    return {
        x: {y for y in members if x in blankets.get(y, set())}
        for x, members in blankets.items()
    }


def mb_to_pdag(
    d: Dataset,
    blankets: dict[str, set[str]],
    cfg: LearnerConfig,
    _cache: CiCache | None = None,
) -> Pdag:
    """Build a partially directed graph from per-node Markov blankets.

    Neighbors are told apart from spouses by searching for a separating
    subset inside the smaller blanket; v-structures are oriented from the
    recorded separating sets, then orientation rules propagate.
    """
    cache = _cache if _cache is not None else CiCache(d)
    blankets = symmetry_correct(blankets)
    nodes = tuple(sorted(d.feature_names))
    cap = cfg.conditioning_cap(d)
    sepsets: SepsetTable = {}
    edges: set[frozenset] = set()

    for x in nodes:
        for y in sorted(blankets.get(x, ())):
            if y <= x:
                continue
            bx = blankets[x] - {y}
            by = blankets[y] - {x}
            base = min(bx, by, key=lambda s: (len(s), sorted(s)))
            separated = False
            for sub in iter_subsets(base, cap):
                if cache.test(x, y, frozenset(sub)).p_value >= cfg.alpha:
                    sepsets[frozenset((x, y))] = frozenset(sub)
                    separated = True
                    break
            if not separated:
                edges.add(frozenset((x, y)))

    directed: set[tuple[str, str]] = set()
    undirected = set(edges)

    def orient(a, b):
        if (b, a) in directed or _reaches(directed, b, a):
            logger.debug("conflicting v-structure orientation %s -> %s skipped", a, b)
            return
        if frozenset((a, b)) in undirected:
            undirected.discard(frozenset((a, b)))
            directed.add((a, b))

    for w in nodes:
        nbrs = sorted(
            {next(iter(e - {w})) for e in edges if w in e}
        )
        for i, x in enumerate(nbrs):
            for y in nbrs[i + 1 :]:
                pair = frozenset((x, y))
                if pair in edges or pair not in sepsets:
                    continue
                if w not in sepsets[pair]:
                    orient(x, w)
                    orient(y, w)

    return meek_closure(Pdag(nodes, frozenset(directed), frozenset(undirected)))
