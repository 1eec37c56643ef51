"""Local discovery of candidate parent-children sets: the max-min heuristic
and the interleaved inclusion/elimination heuristic."""

from __future__ import annotations

import logging

from ..dataset import Dataset
from ..graphs import ConstraintSpec
from .config import CiCache, LearnerConfig, iter_subsets

logger = logging.getLogger(__name__)

PcSets = dict[str, set[str]]


def _candidates(d: Dataset, target: str, constraints: ConstraintSpec) -> list[str]:
    out = []
    for x in sorted(d.feature_names):
        if x == target:
            continue
        both_forbidden = (x, target) in constraints.blacklist and (
            target,
            x,
        ) in constraints.blacklist
        if both_forbidden:
            continue
        out.append(x)
    return out


def _max_p_over_subsets(cache, target, x, pool, cap) -> float:
    """Weakest association of (target, x) over conditioning subsets of pool."""
    worst = 0.0
    for sub in iter_subsets(pool, cap):
        worst = max(worst, cache.test(target, x, frozenset(sub)).p_value)
        if worst >= 1.0:
            break
    return worst


def _has_separator(cache, target, x, pool, cap, alpha) -> bool:
    return any(
        cache.test(target, x, frozenset(sub)).p_value >= alpha
        for sub in iter_subsets(pool, cap)
    )


def _apply_symmetry_and_whitelist(
    pc: PcSets, constraints: ConstraintSpec
) -> PcSets:
    corrected = {
        x: {y for y in members if x in pc.get(y, set())}
        for x, members in pc.items()
    }
    for u, v in constraints.whitelist:
        corrected.setdefault(u, set()).add(v)
        corrected.setdefault(v, set()).add(u)
    return corrected


def mmpc(
    d: Dataset,
    cfg: LearnerConfig,
    constraints: ConstraintSpec = ConstraintSpec(),
    _cache: CiCache | None = None,
) -> PcSets:
    """Max-min candidate selection with backward removal, symmetry-corrected.

    Forward phase repeatedly admits the candidate whose weakest association
    over subsets of the current set is strongest (smallest maximal p-value);
    backward phase drops members for which any separating subset exists.
    """
    cache = _cache if _cache is not None else CiCache(d)
    cap = cfg.conditioning_cap(d)
    pc: PcSets = {}
    for target in sorted(d.feature_names):
        cpc: list[str] = []
        candidates = _candidates(d, target, constraints)
        while candidates:
            best, best_p = None, 1.0
            for x in candidates:
                worst = _max_p_over_subsets(cache, target, x, cpc, cap)
                if worst < best_p:
                    best, best_p = x, worst
            if best is None or best_p >= cfg.alpha:
                break
            cpc.append(best)
            candidates.remove(best)
        removed = True
        while removed:
            removed = False
            for x in sorted(cpc):
                rest = [y for y in cpc if y != x]
                if _has_separator(cache, target, x, rest, cap, cfg.alpha):
                    cpc.remove(x)
                    removed = True
                    break
        pc[target] = set(cpc)
    return _apply_symmetry_and_whitelist(pc, constraints)


def hiton_pc(
    d: Dataset,
    cfg: LearnerConfig,
    constraints: ConstraintSpec = ConstraintSpec(),
    _cache: CiCache | None = None,
) -> PcSets:
    """Interleaved inclusion/elimination candidate selection.

    Candidates enter by decreasing marginal association; after each admission
    every member is re-tested against all subsets of the remaining set and
    dropped as soon as one separates it.
    """
    cache = _cache if _cache is not None else CiCache(d)
    cap = cfg.conditioning_cap(d)
    pc: PcSets = {}
    for target in sorted(d.feature_names):
        queue = []
        for x in _candidates(d, target, constraints):
            p = cache.test(target, x).p_value
            if p < cfg.alpha:
                queue.append((p, x))
        queue.sort()
        tpc: list[str] = []
        for _, x in queue:
            tpc.append(x)
            changed = True
            while changed:
                changed = False
                for y in sorted(tpc):
                    rest = [w for w in tpc if w != y]
                    if _has_separator(cache, target, y, rest, cap, cfg.alpha):
                        tpc.remove(y)
                        changed = True
                        break
        pc[target] = set(tpc)
    return _apply_symmetry_and_whitelist(pc, constraints)
