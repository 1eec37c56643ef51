"""Single entry point dispatching to the constituent algorithms and
guaranteeing that every returned DAG honors the constraint specification."""

from __future__ import annotations

import logging
from dataclasses import replace

from ..dataset import Dataset
from ..errors import CycleError, GraphError
from ..graphs import ConstraintSpec, Dag, Pdag, creates_cycle, extend_to_dag
from .blanket import markov_blanket, mb_to_pdag
from .config import AlgorithmId, CiCache, LearnerConfig, TOP_LEVEL
from .hybrid import restrict_maximize
from .pcstable import pc_stable
from .scoresearch import hill_climb, tabu_search

logger = logging.getLogger(__name__)


def finish_constrained(p: Pdag, constraints: ConstraintSpec) -> Dag:
    """Complete a partially directed learner output into a constrained DAG.

    Whitelisted arcs are forced, blacklisted orientations repaired, and the
    remaining undirected edges oriented by consistent extension. When strict
    extension is impossible (noisy v-structures or adversarial constraints),
    falls back to greedy insertion that still guarantees acyclicity and
    constraint satisfaction, dropping edges only as a last resort.
    """
    directed = set(p.directed_arcs)
    undirected = set(p.undirected_edges)
    bl, wl = constraints.blacklist, constraints.whitelist

    for u, v in sorted(wl):
        undirected.discard(frozenset((u, v)))
        directed.discard((v, u))
        directed.add((u, v))
    for u, v in sorted(directed):
        if (u, v) in bl:
            directed.discard((u, v))
            if (v, u) not in bl:
                undirected.add(frozenset((u, v)))
            else:
                logger.debug("dropping fully blacklisted edge %s - %s", u, v)
    for e in sorted(undirected, key=sorted):
        a, b = sorted(e)
        fwd_banned, rev_banned = (a, b) in bl, (b, a) in bl
        if fwd_banned and rev_banned:
            undirected.discard(e)
        elif fwd_banned:
            undirected.discard(e)
            directed.add((b, a))
        elif rev_banned:
            undirected.discard(e)
            directed.add((a, b))

    try:
        dag = extend_to_dag(Pdag(p.nodes, frozenset(directed), frozenset(undirected)))
        if wl <= dag.arcs and not (bl & dag.arcs):
            return dag
    except (CycleError, GraphError):
        pass

    out = Dag(p.nodes, wl)
    for u, v in sorted(directed):
        if (u, v) in out.arcs or (v, u) in out.arcs or (u, v) in bl:
            continue
        if not creates_cycle(out, (u, v)):
            out = out.with_arcs(add=[(u, v)])
        else:
            logger.debug("dropping arc %s -> %s to preserve acyclicity", u, v)
    for e in sorted(undirected, key=sorted):
        a, b = sorted(e)
        if (a, b) in out.arcs or (b, a) in out.arcs:
            continue
        for s, t in ((a, b), (b, a)):
            if (s, t) not in bl and not creates_cycle(out, (s, t)):
                out = out.with_arcs(add=[(s, t)])
                break
        else:
            logger.debug("dropping edge %s - %s: no legal orientation", a, b)
    return out


def learn(
    alg: AlgorithmId,
    d: Dataset,
    constraints: ConstraintSpec = ConstraintSpec(),
    cfg: LearnerConfig = LearnerConfig(),
) -> Dag:
    """Learn a DAG with one top-level algorithm under the given constraints.

    Constraint-based and blanket-based outputs pass through consistent
    extension; the result always contains every whitelisted arc and no
    blacklisted arc, and is acyclic.
    """
    alg = AlgorithmId.parse(alg) if not isinstance(alg, AlgorithmId) else alg
    if alg not in TOP_LEVEL:
        raise GraphError(f"{alg.value} is a restrict phase, not a top-level learner")
    if alg in (AlgorithmId.GS, AlgorithmId.IAMB, AlgorithmId.IAMB_FDR):
        cache = CiCache(d)
        blankets = {
            t: markov_blanket(d, t, alg, cfg, _cache=cache)
            for t in sorted(d.feature_names)
        }
        dag = finish_constrained(mb_to_pdag(d, blankets, cfg, _cache=cache), constraints)
    elif alg == AlgorithmId.PC_STABLE:
        dag = finish_constrained(pc_stable(d, cfg, constraints), constraints)
    elif alg == AlgorithmId.HC:
        dag = hill_climb(d, cfg, constraints)
    elif alg == AlgorithmId.TABU:
        dag = tabu_search(d, cfg, constraints)
    elif alg == AlgorithmId.MMHC:
        dag = restrict_maximize(
            d,
            replace(cfg, restrict=AlgorithmId.MMPC, maximize=AlgorithmId.HC),
            constraints,
        )
    else:  # RSMAX2: restrict/maximize taken from cfg (HITON-PC + TABU default)
        dag = restrict_maximize(d, cfg, constraints)

    if not constraints.whitelist <= dag.arcs or constraints.blacklist & dag.arcs:
        raise GraphError(
            f"internal error: {alg.value} output violates constraints"
        )
    return dag
