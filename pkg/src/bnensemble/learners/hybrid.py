"""Two-phase hybrid learning: local-discovery restriction followed by
score-based maximization inside the restricted candidate space."""

from __future__ import annotations

import logging

from ..dataset import Dataset
from ..graphs import ConstraintSpec, Dag
from .config import AlgorithmId, LearnerConfig
from .localdisc import hiton_pc, mmpc
from .scoresearch import hill_climb, tabu_search

logger = logging.getLogger(__name__)


def restrict_maximize(
    d: Dataset,
    cfg: LearnerConfig,
    constraints: ConstraintSpec = ConstraintSpec(),
) -> Dag:
    """Run cfg.restrict to get candidate parent-children sets, then run
    cfg.maximize with every non-candidate arc added to the blacklist.

    Whitelisted arcs are exempt from the augmentation, so the original
    constraints always win.
    """
    discover = mmpc if cfg.restrict == AlgorithmId.MMPC else hiton_pc
    pc_sets = discover(d, cfg, constraints)
    augmented = set(constraints.blacklist)
    nodes = sorted(d.feature_names)
    for u in nodes:
        for v in nodes:
            if u == v or (u, v) in constraints.whitelist:
                continue
            if u not in pc_sets.get(v, set()):
                augmented.add((u, v))
    spec = ConstraintSpec(
        blacklist=frozenset(augmented),
        whitelist=constraints.whitelist,
        roots=constraints.roots,
        leaves=constraints.leaves,
    )
    maximize = hill_climb if cfg.maximize == AlgorithmId.HC else tabu_search
    return maximize(d, cfg, spec)
