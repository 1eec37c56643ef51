"""Constituent structure-learning algorithms."""

from .blanket import markov_blanket, mb_to_pdag, symmetry_correct
from .config import (
    RESTRICT_ONLY,
    TOP_LEVEL,
    AlgorithmId,
    CiCache,
    LearnerConfig,
    SepsetTable,
)
from .dispatch import finish_constrained, learn
from .hybrid import restrict_maximize
from .localdisc import hiton_pc, mmpc
from .pcstable import pc_stable
from .scoresearch import hill_climb, tabu_search

__all__ = [
    "AlgorithmId",
    "LearnerConfig",
    "CiCache",
    "SepsetTable",
    "TOP_LEVEL",
    "RESTRICT_ONLY",
    "markov_blanket",
    "mb_to_pdag",
    "symmetry_correct",
    "pc_stable",
    "hill_climb",
    "tabu_search",
    "mmpc",
    "hiton_pc",
    "restrict_maximize",
    "learn",
    "finish_constrained",
]
