"""Algorithm identifiers, learner configuration, and per-run test caching."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Iterable, Optional

from ..dataset import Dataset
from ..errors import ConfigError
from ..stats import CiResult, ci_test, gauss_mi


class AlgorithmId(str, Enum):
    GS = "GS"
    IAMB = "IAMB"
    IAMB_FDR = "IAMB.FDR"
    PC_STABLE = "PC.STABLE"
    HC = "HC"
    TABU = "TABU"
    MMHC = "MMHC"
    RSMAX2 = "RSMAX2"
    # Local-discovery components, usable only as restrict phases.
    MMPC = "MMPC"
    HITON_PC = "SI.HITON.PC"

    @classmethod
    def parse(cls, text: str) -> "AlgorithmId":
        key = str(text).strip().upper().replace("-", ".").replace("_", ".")
        for member in cls:
            if member.value.replace("_", ".") == key or member.name.replace(
                "_", "."
            ) == key:
                return member
        raise ConfigError(f"unknown algorithm: {text!r}", field="algorithm")


TOP_LEVEL: tuple[AlgorithmId, ...] = (
    AlgorithmId.GS,
    AlgorithmId.IAMB,
    AlgorithmId.IAMB_FDR,
    AlgorithmId.PC_STABLE,
    AlgorithmId.HC,
    AlgorithmId.TABU,
    AlgorithmId.MMHC,
    AlgorithmId.RSMAX2,
)

RESTRICT_ONLY: tuple[AlgorithmId, ...] = (AlgorithmId.MMPC, AlgorithmId.HITON_PC)


@dataclass(frozen=True)
class LearnerConfig:
    """Knobs shared by all constituent algorithms.

    ``max_conditioning`` caps conditioning-set size; None means
    min(n_features - 2, n_obs // 10), which keeps test degrees of freedom
    positive on small bootstrap replicates. ``tabu_length`` also serves as
    the no-improvement stopping window of the tabu search. Score searches
    additionally ascend from ``restarts`` random starts (each seeded by
    ``seed`` and built from ``restart_arcs`` random legal insertions) to
    escape orientation plateaus; both searchers share the same starts, which
    keeps tabu's result at least as good as hill climbing's.
    """

    alpha: float = 0.05
    max_conditioning: Optional[int] = None
    tabu_length: int = 10
    max_iterations: int = 200
    restarts: int = 4
    restart_arcs: int = 4
    restrict: AlgorithmId = AlgorithmId.HITON_PC
    maximize: AlgorithmId = AlgorithmId.TABU
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must be in (0, 1)", field="alpha")
        if self.max_conditioning is not None and self.max_conditioning < 0:
            raise ConfigError(
                "max_conditioning must be >= 0", field="max_conditioning"
            )
        if self.tabu_length < 0:
            raise ConfigError("tabu_length must be >= 0", field="tabu_length")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1", field="max_iterations")
        if self.restarts < 0 or self.restart_arcs < 0:
            raise ConfigError("restart counts must be >= 0", field="restarts")
        if self.restrict not in RESTRICT_ONLY:
            raise ConfigError(
                "restrict must be a local-discovery algorithm", field="restrict"
            )
        if self.maximize not in (AlgorithmId.HC, AlgorithmId.TABU):
            raise ConfigError(
                "maximize must be a score-based algorithm", field="maximize"
            )

    def conditioning_cap(self, d: Dataset) -> int:
        cap = self.max_conditioning
        if cap is None:
            cap = min(d.n_features - 2, d.n_obs // 10)
        return max(0, min(cap, d.n_obs - 3))


# Map from unordered non-adjacent pair to the separating set found for it.
SepsetTable = dict[frozenset, frozenset]


class CiCache:
    """Memoizes conditional-independence tests for one learner invocation.

    Never shared across datasets; keys canonicalize (x, y) order since the
    test is exactly symmetric.
    """

    def __init__(self, d: Dataset):
        self.dataset = d
        self._tests: dict[tuple, CiResult] = {}
        self._mi: dict[tuple, float] = {}

    def _key(self, x: str, y: str, z: frozenset) -> tuple:
        a, b = sorted((x, y))
        return a, b, z

    def test(self, x: str, y: str, z: Iterable[str] = ()) -> CiResult:
        key = self._key(x, y, frozenset(z))
        if key not in self._tests:
            self._tests[key] = ci_test(self.dataset, x, y, key[2])
        return self._tests[key]

    def mi(self, x: str, y: str, z: Iterable[str] = ()) -> float:
        key = self._key(x, y, frozenset(z))
        if key not in self._mi:
            self._mi[key] = gauss_mi(self.dataset, x, y, key[2])
        return self._mi[key]


def iter_subsets(items: Iterable[str], max_size: int):
    """Subsets in deterministic order: by size, then lexicographic."""
    pool = sorted(items)
    for size in range(0, min(max_size, len(pool)) + 1):
        yield from combinations(pool, size)
