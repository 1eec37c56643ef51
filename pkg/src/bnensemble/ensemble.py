"""Bootstrap model averaging per algorithm, automatic inclusion thresholds,
arc-strength computation on averaged networks, and pooling across algorithms.

Replicates are independent tasks; the frequency tally is a commutative merge
of per-replicate arc sets, so any execution order (or worker count) yields
identical tables.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .dataset import Dataset, bootstrap_resample
from .errors import BnError, DegenerateTestError, DofExhaustionError, PipelineError
from .graphs import Arc, ConstraintSpec, Dag, _find_cycle
from .learners import AlgorithmId, LearnerConfig, learn
from .stats import ci_test
from .util import derive_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArcFrequencyTable:
    """Directed-arc inclusion frequencies over bootstrap replicates."""

    frequencies: Mapping[Arc, float]
    replicate_count: int

    def __post_init__(self):
        object.__setattr__(self, "frequencies", dict(self.frequencies))
        if self.replicate_count < 1:
            raise PipelineError("replicate_count must be positive")
        bad = {a: f for a, f in self.frequencies.items() if not 0.0 <= f <= 1.0}
        if bad:
            raise PipelineError(f"frequencies outside [0, 1]: {bad}")


@dataclass(frozen=True)
class ArcRecord:
    from_: str
    to: str
    algorithm: AlgorithmId
    strength: float


@dataclass(frozen=True)
class ArcPool:
    """Aggregated (arc, algorithm, strength) records across the ensemble."""

    records: tuple[ArcRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for rec in self.records:
            key = (rec.algorithm, rec.from_, rec.to)
            if key in seen:
                raise PipelineError(f"duplicate pool record {key}")
            seen.add(key)
            if not 0.0 <= rec.strength <= 1.0:
                raise PipelineError(f"strength outside [0, 1]: {rec}")

    def __len__(self) -> int:
        return len(self.records)

    def arcs(self) -> set[Arc]:
        return {(r.from_, r.to) for r in self.records}

    def strengths(self) -> list[float]:
        return [r.strength for r in self.records]

    def min_strength(self, arc: Arc) -> float:
        values = [r.strength for r in self.records if (r.from_, r.to) == arc]
        return min(values) if values else float("inf")


def bootstrap_average(
    alg: AlgorithmId,
    d: Dataset,
    constraints: ConstraintSpec,
    cfg: LearnerConfig,
    replicates: int,
    seed: int,
    threshold: float | str = "auto",
    workers: int = 1,
) -> tuple[ArcFrequencyTable, Dag]:
    """Learn on bootstrap resamples and average the structures.

    Replicate r derives its seed from (seed, alg, r), so parallel scheduling
    cannot change results. Arcs whose frequency reaches the inclusion
    threshold form the averaged graph; cycles are repaired by dropping the
    lowest-frequency arc on each cycle.
    """
    if replicates < 1:
        raise PipelineError("replicates must be >= 1", stage=f"bootstrap[{alg.value}]")

    def one(r: int) -> frozenset[Arc] | None:
        rep_seed = derive_seed(seed, alg.value, r)
        try:
            replicate = bootstrap_resample(d, rep_seed)
            return frozenset(learn(alg, replicate, constraints, cfg).arcs)
        except BnError as exc:
            logger.warning("replicate %d of %s failed: %s", r, alg.value, exc)
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(replicates)))
    else:
        results = [one(r) for r in range(replicates)]

    failures = sum(1 for r in results if r is None)
    if failures > 0.01 * replicates:
        raise PipelineError(
            f"{failures}/{replicates} replicates failed",
            stage=f"bootstrap[{alg.value}]",
        )
    arc_sets = [r for r in results if r is not None]
    counts: dict[Arc, int] = {}
    for arcs in arc_sets:
        for arc in arcs:
            counts[arc] = counts.get(arc, 0) + 1
    table = ArcFrequencyTable(
        {a: c / len(arc_sets) for a, c in sorted(counts.items())}, len(arc_sets)
    )
    if threshold == "auto":
        # No arc in any replicate: nothing to average, threshold is moot.
        cut = significance_threshold(table) if table.frequencies else 0.5
    else:
        cut = float(threshold)
    averaged = _acyclic_average(d.feature_names, table, cut)
    return table, averaged


def _acyclic_average(
    nodes: Sequence[str], table: ArcFrequencyTable, threshold: float
) -> Dag:
    kept = {a for a, f in table.frequencies.items() if f >= threshold}
    while True:
        cycle = _find_cycle(tuple(nodes), frozenset(kept))
        if not cycle:
            break
        on_cycle = [
            (table.frequencies[(u, v)], (u, v))
            for u, v in zip(cycle, cycle[1:])
        ]
        freq, weakest = min(on_cycle)
        kept.discard(weakest)
        logger.info(
            "cycle repair: dropped %s -> %s (frequency %.3f)", *weakest, freq
        )
    return Dag(tuple(nodes), frozenset(kept))


def significance_threshold(f: ArcFrequencyTable | Mapping[Arc, float]) -> float:
    """Inclusion threshold minimizing the L1 gap between the observed
    frequency distribution and an ideal all-or-nothing one.

    Searches candidate thresholds over the observed frequency values; ties
    resolve to the midpoint of the tied candidates, and a table where every
    frequency is identical falls back to 0.5.
    """
    freqs = f.frequencies if isinstance(f, ArcFrequencyTable) else f
    values = sorted(freqs.values())
    if not values:
        raise PipelineError("empty frequency table", stage="threshold")
    unique = sorted(set(values))
    if len(unique) == 1:
        return 0.5
    m = len(values)
    # Breakpoints of the empirical CDF over [0, 1].
    points = [0.0] + unique + [1.0]
    levels: list[float] = []
    for left in points[:-1]:
        levels.append(sum(1 for v in values if v <= left) / m)

    def l1(candidate: float) -> float:
        total = 0.0
        for left, right, level in zip(points[:-1], points[1:], levels):
            ideal_lo = 1.0 if left >= candidate else 0.0
            ideal_hi = 1.0 if right > candidate else ideal_lo
            if ideal_lo == ideal_hi:
                total += abs(level - ideal_lo) * (right - left)
            else:
                # candidate splits this segment
                total += abs(level - 0.0) * (candidate - left)
                total += abs(level - 1.0) * (right - candidate)
        return total

    scored = [(l1(c), c) for c in unique]
    best = min(score for score, _ in scored)
    tied = [c for score, c in scored if abs(score - best) < 1e-12]
    return (tied[0] + tied[-1]) / 2.0 if len(tied) > 1 else tied[0]


def arc_strengths(g: Dag, d: Dataset) -> dict[Arc, float]:
    """p-value of each arc's endpoint test given the child's other parents.

    Arcs whose test runs out of degrees of freedom (or hits a collinear
    conditioning set) are assigned strength 1.0 with a warning.
    """
    out: dict[Arc, float] = {}
    for u, v in sorted(g.arcs):
        others = g.parents(v) - {u}
        try:
            out[(u, v)] = ci_test(d, u, v, others).p_value
        except (DofExhaustionError, DegenerateTestError) as exc:
            logger.warning("strength of %s -> %s undefined (%s); using 1.0", u, v, exc)
            out[(u, v)] = 1.0
    return out


def build_pool(
    per_algorithm: Iterable[tuple[AlgorithmId, Dag, Mapping[Arc, float]]],
) -> ArcPool:
    """Union the per-algorithm arcs with provenance; no cross-algorithm dedup."""
    items = list(per_algorithm)
    if items:
        features = set(items[0][1].nodes)
        for alg, dag, _ in items:
            if set(dag.nodes) != features:
                raise PipelineError(
                    f"{alg.value} learned over a different feature set",
                    stage="pool",
                )
    records = []
    for alg, dag, strengths in items:
        for u, v in sorted(dag.arcs):
            records.append(ArcRecord(u, v, alg, float(strengths[(u, v)])))
    return ArcPool(tuple(records))


def write_pool_csv(pool: ArcPool, path, digest: str = "") -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if digest:
            fh.write(f"# config_digest={digest}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["from", "to", "algorithm", "strength"])
        for rec in pool.records:
            writer.writerow([rec.from_, rec.to, rec.algorithm.value, repr(rec.strength)])
