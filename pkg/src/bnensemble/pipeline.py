"""The four-step ensemble procedure: blacklist construction, per-algorithm
bootstrap averaging into an arc pool, quantile-swept whitelisting with a
per-feature L1 criterion, and final constrained learning with linear-Gaussian
parameter annotation."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .dataset import Dataset, zero_fraction
from .ensemble import (
    ArcFrequencyTable,
    ArcPool,
    arc_strengths,
    bootstrap_average,
    build_pool,
    write_pool_csv,
)
from .errors import BnError, PipelineError
from .graphs import Arc, ConstraintSpec, Dag, _find_cycle
from .learners import AlgorithmId, LearnerConfig, learn
from .stats import fit_node_ols, predict_node

logger = logging.getLogger(__name__)


def build_blacklist(
    d: Dataset,
    blacklist: Iterable[Arc] = (),
    whitelist: Iterable[Arc] = (),
    roots: Iterable[str] = (),
    leaves: Iterable[str] = (),
    auto_leaves: bool = False,
    leaf_zero_threshold: float = 0.5,
) -> ConstraintSpec:
    """Expand domain knowledge into a full constraint specification.

    Roots admit no incoming arcs and leaves no outgoing ones; with
    ``auto_leaves`` every feature whose zero fraction strictly exceeds the
    threshold is treated as a leaf as well.
    """
    known = set(d.feature_names)
    for name in list(roots) + list(leaves):
        if name not in known:
            raise PipelineError(f"unknown node '{name}'", stage="blacklist")
    for u, v in list(blacklist) + list(whitelist):
        if u not in known or v not in known:
            raise PipelineError(f"unknown node in pair ({u}, {v})", stage="blacklist")
    leaf_set = set(leaves)
    if auto_leaves:
        for name in d.feature_names:
            if zero_fraction(d, name) > leaf_zero_threshold:
                leaf_set.add(name)
                logger.info("auto-detected leaf node %s", name)
    expanded = set(map(tuple, blacklist))
    for r in roots:
        expanded |= {(u, r) for u in d.feature_names if u != r}
    for leaf in leaf_set:
        expanded |= {(leaf, v) for v in d.feature_names if v != leaf}
    return ConstraintSpec(
        blacklist=frozenset(expanded),
        whitelist=frozenset(map(tuple, whitelist)),
        roots=frozenset(roots),
        leaves=frozenset(leaf_set),
    )


@dataclass(frozen=True)
class QuantileGrid:
    """Evenly spaced strength thresholds over the pooled p-value range."""

    n_quantiles: int
    thresholds: tuple[float, ...]

    def __post_init__(self):
        if self.n_quantiles < 2:
            raise PipelineError("quantile count must be >= 2", stage="grid")
        object.__setattr__(self, "thresholds", tuple(self.thresholds))


def quantile_grid(pool: ArcPool, n: int) -> QuantileGrid:
    """Thresholds Q_j = min + j * (max - min) / n for j = 1 .. n-1."""
    if n < 2:
        raise PipelineError("quantile count must be >= 2", stage="grid")
    strengths = pool.strengths()
    if not strengths:
        raise PipelineError("empty arc pool", stage="grid")
    lo, hi = min(strengths), max(strengths)
    if lo == hi:
        logger.warning(
            "all pooled strengths equal %.3g; sweep degenerates to one category", lo
        )
    return QuantileGrid(n, tuple(lo + j * (hi - lo) / n for j in range(1, n)))


def whitelist_candidates(pool: ArcPool, q: float) -> frozenset[Arc]:
    """Arcs with any record strength below q, deduplicated across directions.

    When both directions qualify only the better-supported one (smaller
    minimum p-value, ties lexicographic) is kept, so the result never
    contains a 2-cycle.
    """
    qualifying = {(r.from_, r.to) for r in pool.records if r.strength < q}
    out = set()
    for u, v in qualifying:
        if (v, u) not in qualifying:
            out.add((u, v))
            continue
        mine, theirs = pool.min_strength((u, v)), pool.min_strength((v, u))
        if mine < theirs or (mine == theirs and (u, v) < (v, u)):
            out.add((u, v))
    return frozenset(out)


def l1_penalized_loss(n_parents: int, n_obs: int, l1_sum: float) -> float:
    """The selection criterion itself: n_parents * log10(n_obs) + l1_sum."""
    return n_parents * math.log10(n_obs) + l1_sum


def l1_bic(d: Dataset, k: str, parents: Iterable[str]) -> float:
    """Per-feature selection criterion: |parents| * log10(n_obs) + L1 residual.

    Predictions come from the OLS fit of the feature on its parents; an empty
    parent set predicts the sample mean.
    """
    ps = sorted(set(parents))
    if k in ps:
        raise PipelineError(f"{k} cannot be its own parent", stage="selection")
    residuals = d.column(k) - predict_node(d, k, ps)
    return l1_penalized_loss(len(ps), d.n_obs, float(abs(residuals).sum()))


@dataclass(frozen=True)
class ParentSelection:
    """Outcome of the quantile sweep: per-feature chosen thresholds/parents."""

    chosen_j: Mapping[str, int]
    chosen_parents: Mapping[str, frozenset[str]]
    bic_table: tuple[tuple, ...]  # rows (feature, j, threshold, n_parents, l1, bic)
    selected_arcs: frozenset[Arc]
    diagnostic: tuple[tuple, ...]  # rows (threshold, whitelist_size, connectivity)

    def __post_init__(self):
        object.__setattr__(self, "chosen_j", dict(self.chosen_j))
        object.__setattr__(self, "chosen_parents", dict(self.chosen_parents))


def sweep_and_select(
    d: Dataset,
    pool: ArcPool,
    constraints: ConstraintSpec,
    grid: QuantileGrid,
    reference: AlgorithmId,
    cfg: LearnerConfig,
) -> ParentSelection:
    """Learn one constrained network per threshold and pick, per feature, the
    threshold whose parent set minimizes the L1 criterion (ties to the
    smallest threshold index)."""
    bic_rows = []
    diag_rows = []
    per_feature: dict[str, list[tuple[float, int, frozenset[str]]]] = {
        k: [] for k in d.feature_names
    }
    for j, q in enumerate(grid.thresholds, start=1):
        candidates = whitelist_candidates(pool, q)
        conflicted = {a for a in candidates if a in constraints.blacklist}
        if conflicted:
            logger.warning(
                "threshold %.4g: dropping %d candidate arc(s) conflicting with "
                "the blacklist",
                q,
                len(conflicted),
            )
        temp_whitelist = (candidates - conflicted) | constraints.whitelist
        temp_whitelist = resolve_cycles(
            temp_whitelist, pool, protected=constraints.whitelist
        )
        spec = ConstraintSpec(
            blacklist=constraints.blacklist,
            whitelist=temp_whitelist,
            roots=constraints.roots,
            leaves=constraints.leaves,
        )
        learned = learn(reference, d, spec, cfg)
        diag_rows.append((q, len(candidates), len(learned.arcs)))
        for k in d.feature_names:
            parents = frozenset(learned.parents(k))
            bic = l1_bic(d, k, parents)
            bic_rows.append((k, j, q, len(parents), bic - len(parents) * math.log10(d.n_obs), bic))
            per_feature[k].append((bic, j, parents))

    chosen_j: dict[str, int] = {}
    chosen_parents: dict[str, frozenset[str]] = {}
    selected: set[Arc] = set()
    for k, rows in per_feature.items():
        bic, j, parents = min(rows, key=lambda row: (row[0], row[1]))
        chosen_j[k] = j
        chosen_parents[k] = parents
        selected |= {(p, k) for p in parents}
    return ParentSelection(
        chosen_j,
        chosen_parents,
        tuple(bic_rows),
        frozenset(selected),
        tuple(diag_rows),
    )


def resolve_cycles(
    arcs: Iterable[Arc], pool: ArcPool, protected: frozenset[Arc] = frozenset()
) -> frozenset[Arc]:
    """Break directed cycles by removing the arc with the weakest pooled
    evidence (largest minimum p-value; arcs absent from the pool count as
    weakest; ties lexicographic). Protected arcs are never removed."""
    kept = set(arcs)
    nodes = tuple(sorted({n for arc in kept for n in arc}))
    while True:
        cycle = _find_cycle(nodes, frozenset(kept))
        if not cycle:
            return frozenset(kept)
        removable = [
            (u, v)
            for u, v in zip(cycle, cycle[1:])
            if (u, v) not in protected
        ]
        if not removable:
            raise PipelineError(
                "cycle consists entirely of protected arcs: "
                + " -> ".join(cycle),
                stage="whitelist",
            )
        weakest = max(removable, key=lambda a: (pool.min_strength(a), a))
        kept.discard(weakest)
        logger.info(
            "removed inconsistent arc %s -> %s (weakest evidence on a cycle)",
            *weakest,
        )


@dataclass(frozen=True)
class NodeParams:
    """Linear-Gaussian parameters of one node given its parents."""

    intercept: float
    parents: tuple[str, ...]
    coefficients: tuple[float, ...]
    residual_sd: float
    mean: float


@dataclass(frozen=True)
class FittedNetwork:
    """Final DAG with per-node linear-Gaussian parameters and arc signs."""

    dag: Dag
    params: Mapping[str, NodeParams]
    signs: Mapping[Arc, str]  # "promote" | "inhibit" | "neutral"

    def __post_init__(self):
        object.__setattr__(self, "params", dict(self.params))
        object.__setattr__(self, "signs", dict(self.signs))

    def coefficient(self, u: str, v: str) -> float:
        node = self.params[v]
        return node.coefficients[node.parents.index(u)]


def fit_parameters(g: Dag, d: Dataset) -> FittedNetwork:
    """OLS-fit every node on its parents; sign arcs by coefficient sign."""
    params: dict[str, NodeParams] = {}
    signs: dict[Arc, str] = {}
    for v in g.nodes:
        parents = tuple(sorted(g.parents(v)))
        intercept, coefs, sd = fit_node_ols(d, v, parents)
        params[v] = NodeParams(
            intercept,
            parents,
            tuple(coefs),
            sd,
            float(d.means[d.column_index(v)]),
        )
        for p, b in zip(parents, coefs):
            if b > 0:
                signs[(p, v)] = "promote"
            elif b < 0:
                signs[(p, v)] = "inhibit"
            else:
                logger.warning("arc %s -> %s has a zero coefficient", p, v)
                signs[(p, v)] = "neutral"
    return FittedNetwork(g, params, signs)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one full run needs (CLI surfaces this as JSON)."""

    algorithms: tuple[AlgorithmId, ...]
    replicates: int = 500
    threshold: float | str = "auto"
    quantiles: int = 10
    reference: AlgorithmId = AlgorithmId.TABU
    learner: LearnerConfig = LearnerConfig()
    blacklist: frozenset[Arc] = frozenset()
    whitelist: frozenset[Arc] = frozenset()
    roots: frozenset[str] = frozenset()
    leaves: frozenset[str] = frozenset()
    auto_leaves: bool = False
    leaf_zero_threshold: float = 0.5
    seed: int = 0


@dataclass
class PipelineResult:
    constraints: ConstraintSpec
    singles: dict[AlgorithmId, tuple[ArcFrequencyTable, Dag, dict[Arc, float]]]
    pool: ArcPool
    grid: QuantileGrid
    selection: ParentSelection
    final_whitelist: frozenset[Arc]
    network: FittedNetwork
    strengths: dict[Arc, float]
    metadata: dict = field(default_factory=dict)


def run_pipeline(
    d: Dataset,
    cfg: PipelineConfig,
    out_dir: Optional[Path] = None,
    digest: str = "",
    workers: int = 1,
) -> PipelineResult:
    """Execute the four steps in order, writing intermediate artifacts as each
    stage completes so a failure still leaves everything up to that stage."""

    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PipelineError:
            raise
        except BnError as exc:
            raise PipelineError(str(exc), stage=name) from exc

    out = Path(out_dir) if out_dir is not None else None

    constraints = stage(
        "blacklist",
        build_blacklist,
        d,
        cfg.blacklist,
        cfg.whitelist,
        cfg.roots,
        cfg.leaves,
        cfg.auto_leaves,
        cfg.leaf_zero_threshold,
    )
    if out:
        _write_pairs_csv(out / "blacklist.csv", sorted(constraints.blacklist), digest)

    singles: dict[AlgorithmId, tuple[ArcFrequencyTable, Dag, dict[Arc, float]]] = {}
    for alg in cfg.algorithms:
        table, averaged = stage(
            f"bootstrap[{alg.value}]",
            bootstrap_average,
            alg,
            d,
            constraints,
            cfg.learner,
            cfg.replicates,
            cfg.seed,
            cfg.threshold,
            workers,
        )
        strengths = stage(f"strength[{alg.value}]", arc_strengths, averaged, d)
        singles[alg] = (table, averaged, strengths)
        logger.info(
            "%s: %d averaged arcs from %d replicates",
            alg.value,
            len(averaged.arcs),
            table.replicate_count,
        )
    pool = stage(
        "pool", build_pool, [(a, g, s) for a, (_, g, s) in singles.items()]
    )
    if out:
        write_pool_csv(pool, out / "arcs_pool.csv", digest)

    if len(pool) == 0:
        # No algorithm kept any arc: nothing to sweep, whitelist is empty.
        logger.warning("arc pool is empty; skipping the threshold sweep")
        grid = QuantileGrid(cfg.quantiles, ())
        selection = ParentSelection(
            {k: 0 for k in d.feature_names},
            {k: frozenset() for k in d.feature_names},
            (),
            frozenset(),
            (),
        )
    else:
        grid = stage("grid", quantile_grid, pool, cfg.quantiles)
        selection = stage(
            "selection", sweep_and_select, d, pool, constraints, grid,
            cfg.reference, cfg.learner,
        )
    if out:
        _write_bic_csv(out / "bic_table.csv", selection.bic_table, digest)
        _write_diagnostic_csv(out / "diagnostic.csv", selection.diagnostic, digest)

    final_whitelist = stage(
        "whitelist",
        resolve_cycles,
        selection.selected_arcs | constraints.whitelist,
        pool,
        constraints.whitelist,
    )
    final_whitelist = frozenset(
        a for a in final_whitelist if a not in constraints.blacklist
    )
    if out:
        _write_pairs_csv(out / "whitelist.csv", sorted(final_whitelist), digest)

    final_spec = ConstraintSpec(
        blacklist=constraints.blacklist,
        whitelist=final_whitelist,
        roots=constraints.roots,
        leaves=constraints.leaves,
    )
    final_dag = stage("final-learn", learn, cfg.reference, d, final_spec, cfg.learner)
    network = stage("fit", fit_parameters, final_dag, d)
    strengths = stage("strength[final]", arc_strengths, final_dag, d)

    metadata = {
        "config_digest": digest,
        "seed": cfg.seed,
        "reference": cfg.reference.value,
        "quantiles": cfg.quantiles,
        "replicates": cfg.replicates,
        "threshold": cfg.threshold if cfg.threshold == "auto" else float(cfg.threshold),
        "algorithms": [a.value for a in cfg.algorithms],
    }
    return PipelineResult(
        constraints=constraints,
        singles=singles,
        pool=pool,
        grid=grid,
        selection=selection,
        final_whitelist=final_whitelist,
        network=network,
        strengths=strengths,
        metadata=metadata,
    )


def _write_pairs_csv(path: Path, pairs: Sequence[Arc], digest: str) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        if digest:
            fh.write(f"# config_digest={digest}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["from", "to"])
        writer.writerows(pairs)


def _write_bic_csv(path: Path, rows: Sequence[tuple], digest: str) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        if digest:
            fh.write(f"# config_digest={digest}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["feature", "j", "threshold", "n_parents", "l1", "bic"])
        for feature, j, q, n_parents, l1, bic in rows:
            writer.writerow([feature, j, repr(q), n_parents, repr(l1), repr(bic)])


def _write_diagnostic_csv(path: Path, rows: Sequence[tuple], digest: str) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        if digest:
            fh.write(f"# config_digest={digest}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold", "whitelist_size", "connectivity"])
        for q, size, connectivity in rows:
            writer.writerow([repr(q), size, connectivity])
