"""Ground-truth generator and recovery scorer for desk-scale validation:
random DAGs, linear-Gaussian structural equation sampling, and benchmark
sweeps comparing single algorithms against the full pipeline."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset
from .ensemble import bootstrap_average
from .errors import BnError, GraphError
from .graphs import ConstraintSpec, Dag, shd
from .learners import AlgorithmId, LearnerConfig
from .pipeline import FittedNetwork, NodeParams, PipelineConfig, run_pipeline
from .sampling import forward_sample
from .util import derive_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroundTruth:
    """A known linear-Gaussian generating model.

    Coefficient magnitudes stay in [0.5, 2.0] (bounded away from zero for
    identifiability) and residual sds in [0.2, 1.0].
    """

    dag: Dag
    params: Mapping[str, NodeParams]

    def __post_init__(self):
        object.__setattr__(self, "params", dict(self.params))
        for v, p in self.params.items():
            if p.residual_sd < 0:  # 0 is allowed: deterministic mechanisms
                raise GraphError(f"residual sd of {v} must be non-negative")

    def as_network(self) -> FittedNetwork:
        signs = {}
        for v, p in self.params.items():
            for parent, beta in zip(p.parents, p.coefficients):
                signs[(parent, v)] = "promote" if beta > 0 else "inhibit"
        return FittedNetwork(self.dag, dict(self.params), signs)


def random_dag(n_nodes: int, expected_degree: float, seed: int) -> Dag:
    """Uniform node order, each forward pair kept independently with
    probability expected_degree / (n_nodes - 1)."""
    if n_nodes < 1:
        raise GraphError("need at least one node")
    if expected_degree < 0:
        raise GraphError("expected_degree must be >= 0")
    width = len(str(n_nodes - 1)) if n_nodes > 1 else 1
    names = tuple(f"X{i:0{width}d}" for i in range(n_nodes))
    rng = np.random.default_rng(seed)
    order = list(names)
    rng.shuffle(order)
    p = expected_degree / (n_nodes - 1) if n_nodes > 1 else 0.0
    arcs = {
        (order[i], order[j])
        for i, j in combinations(range(n_nodes), 2)
        if rng.random() < p
    }
    return Dag(names, frozenset(arcs))


def random_ground_truth(dag: Dag, seed: int) -> GroundTruth:
    rng = np.random.default_rng(seed)
    params = {}
    for v in sorted(dag.nodes):
        parents = tuple(sorted(dag.parents(v)))
        coefs = tuple(
            float(rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])) for _ in parents
        )
        params[v] = NodeParams(
            intercept=float(rng.uniform(-1.0, 1.0)),
            parents=parents,
            coefficients=coefs,
            residual_sd=float(rng.uniform(0.2, 1.0)),
            mean=0.0,  # filled by fits, not meaningful for ground truth
        )
    return GroundTruth(dag, params)


def sample_sem(gt: GroundTruth, n: int, seed: int) -> Dataset:
    """Topological-order sampling from the ground-truth model."""
    return forward_sample(gt.as_network(), n, seed)


@dataclass(frozen=True)
class RecoveryScore:
    shd: int
    precision: float
    recall: float
    f1: float
    skeleton_precision: float
    skeleton_recall: float


def _prf(true_set: set, learned_set: set) -> tuple[float, float, float]:
    # Empty-prediction precision (and empty-truth recall) default to 1.0 so
    # a perfectly empty match is not penalized by 0/0.
    tp = len(true_set & learned_set)
    precision = tp / len(learned_set) if learned_set else 1.0
    recall = tp / len(true_set) if true_set else 1.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return precision, recall, f1


def score_recovery(truth: Dag, learned: Dag) -> RecoveryScore:
    if set(truth.nodes) != set(learned.nodes):
        raise GraphError("node sets differ")
    precision, recall, f1 = _prf(set(truth.arcs), set(learned.arcs))
    skel_p, skel_r, _ = _prf(
        {frozenset(a) for a in truth.arcs}, {frozenset(a) for a in learned.arcs}
    )
    return RecoveryScore(
        shd=shd(truth, learned),
        precision=precision,
        recall=recall,
        f1=f1,
        skeleton_precision=skel_p,
        skeleton_recall=skel_r,
    )


@dataclass(frozen=True)
class BenchConfig:
    """Grid of benchmark cells plus the learner/pipeline settings to score."""

    algorithms: tuple[AlgorithmId, ...]
    n_nodes: tuple[int, ...] = (8,)
    n_obs: tuple[int, ...] = (2000,)
    seeds: tuple[int, ...] = (0, 1, 2)
    expected_degree: float = 2.0
    replicates: int = 100
    quantiles: int = 5
    reference: AlgorithmId = AlgorithmId.TABU
    learner: LearnerConfig = LearnerConfig()
    run_ensemble: bool = True


@dataclass(frozen=True)
class BenchRow:
    n_nodes: int
    n_obs: int
    seed: int
    algorithm: str
    shd: int
    precision: float
    recall: float
    f1: float
    skeleton_f1: float
    runtime_ms: float
    error: str = ""


def benchmark_suite(config: BenchConfig, workers: int = 1) -> list[BenchRow]:
    """Run every (n_nodes, n_obs, seed) cell; one failed cell never aborts
    the suite, it produces an error row instead."""
    rows: list[BenchRow] = []
    for n_nodes in config.n_nodes:
        for n_obs in config.n_obs:
            for seed in config.seeds:
                rows.extend(_run_cell(config, n_nodes, n_obs, seed, workers))
    return rows


def _run_cell(
    config: BenchConfig, n_nodes: int, n_obs: int, seed: int, workers: int
) -> list[BenchRow]:
    truth = random_ground_truth(
        random_dag(n_nodes, config.expected_degree, derive_seed(seed, "dag")),
        derive_seed(seed, "params"),
    )
    data = sample_sem(truth, n_obs, derive_seed(seed, "data"))
    rows = []

    def scored(name: str, dag: Dag, elapsed: float) -> BenchRow:
        s = score_recovery(truth.dag, dag)
        skel_f1 = (
            2 * s.skeleton_precision * s.skeleton_recall
            / (s.skeleton_precision + s.skeleton_recall)
            if s.skeleton_precision + s.skeleton_recall > 0
            else 0.0
        )
        return BenchRow(
            n_nodes, n_obs, seed, name, s.shd, s.precision, s.recall, s.f1,
            skel_f1, round(elapsed * 1000.0, 3),
        )

    for alg in config.algorithms:
        start = time.perf_counter()
        try:
            _, averaged = bootstrap_average(
                alg,
                data,
                ConstraintSpec(),
                config.learner,
                config.replicates,
                seed,
                workers=workers,
            )
            rows.append(scored(alg.value, averaged, time.perf_counter() - start))
        except BnError as exc:
            logger.warning("cell (%d, %d, %d) %s failed: %s", n_nodes, n_obs, seed, alg.value, exc)
            rows.append(
                BenchRow(n_nodes, n_obs, seed, alg.value, -1, 0, 0, 0, 0, 0, str(exc))
            )
    if config.run_ensemble:
        start = time.perf_counter()
        try:
            result = run_pipeline(
                data,
                PipelineConfig(
                    algorithms=config.algorithms,
                    replicates=config.replicates,
                    quantiles=config.quantiles,
                    reference=config.reference,
                    learner=config.learner,
                    seed=seed,
                ),
                workers=workers,
            )
            rows.append(
                scored("ENSEMBLE", result.network.dag, time.perf_counter() - start)
            )
        except BnError as exc:
            logger.warning("cell (%d, %d, %d) ensemble failed: %s", n_nodes, n_obs, seed, exc)
            rows.append(
                BenchRow(n_nodes, n_obs, seed, "ENSEMBLE", -1, 0, 0, 0, 0, 0, str(exc))
            )
    return rows


def write_bench_csv(rows: Sequence[BenchRow], path, digest: str = "") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if digest:
            fh.write(f"# config_digest={digest}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "n_nodes", "n_obs", "seed", "algorithm", "shd", "precision",
                "recall", "f1", "skeleton_f1", "runtime_ms", "error",
            ]
        )
        for r in rows:
            writer.writerow(
                [
                    r.n_nodes, r.n_obs, r.seed, r.algorithm, r.shd,
                    repr(r.precision), repr(r.recall), repr(r.f1),
                    repr(r.skeleton_f1), repr(r.runtime_ms), r.error,
                ]
            )
