"""Posterior sampling on fitted networks: ancestral (forward) sampling and
likelihood-weighted conditional queries."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset
from .errors import DataError, StatsError
from .graphs import topological_sort
from .pipeline import FittedNetwork, NodeParams

logger = logging.getLogger(__name__)

# Tolerance for matching evidence against a deterministic (sd = 0) node.
_EXACT_TOL = 1e-9


def _sample_columns(
    net: FittedNetwork,
    n: int,
    rng: np.random.Generator,
    clamped: Mapping[str, float] | None = None,
) -> dict[str, np.ndarray]:
    """Sample all nodes in topological order; clamped nodes stay constant."""
    clamped = clamped or {}
    columns: dict[str, np.ndarray] = {}
    for v in topological_sort(net.dag):
        if v in clamped:
            columns[v] = np.full(n, float(clamped[v]))
            continue
        p = net.params[v]
        mean = np.full(n, p.intercept)
        for parent, beta in zip(p.parents, p.coefficients):
            mean += beta * columns[parent]
        if p.residual_sd > 0:
            columns[v] = mean + rng.normal(0.0, p.residual_sd, size=n)
        else:
            columns[v] = mean
    return columns


def forward_sample(net: FittedNetwork, n: int, seed: int) -> Dataset:
    """Draw n joint samples from the fitted linear-Gaussian network."""
    names = tuple(sorted(net.dag.nodes))
    if n == 0:
        return Dataset(names, np.empty((0, len(names))))
    rng = np.random.default_rng(seed)
    columns = _sample_columns(net, n, rng)
    return Dataset(names, np.column_stack([columns[v] for v in names]))


@dataclass(frozen=True, eq=False)  # ndarray fields: identity equality only
class QueryResult:
    """Weighted posterior samples for the requested targets."""

    targets: tuple[str, ...]
    samples: dict[str, np.ndarray]
    weights: np.ndarray
    effective_sample_size: float

    def mean(self, target: str) -> float:
        w = self.weights
        return float((self.samples[target] * w).sum() / w.sum())

    def standard_error(self, target: str) -> float:
        """Delta-method Monte-Carlo standard error of the weighted mean."""
        w = self.weights
        x = self.samples[target]
        mu = self.mean(target)
        return float(np.sqrt((w**2 * (x - mu) ** 2).sum()) / w.sum())


def conditional_query(
    net: FittedNetwork,
    evidence: Mapping[str, float],
    targets: Sequence[str],
    n: int,
    seed: int,
) -> QueryResult:
    """Likelihood weighting: evidence nodes are clamped and every sample is
    weighted by the Gaussian density of each clamped value given its sampled
    parents. Reports the effective sample size so query quality is visible."""
    nodes = set(net.dag.nodes)
    for name in list(evidence) + list(targets):
        if name not in nodes:
            raise DataError(f"unknown node: '{name}'")
    overlap = set(targets) & set(evidence)
    if overlap:
        raise DataError(f"targets also in evidence: {sorted(overlap)}")
    for name, value in evidence.items():
        if not math.isfinite(float(value)):
            raise DataError(f"evidence for {name} must be finite")
    if n < 1:
        raise DataError("need at least one sample")

    rng = np.random.default_rng(seed)
    columns = _sample_columns(net, n, rng, clamped=evidence)
    log_w = np.zeros(n)
    for v in sorted(evidence):
        p: NodeParams = net.params[v]
        mean = np.full(n, p.intercept)
        for parent, beta in zip(p.parents, p.coefficients):
            mean += beta * columns[parent]
        value = float(evidence[v])
        if p.residual_sd > 0:
            log_w += (
                -0.5 * ((value - mean) / p.residual_sd) ** 2
                - math.log(p.residual_sd)
                - 0.5 * math.log(2 * math.pi)
            )
        else:
            log_w = np.where(np.abs(value - mean) <= _EXACT_TOL, log_w, -np.inf)
    peak = np.max(log_w)
    if not np.isfinite(peak):
        raise StatsError(
            "all sample weights are zero: evidence is impossible under the model"
        )
    weights = np.exp(log_w - peak)
    ess = float(weights.sum() ** 2 / (weights**2).sum())
    if ess < 10:
        logger.warning("effective sample size %.1f; query estimates are noisy", ess)
    return QueryResult(
        tuple(targets),
        {t: columns[t] for t in targets},
        weights,
        ess,
    )
