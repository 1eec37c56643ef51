"""Ensemble Bayesian causal network inference.

Runs a roster of structure-learning algorithms under bootstrap resampling,
pools their arcs with p-value strengths, selects a whitelist by a
quantile-swept per-feature criterion, and learns a final annotated
linear-Gaussian DAG.
"""

from .dataset import Dataset, bootstrap_resample, load_csv, standardize, write_csv, zero_fraction
from .graphs import (
    ConstraintSpec,
    Dag,
    Pdag,
    creates_cycle,
    d_separated,
    extend_to_dag,
    meek_closure,
    shd,
    topological_sort,
)
from .stats import (
    CiResult,
    CorrelationMatrix,
    bic_g_score,
    ci_test,
    correlation_matrix,
    fit_node_ols,
    gauss_mi,
    partial_correlation,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "load_csv",
    "write_csv",
    "zero_fraction",
    "bootstrap_resample",
    "standardize",
    "Dag",
    "Pdag",
    "ConstraintSpec",
    "creates_cycle",
    "topological_sort",
    "d_separated",
    "meek_closure",
    "extend_to_dag",
    "shd",
    "CorrelationMatrix",
    "CiResult",
    "correlation_matrix",
    "partial_correlation",
    "ci_test",
    "gauss_mi",
    "bic_g_score",
    "fit_node_ols",
    "__version__",
]
