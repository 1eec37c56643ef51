"""Gaussian statistics: correlations, the exact t-test for conditional
independence, Gaussian mutual information, node-level BIC scoring, and OLS
node fits.

Everything here is a pure function of its inputs. All conditional quantities
are derived from the dataset's cached covariance, so the cost of a test does
not grow with the number of observations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as spstats

from .dataset import Dataset
from .errors import (
    DataError,
    DegenerateTestError,
    DofExhaustionError,
    SingularDesignError,
)

logger = logging.getLogger(__name__)

# Correlations are clamped this far from +-1 before the t transform; exact
# +-1 maps to p = 0 instead.
_CLAMP = 1e-12


@dataclass(frozen=True, eq=False)  # ndarray field: identity equality only
class CorrelationMatrix:
    """Pearson correlation matrix with named rows/columns."""

    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        arr = np.asarray(self.values, dtype=float)
        n = len(self.names)
        if arr.shape != (n, n):
            raise DataError(f"correlation matrix must be {n}x{n}, got {arr.shape}")
        if np.max(np.abs(arr - arr.T), initial=0.0) > 1e-12:
            raise DataError("correlation matrix is not symmetric")
        if not np.allclose(np.diag(arr), 1.0, rtol=0, atol=0):
            raise DataError("correlation matrix diagonal must be exactly 1")
        if n and np.linalg.eigvalsh(arr).min() < -1e-9:
            raise DataError("correlation matrix is not positive semi-definite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown feature: '{name}'") from None


@dataclass(frozen=True)
class CiResult:
    """Outcome of one conditional-independence t-test."""

    statistic: float
    p_value: float
    dof: int
    partial_corr: float


def correlation_matrix(d: Dataset) -> CorrelationMatrix:
    return CorrelationMatrix(d.feature_names, d.correlation)


def partial_correlation(
    corr: CorrelationMatrix, x: str, y: str, z: Iterable[str] = ()
) -> float:
    """Partial correlation of x and y given z, by sub-matrix inversion.

    rho_{xy.z} = -Omega_xy / sqrt(Omega_xx * Omega_yy) where Omega is the
    inverse of the correlation submatrix over (x, y, *z). Result is clamped
    to [-1, 1].
    """
    zs = sorted(set(z))
    if x == y:
        raise DataError("x and y must differ")
    if x in zs or y in zs:
        raise DataError("x and y must not appear in the conditioning set")
    x, y = sorted((x, y))  # canonical order: result is exactly symmetric
    idx = [corr.index(x), corr.index(y)] + [corr.index(w) for w in zs]
    sub = corr.values[np.ix_(idx, idx)]
    if not zs:
        return float(sub[0, 1])
    try:
        omega = np.linalg.inv(sub)
    except np.linalg.LinAlgError:
        raise DegenerateTestError(
            f"singular correlation submatrix for ({x}, {y} | {', '.join(zs)})"
        ) from None
    denom = omega[0, 0] * omega[1, 1]
    if not np.isfinite(omega).all() or denom <= 0:
        raise DegenerateTestError(
            f"degenerate partial correlation for ({x}, {y} | {', '.join(zs)})"
        )
    rho = -omega[0, 1] / math.sqrt(denom)
    return float(min(1.0, max(-1.0, rho)))


def ci_test(d: Dataset, x: str, y: str, z: Iterable[str] = ()) -> CiResult:
    """Exact t-test for the (partial) Pearson correlation of x and y given z.

    t = r * sqrt(dof / (1 - r^2)) with dof = n_obs - |z| - 2; the p-value is
    the two-sided Student-t tail probability. |r| = 1 yields p = 0.
    """
    zs = sorted(set(z))
    dof = d.n_obs - len(zs) - 2
    if dof < 1:
        raise DofExhaustionError(
            f"testing ({x}, {y}) given {len(zs)} variables needs at least "
            f"{len(zs) + 3} observations, have {d.n_obs}",
            zs,
        )
    r = partial_correlation(correlation_matrix(d), x, y, zs)
    if abs(r) >= 1.0 - 1e-15:  # saturated within double precision
        return CiResult(math.inf if r > 0 else -math.inf, 0.0, dof, r)
    r_safe = min(1.0 - _CLAMP, max(-1.0 + _CLAMP, r))
    t = r_safe * math.sqrt(dof / (1.0 - r_safe * r_safe))
    p = 2.0 * float(spstats.t.sf(abs(t), dof))
    return CiResult(t, min(1.0, p), dof, r)


def gauss_mi(d: Dataset, x: str, y: str, z: Iterable[str] = ()) -> float:
    """Gaussian (conditional) mutual information -0.5 * ln(1 - r^2).

    Saturated correlation (|r| = 1) reports +inf rather than raising.
    """
    zs = sorted(set(z))
    if d.n_obs - len(zs) - 2 < 1:
        raise DofExhaustionError(
            f"mutual information ({x}, {y}) given {len(zs)} variables needs "
            f"more observations than {d.n_obs}",
            zs,
        )
    r = partial_correlation(correlation_matrix(d), x, y, zs)
    if abs(r) >= 1.0:
        return math.inf
    return -0.5 * math.log1p(-r * r)


def _conditional_variance(d: Dataset, v: str, parents: Sequence[str]):
    """MLE residual variance and coefficients of v regressed on parents.

    Solved from the cached covariance, so repeated calls are O(k^3), not O(n).
    Returns (variance, beta) or raises SingularDesignError.
    """
    vi = d.column_index(v)
    if not parents:
        return float(d.covariance[vi, vi]), np.empty(0)
    pi = [d.column_index(p) for p in parents]
    s_pp = d.covariance[np.ix_(pi, pi)]
    s_pv = d.covariance[pi, vi]
    try:
        if len(pi) > 1 and np.linalg.cond(s_pp) > 1e10:
            raise np.linalg.LinAlgError
        beta = np.linalg.solve(s_pp, s_pv)
    except np.linalg.LinAlgError:
        raise SingularDesignError(
            f"collinear parents for {v}: {', '.join(parents)}"
        ) from None
    if not np.isfinite(beta).all():
        raise SingularDesignError(f"ill-conditioned fit for {v}")
    var = float(d.covariance[vi, vi] - s_pv @ beta)
    return max(var, 0.0), beta


def bic_g_score(d: Dataset, v: str, parents: Iterable[str]) -> float:
    """Gaussian BIC node score: logL minus (|parents| + 2)/2 * ln(n_obs).

    Decomposable; higher is better. Collinear parents score -inf so search
    never selects them.
    """
    ps = sorted(set(parents))
    if v in ps:
        raise DataError(f"{v} cannot be its own parent")
    n = d.n_obs
    if len(ps) > n - 2:
        raise DofExhaustionError(
            f"scoring {v} with {len(ps)} parents needs more than {n} rows", ps
        )
    try:
        var, _ = _conditional_variance(d, v, ps)
    except SingularDesignError as exc:
        logger.debug("score sentinel -inf: %s", exc)
        return -math.inf
    var = max(var, 1e-100)  # exact fits otherwise produce log(0)
    loglik = -0.5 * n * (math.log(2.0 * math.pi * var) + 1.0)
    return loglik - 0.5 * (len(ps) + 2) * math.log(n)


def fit_node_ols(
    d: Dataset, v: str, parents: Sequence[str]
) -> tuple[float, list[float], float]:
    """Least-squares fit of v on parents.

    Returns (intercept, coefficients in parents order, residual sd with the
    MLE divisor n_obs).
    """
    ps = list(parents)
    if v in ps:
        raise DataError(f"{v} cannot be its own parent")
    if len(set(ps)) != len(ps):
        raise DataError(f"duplicate parents for {v}")
    if len(ps) >= d.n_obs:
        raise SingularDesignError(
            f"{len(ps)} parents with only {d.n_obs} observations"
        )
    var, beta = _conditional_variance(d, v, ps)
    mean_v = float(d.means[d.column_index(v)])
    mean_p = np.array([d.means[d.column_index(p)] for p in ps])
    intercept = mean_v - float(beta @ mean_p) if ps else mean_v
    return intercept, [float(b) for b in beta], math.sqrt(var)


def predict_node(
    d: Dataset, v: str, parents: Sequence[str]
) -> np.ndarray:
    """Fitted values for v from its OLS fit (sample mean when parentless)."""
    intercept, coefs, _ = fit_node_ols(d, v, parents)
    pred = np.full(d.n_obs, intercept)
    for p, b in zip(parents, coefs):
        pred += b * d.column(p)
    return pred


def bh_adjust(p_values: Sequence[float]) -> list[float]:
    """Benjamini-Hochberg step-up adjusted p-values (monotone, clamped to 1)."""
    m = len(p_values)
    if m == 0:
        return []
    order = sorted(range(m), key=lambda i: p_values[i])
    adjusted = [0.0] * m
    running = 1.0
    for rank in range(m, 0, -1):
        i = order[rank - 1]
        running = min(running, p_values[i] * m / rank)
        adjusted[i] = min(1.0, running)
    return adjusted
