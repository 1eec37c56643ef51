"""Load, validate, and resample observational datasets.

A :class:`Dataset` is an immutable column-named numeric matrix. Sufficient
statistics (means, covariance, correlation) are computed lazily and cached on
the instance, so repeated statistical queries against the same data cost one
pass over the rows in total.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)  # ndarray fields: identity equality only
class Dataset:
    """n_obs x n_features matrix of finite reals with unique column names."""

    feature_names: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        names = tuple(str(n) for n in self.feature_names)
        object.__setattr__(self, "feature_names", names)
        if not names:
            raise DataError("dataset must have at least one feature")
        if any(not n for n in names):
            raise DataError("feature names must be non-empty")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DataError(f"duplicate feature names: {', '.join(dupes)}")
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != len(names):
            raise DataError(
                f"values must be a 2-d matrix with {len(names)} columns, "
                f"got shape {arr.shape}"
            )
        if arr.size and not np.isfinite(arr).all():
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise DataError(
                f"non-finite value at row {bad[0] + 1}, column "
                f"'{names[bad[1]]}': missing values are not supported"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if 0 < self.n_obs < self.n_features + 3:
            logger.warning(
                "dataset has %d rows for %d features; conditional-independence "
                "tests will run out of degrees of freedom for large "
                "conditioning sets",
                self.n_obs,
                self.n_features,
            )

    @property
    def n_obs(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.feature_names)}

    def column_index(self, feature: str) -> int:
        try:
            return self._index[feature]
        except KeyError:
            raise DataError(f"unknown feature: '{feature}'") from None

    def column(self, feature: str) -> np.ndarray:
        return self.values[:, self.column_index(feature)]

    # Sufficient statistics. Covariance uses the MLE divisor n so that
    # OLS residual variances derived from it match direct fits exactly.
    @cached_property
    def means(self) -> np.ndarray:
        return self.values.mean(axis=0)

    @cached_property
    def covariance(self) -> np.ndarray:
        centered = self.values - self.means
        return (centered.T @ centered) / self.n_obs

    @cached_property
    def correlation(self) -> np.ndarray:
        sd = np.sqrt(np.diag(self.covariance))
        if np.any(sd <= 0):
            bad = [self.feature_names[i] for i in np.flatnonzero(sd <= 0)]
            raise DataError(f"constant column(s): {', '.join(bad)}")
        corr = self.covariance / np.outer(sd, sd)
        corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
        np.fill_diagonal(corr, 1.0)
        return corr


def load_csv(path) -> Dataset:
    """Parse a header-first numeric CSV into a Dataset.

    Errors name the offending row/column; locale-independent (dot decimal).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows: list[list[float]] = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) != len(header):
                raise DataError(
                    f"{path}: row {lineno} has {len(raw)} cells, expected "
                    f"{len(header)}"
                )
            parsed = []
            for col, cell in enumerate(raw):
                text = cell.strip()
                try:
                    value = float(text)
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric cell at row {lineno}, column "
                        f"'{header[col]}': {text!r}"
                    ) from None
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: no data rows after the header")
    return Dataset(tuple(header), np.array(rows, dtype=float))


def write_csv(d: Dataset, path) -> None:
    """Serialize back to CSV; floats use shortest round-trip formatting."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(d.feature_names)
        for row in d.values:
            writer.writerow([repr(float(v)) for v in row])


def zero_fraction(d: Dataset, feature: str) -> float:
    """Fraction of rows where the feature equals 0.0 exactly.

    Exact equality is deliberate: the motivating case is detection dropout
    producing literal zeros.
    """
    col = d.column(feature)
    if d.n_obs == 0:
        return 0.0
    return float(np.count_nonzero(col == 0.0)) / d.n_obs


def bootstrap_resample(d: Dataset, seed: int) -> Dataset:
    """Draw n_obs rows uniformly with replacement; deterministic given seed."""
    if d.n_obs == 0:
        raise DataError("cannot resample an empty dataset")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, d.n_obs, size=d.n_obs)
    return Dataset(d.feature_names, d.values[idx])


def standardize(d: Dataset, allow_constant: bool = False) -> Dataset:
    """Rescale every column to sample mean 0 and sample sd 1 (divisor n-1).

    Constant columns are an error unless ``allow_constant`` is set, in which
    case they are centered to all-zeros.
    """
    if d.n_obs < 2:
        raise DataError("standardize needs at least 2 rows")
    sd = d.values.std(axis=0, ddof=1)
    if np.any(sd == 0) and not allow_constant:
        bad = [d.feature_names[i] for i in np.flatnonzero(sd == 0)]
        raise DataError(
            f"constant column(s): {', '.join(bad)} "
            "(pass allow_constant=True to center them to zeros)"
        )
    safe_sd = np.where(sd == 0, 1.0, sd)
    return Dataset(d.feature_names, (d.values - d.values.mean(axis=0)) / safe_sd)
