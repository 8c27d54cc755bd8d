"""Domain types shared across the package.

Arrays handed to these containers are copied and frozen, so instances can be
shared freely between readers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


def _frozen(a, dtype=None) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _as_binary(a, name: str) -> np.ndarray:
    arr = np.asarray(a)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ValueError(f"{name} must contain only 0/1 values")
    return _frozen(arr, dtype=np.int64)


@dataclass(frozen=True)
class LabeledDataset:
    """Fully labeled data: features plus binary classes.

    ``propensity_attr_indices`` is empty unless the simulator appended
    propensity attributes.
    """

    features: np.ndarray
    classes: np.ndarray
    propensity_attr_indices: tuple = ()

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        y = _as_binary(self.classes, "classes")
        if X.shape[0] != y.shape[0]:
            raise ValueError(
                f"row count mismatch: {X.shape[0]} feature rows vs {y.shape[0]} classes"
            )
        idx = tuple(int(i) for i in self.propensity_attr_indices)
        _check_indices(idx, X.shape[1])
        object.__setattr__(self, "features", _frozen(X, float))
        object.__setattr__(self, "classes", y)
        object.__setattr__(self, "propensity_attr_indices", idx)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows)
        return LabeledDataset(
            self.features[rows], self.classes[rows], self.propensity_attr_indices
        )


def _check_indices(idx: Sequence[int], n_cols: int) -> None:
    if len(set(idx)) != len(idx):
        raise ValueError("propensity attribute indices must be distinct")
    for i in idx:
        if not 0 <= i < n_cols:
            raise ValueError(f"propensity attribute index {i} out of range [0, {n_cols})")


@dataclass(frozen=True)
class PUDataset:
    """Positive-unlabeled data.

    ``observed`` is the label indicator s.  ``hidden_classes`` and
    ``true_propensity`` are only known for simulated data and are used for
    evaluation, never for training PU methods.

    Construction checks shapes only; semantic invariants are reported by
    :func:`validate_pu` so that broken files can still be inspected.
    """

    features: np.ndarray
    observed: np.ndarray
    hidden_classes: Optional[np.ndarray] = None
    true_propensity: Optional[np.ndarray] = None
    propensity_attr_indices: tuple = ()

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        n = X.shape[0]
        s = _as_binary(self.observed, "observed")
        if s.shape[0] != n:
            raise ValueError("observed length does not match feature rows")
        y = self.hidden_classes
        if y is not None:
            y = _as_binary(y, "hidden_classes")
            if y.shape[0] != n:
                raise ValueError("hidden_classes length does not match feature rows")
        e = self.true_propensity
        if e is not None:
            e = _frozen(np.asarray(e, dtype=float).ravel(), float)
            if e.shape[0] != n:
                raise ValueError("true_propensity length does not match feature rows")
        object.__setattr__(self, "features", _frozen(X, float))
        object.__setattr__(self, "observed", s)
        object.__setattr__(self, "hidden_classes", y)
        object.__setattr__(self, "true_propensity", e)
        object.__setattr__(
            self, "propensity_attr_indices", tuple(int(i) for i in self.propensity_attr_indices)
        )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def propensity_features(self) -> np.ndarray:
        return self.features[:, list(self.propensity_attr_indices)]

    def subset(self, rows) -> "PUDataset":
        rows = np.asarray(rows)
        return PUDataset(
            self.features[rows],
            self.observed[rows],
            None if self.hidden_classes is None else self.hidden_classes[rows],
            None if self.true_propensity is None else self.true_propensity[rows],
            self.propensity_attr_indices,
        )


def validate_pu(dataset: PUDataset) -> list[str]:
    """Return every violated PU invariant; an empty list means valid."""
    problems = []
    s = dataset.observed
    if dataset.hidden_classes is not None:
        bad = np.flatnonzero((s == 1) & (dataset.hidden_classes == 0))
        for i in bad:
            problems.append(f"row {i}: positive-only labeling violated (s=1 but y=0)")
    if dataset.true_propensity is not None:
        e = dataset.true_propensity
        for i in np.flatnonzero(~np.isfinite(e) | (e <= 0)):
            problems.append(f"row {i}: propensity must be > 0 (got {e[i]!r})")
        for i in np.flatnonzero(np.isfinite(e) & (e > 1)):
            problems.append(f"row {i}: propensity must be <= 1 (got {e[i]!r})")
    idx = dataset.propensity_attr_indices
    if len(set(idx)) != len(idx):
        problems.append("propensity attribute indices are not distinct")
    for i in idx:
        if not 0 <= i < dataset.n_features:
            problems.append(f"propensity attribute index {i} out of range")
    return problems


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Sigmoid model ``p(x) = sigmoid(x @ weights + intercept)``."""

    weights: np.ndarray
    intercept: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        object.__setattr__(self, "weights", _frozen(w, float))
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def zeros(cls, dim: int) -> "LinearModel":
        return cls(np.zeros(dim), 0.0)

    @property
    def params(self) -> np.ndarray:
        """Weights followed by the intercept."""
        return np.append(self.weights, self.intercept)

    @classmethod
    def from_params(cls, theta) -> "LinearModel":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:-1], theta[-1])


class CostKind(str, enum.Enum):
    MAE = "MAE"
    MSE = "MSE"
    LOGLOSS = "LogLoss"


@dataclass(frozen=True)
class CostSpec:
    """Per-example cost delta_y(yhat) and its clip-dependent maximum."""

    kind: CostKind = CostKind.MSE
    clip_epsilon: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "kind", CostKind(self.kind))
        if not 0 < self.clip_epsilon < 0.5:
            raise ValueError("clip_epsilon must lie in (0, 0.5)")

    @property
    def delta_max(self) -> float:
        if self.kind is CostKind.LOGLOSS:
            return -math.log(self.clip_epsilon)
        return 1.0

    @property
    def clip_dependent(self) -> bool:
        return self.kind is CostKind.LOGLOSS


@dataclass(frozen=True)
class BoundSpec:
    eta: float
    sample_size: int
    hypothesis_count: int = 1

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie strictly between 0 and 1")
        if self.hypothesis_count < 1:
            raise ValueError("hypothesis_count must be >= 1")
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")
