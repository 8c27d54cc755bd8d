"""Propensity-weighted training via negative-weight data expansion."""

from __future__ import annotations

from typing import Optional

import numpy as np

from sarpu.glm import TrainConfig, WeightedExamples, fit_weighted
from sarpu.types import LinearModel, PUDataset

DEFAULT_E_FLOOR = 0.05


def expand(pu: PUDataset, e_hat, e_floor: float = DEFAULT_E_FLOOR) -> WeightedExamples:
    """Weighted example set for propensity-weighted ERM.

    Each row is emitted in original order.  A labeled row is followed by its
    negative companion: ``(x, 1, 1/e)`` then ``(x, 0, 1 - 1/e)``, with
    ``e = max(e_hat, e_floor)``.  Unlabeled rows become ``(x, 0, 1)``.
    """
    e_hat = np.asarray(e_hat, dtype=float).ravel()
    if e_hat.shape[0] != pu.n:
        raise ValueError(f"e_hat has {e_hat.shape[0]} entries for {pu.n} rows")
    if np.any(~np.isfinite(e_hat)) or np.any(e_hat <= 0):
        raise ValueError("propensity scores must be > 0")
    if np.any(e_hat > 1):
        raise ValueError("propensity scores must be <= 1")
    e = np.maximum(e_hat, e_floor)
    s = pu.observed
    labeled = s == 1
    # row i maps to position i + (number of labeled rows before i)
    reps = np.where(labeled, 2, 1)
    X = np.repeat(pu.features, reps, axis=0)
    t = np.zeros(X.shape[0], dtype=np.int64)
    w = np.ones(X.shape[0])
    starts = np.concatenate([[0], np.cumsum(reps)[:-1]])
    pos = starts[labeled]
    t[pos] = 1
    w[pos] = 1.0 / e[labeled]
    w[pos + 1] = 1.0 - 1.0 / e[labeled]
    return WeightedExamples(X, t, w)


def train_pw_classifier(
    pu: PUDataset,
    e_hat,
    config: TrainConfig = TrainConfig(),
    e_floor: float = DEFAULT_E_FLOOR,
    init: Optional[LinearModel] = None,
) -> LinearModel:
    """Classifier minimising the propensity-weighted log-loss risk."""
    examples = expand(pu, e_hat, e_floor)
    w = examples.weights
    if w[w > 0].sum() <= -w[w < 0].sum():
        raise ValueError("negative weight mass must stay below positive weight mass")
    if config.l2_strength is None:
        # regularise relative to the number of source rows, not the expanded mass
        config = config.with_(l2_strength=1.0 / pu.n)
    return fit_weighted(examples, config, init)
