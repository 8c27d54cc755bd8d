"""Evaluation metrics and per-method aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats


def mse_prob(yhat, y) -> float:
    yhat = np.asarray(yhat, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if yhat.shape != y.shape:
        raise ValueError(f"length mismatch: {yhat.shape[0]} vs {y.shape[0]}")
    return float(np.mean((yhat - y) ** 2))


def roc_auc(scores, y) -> float:
    """Mann-Whitney estimate of Pr(score_pos > score_neg), ties counted half."""
    scores = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(y).ravel()
    if scores.shape != y.shape:
        raise ValueError("length mismatch")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes present")
    ranks = stats.rankdata(scores)  # midranks for ties
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def mse_propensity(e_hat, e_true) -> float:
    """MSE between estimated and true propensities; pass positive rows only."""
    e_hat = np.asarray(e_hat, dtype=float).ravel()
    e_true = np.asarray(e_true, dtype=float).ravel()
    if e_true.size == 0:
        raise ValueError("no positive rows to evaluate propensities on")
    if e_hat.shape != e_true.shape:
        raise ValueError("length mismatch")
    return float(np.mean((e_hat - e_true) ** 2))


def t_confidence(values, level: float = 0.95):
    """Mean and t-interval half-width; half-width is NaN for fewer than 2 values."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    mean = float(v.mean())
    if v.size < 2:
        return mean, math.nan
    sem = float(v.std(ddof=1)) / math.sqrt(v.size)
    return mean, float(stats.t.ppf(0.5 + level / 2.0, v.size - 1) * sem)


@dataclass
class MethodResult:
    method: str
    values: dict  # metric -> list of per-instance values
    failures: int = 0
    summary: dict = field(default_factory=dict)  # metric -> (mean, halfwidth)

    def __post_init__(self):
        if not self.summary:
            self.summary = {m: t_confidence(v) for m, v in self.values.items()}

    @property
    def degenerate_ci(self) -> bool:
        return any(len(v) < 2 for v in self.values.values())

    def mean(self, metric: str) -> float:
        return self.summary[metric][0]

    def halfwidth(self, metric: str) -> float:
        return self.summary[metric][1]
