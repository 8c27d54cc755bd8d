"""Risk estimators for PU data and their closed-form bias and bounds.

``pw_risk`` is the propensity-weighted estimator: each labeled row counts as
1/e positives plus (1 - 1/e) negatives, each unlabeled row as a negative.
Its expectation over labelings equals the fully supervised risk when the
propensities are correct.  ``expected_risk`` is the tempting alternative that
plugs the conditional class probability into the risk; it is biased and kept
here so its failure mode can be demonstrated.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from sarpu.types import BoundSpec, CostKind, CostSpec


class EstimatorKind(str, enum.Enum):
    TRUE = "True"
    PROPENSITY_WEIGHTED = "PropensityWeighted"
    EXPECTED = "Expected"


@dataclass(frozen=True)
class RiskReport:
    value: float
    estimator_kind: EstimatorKind
    cost: CostSpec
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not math.isfinite(self.value):
            raise ValueError("risk value is not finite")

    def __float__(self) -> float:
        return self.value


def delta(cost: CostSpec, y, yhat):
    """Cost of predicting ``yhat`` when the class is ``y`` (vectorised)."""
    yhat = np.asarray(yhat, dtype=float)
    if np.any(~np.isfinite(yhat)) or np.any((yhat < 0) | (yhat > 1)):
        raise ValueError("predictions must lie in [0, 1]")
    p = np.clip(yhat, cost.clip_epsilon, 1.0 - cost.clip_epsilon)
    y = np.asarray(y)
    if cost.kind is CostKind.MAE:
        out = np.abs(y - p)
    elif cost.kind is CostKind.MSE:
        out = (y - p) ** 2
    else:
        # 1 - p can round below eps when p sits at the upper clip
        q = np.maximum(1.0 - p, cost.clip_epsilon)
        out = np.where(y == 1, -np.log(p), -np.log(q))
    return out if out.ndim else float(out)


def _prepare(yhat, *vectors):
    yhat = np.asarray(yhat, dtype=float).ravel()
    out = [yhat]
    for v in vectors:
        v = np.asarray(v, dtype=float).ravel()
        if v.shape != yhat.shape:
            raise ValueError(f"length mismatch: {v.shape[0]} vs {yhat.shape[0]}")
        out.append(v)
    if yhat.size == 0:
        raise ValueError("need at least one example")
    return out


def _check_binary(v, name):
    if not np.all((v == 0) | (v == 1)):
        raise ValueError(f"{name} must be 0/1")


def _check_propensity(e, name="e"):
    if np.any(~np.isfinite(e)) or np.any(e <= 0):
        raise ValueError(f"{name} must be > 0")
    if np.any(e > 1):
        raise ValueError(f"{name} must be <= 1")


def true_risk(yhat, y, cost: CostSpec) -> RiskReport:
    yhat, y = _prepare(yhat, y)
    _check_binary(y, "y")
    per = y * delta(cost, 1, yhat) + (1 - y) * delta(cost, 0, yhat)
    return RiskReport(float(per.mean()), EstimatorKind.TRUE, cost, yhat.size)


def pw_terms(yhat, s, e, cost: CostSpec) -> np.ndarray:
    """Per-row contributions of the propensity-weighted estimator."""
    yhat, s, e = _prepare(yhat, s, e)
    _check_binary(s, "s")
    _check_propensity(e)
    d1 = delta(cost, 1, yhat)
    d0 = delta(cost, 0, yhat)
    inv = 1.0 / e
    return s * (inv * d1 + (1.0 - inv) * d0) + (1 - s) * d0


def pw_risk(yhat, s, e, cost: CostSpec) -> RiskReport:
    """Propensity-weighted risk estimate; may be negative."""
    per = pw_terms(yhat, s, e, cost)
    return RiskReport(float(per.mean()), EstimatorKind.PROPENSITY_WEIGHTED, cost, per.size)


def expected_risk(yhat, s, e, cost: CostSpec) -> RiskReport:
    """Risk under the posterior class probabilities implied by ``yhat`` and ``e``.

    Biased: the all-positive hypothesis scores (near) zero on any data.
    """
    yhat, s, e = _prepare(yhat, s, e)
    _check_binary(s, "s")
    _check_propensity(e)
    p = np.clip(yhat, cost.clip_epsilon, 1.0 - cost.clip_epsilon)
    denom = 1.0 - p * e
    if np.any(denom <= 0):
        raise ZeroDivisionError("yhat * e == 1")
    w1 = s + (1 - s) * p * (1.0 - e) / denom
    w0 = (1 - s) * (1.0 - p) / denom
    per = w1 * delta(cost, 1, yhat) + w0 * delta(cost, 0, yhat)
    return RiskReport(float(per.mean()), EstimatorKind.EXPECTED, cost, yhat.size)


def pw_bias(yhat, y, e_true, e_hat, cost: CostSpec) -> float:
    """Closed-form bias ``R - E[R_hat]`` when ``e_hat`` replaces ``e_true``.

    Only positive rows contribute.
    """
    yhat, y, e_true, e_hat = _prepare(yhat, y, e_true, e_hat)
    _check_binary(y, "y")
    _check_propensity(e_true, "e_true")
    _check_propensity(e_hat, "e_hat")
    per = y * (1.0 - e_true / e_hat) * (delta(cost, 1, yhat) - delta(cost, 0, yhat))
    return float(per.mean())


def brute_force_expected_pw_risk(yhat, y, e_true, e_used, cost: CostSpec) -> float:
    """Exact expectation of ``pw_risk`` over s_i ~ Bernoulli(y_i * e_true_i).

    The estimator is linear in each s_i, so the expectation is computed row by
    row instead of by enumerating labelings.
    """
    yhat, y, e_true, e_used = _prepare(yhat, y, e_true, e_used)
    _check_binary(y, "y")
    _check_propensity(e_used, "e_used")
    d1 = delta(cost, 1, yhat)
    d0 = delta(cost, 0, yhat)
    q = y * e_true
    per = q * (d1 / e_used + (1.0 - 1.0 / e_used) * d0) + (1.0 - q) * d0
    return float(per.mean())


def estimator_bound(cost: CostSpec, spec: BoundSpec) -> float:
    """Hoeffding radius for |pw_risk - true_risk| at confidence 1 - eta."""
    return math.sqrt(cost.delta_max**2 * math.log(2.0 / spec.eta) / (2.0 * spec.sample_size))


def erm_bound(cost: CostSpec, spec: BoundSpec) -> float:
    """Generalisation slack of the propensity-weighted ERM over a finite class."""
    return math.sqrt(
        cost.delta_max**2 * math.log(spec.hypothesis_count / spec.eta) / (2.0 * spec.sample_size)
    )
