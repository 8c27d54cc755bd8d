"""SAR-EM: jointly fit a classifier f(x) and a propensity model e(x_e).

The propensity model only sees the propensity attributes.  Both M-step fits
are L2-regularised, so the quantity EM ascends is the observed-data log
likelihood minus the two penalties; it is reported as ``objective`` in the
trace next to the raw log likelihood.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from sarpu.glm import TrainConfig, WeightedExamples, balanced_fit, fit_weighted, predict_proba
from sarpu.types import LinearModel, PUDataset
from sarpu.weighting import DEFAULT_E_FLOOR, train_pw_classifier


@dataclass(frozen=True)
class EMConfig:
    max_iters: int = 500
    loglik_rel_tol: float = 1e-6
    slope_window: int = 10
    slope_tol: float = 1e-4
    train: TrainConfig = TrainConfig()
    retrain_after: bool = True
    warm_start: bool = True
    e_floor: float = DEFAULT_E_FLOOR

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.slope_window < 2:
            raise ValueError("slope_window must be >= 2")
        if self.loglik_rel_tol <= 0 or self.slope_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class EMState:
    classifier: LinearModel
    propensity: LinearModel
    yhat: np.ndarray
    loglik: float
    objective: float
    iteration: int
    propensity_history: list = field(default_factory=list)


@dataclass
class EMResult:
    classifier: LinearModel
    propensity: LinearModel
    em_classifier: LinearModel
    trace: list
    converged: bool
    iterations: int

    def trace_lines(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.trace)


def _probs(model: LinearModel, X, clip: float) -> np.ndarray:
    return predict_proba(model, X, prob_clip=clip)


def expected_positive(f_prob, e_prob, s) -> np.ndarray:
    """Pr(y=1 | s, x) from Pr(y=1 | x) and the propensity at x."""
    f_prob = np.asarray(f_prob, dtype=float)
    e_prob = np.asarray(e_prob, dtype=float)
    s = np.asarray(s)
    denom = 1.0 - f_prob * e_prob
    if np.any(denom <= 0):
        raise ZeroDivisionError("f * e == 1")
    return np.where(s == 1, 1.0, f_prob * (1.0 - e_prob) / denom)


def e_step(f: LinearModel, e: LinearModel, pu: PUDataset, prob_clip: float = 1e-6) -> np.ndarray:
    fx = _probs(f, pu.features, prob_clip)
    ex = _probs(e, pu.propensity_features, prob_clip)
    return expected_positive(fx, ex, pu.observed)


def _classifier_examples(yhat, X, sample_weight):
    n = X.shape[0]
    X2 = np.vstack([X, X])
    t = np.concatenate([np.ones(n, dtype=np.int64), np.zeros(n, dtype=np.int64)])
    w = np.concatenate([yhat, 1.0 - yhat]) * np.tile(sample_weight, 2)
    return WeightedExamples(X2, t, w)


def _propensity_examples(yhat, pu, sample_weight):
    return WeightedExamples(pu.propensity_features, pu.observed, yhat * sample_weight)


def _penalty_config(train: TrainConfig, total_weight: float) -> TrainConfig:
    # fixed absolute penalty 0.5 * ||w||^2 regardless of the weight mass, so
    # that the two M-step problems maximise one common penalised likelihood
    if train.l2_strength is not None:
        return train
    return train.with_(l2_strength=1.0 / total_weight)


def m_step(
    yhat,
    pu: PUDataset,
    config: EMConfig = EMConfig(),
    init: Optional[tuple] = None,
    sample_weight=None,
):
    """Refit ``(f, e)`` on expectation-weighted data.

    ``sample_weight`` scales every row (used for weighted-grid surrogates of
    the infinite-data limit); ``init`` is a warm-start ``(f, e)`` pair.
    """
    yhat = np.asarray(yhat, dtype=float)
    if yhat.shape[0] != pu.n:
        raise ValueError("yhat length does not match dataset")
    if np.any(yhat < 0) or np.any(yhat > 1):
        raise ValueError("yhat must lie in [0, 1]")
    sw = np.ones(pu.n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    if np.sum(yhat * sw) <= 0:
        raise ValueError("all-zero yhat: the propensity model cannot be fitted")
    f_init, e_init = (None, None) if init is None else init
    f_ex = _classifier_examples(yhat, pu.features, sw)
    e_ex = _propensity_examples(yhat, pu, sw)
    f = fit_weighted(f_ex, _penalty_config(config.train, sw.sum()), f_init)
    e = fit_weighted(e_ex, _penalty_config(config.train, float(np.sum(yhat * sw))), e_init)
    return f, e


def loglikelihood(f: LinearModel, e: LinearModel, pu: PUDataset, prob_clip: float = 1e-6) -> float:
    """Log probability of the observed labels under Pr(s=1|x) = f(x) e(x_e)."""
    p = _probs(f, pu.features, prob_clip) * _probs(e, pu.propensity_features, prob_clip)
    s = pu.observed
    ll = np.where(s == 1, np.log(p), np.log1p(-p)).sum()
    if not np.isfinite(ll):
        raise FloatingPointError("non-finite log likelihood")
    return float(ll)


def penalised_objective(f, e, pu, config: EMConfig = EMConfig()) -> float:
    ll = loglikelihood(f, e, pu, config.train.prob_clip)
    if config.train.l2_strength is not None:
        # explicit strengths are relative to the weight mass; not a fixed objective
        return ll
    return float(ll - 0.5 * (f.weights @ f.weights + e.weights @ e.weights))


def initialize(pu: PUDataset, config: EMConfig = EMConfig()) -> EMState:
    """Balanced fit of s on x for f, then e from the implied expectations."""
    s = pu.observed
    if s.sum() == 0:
        raise ValueError("need at least one labeled row")
    if not pu.propensity_attr_indices:
        raise ValueError("dataset declares no propensity attributes")
    clip = config.train.prob_clip
    f0 = balanced_fit(pu.features, s, config.train)
    yhat0 = np.where(s == 1, 1.0, _probs(f0, pu.features, clip))
    e0 = fit_weighted(
        _propensity_examples(yhat0, pu, np.ones(pu.n)),
        _penalty_config(config.train, float(yhat0.sum())),
    )
    return EMState(
        classifier=f0,
        propensity=e0,
        yhat=yhat0,
        loglik=loglikelihood(f0, e0, pu, clip),
        objective=penalised_objective(f0, e0, pu, config),
        iteration=0,
        propensity_history=[_probs(e0, pu.propensity_features, clip)],
    )


def mean_abs_slope(history) -> float:
    """Mean over examples of |least-squares slope| of their prediction sequence."""
    H = np.asarray(history, dtype=float)
    x = np.arange(H.shape[0], dtype=float)
    x -= x.mean()
    slopes = x @ (H - H.mean(axis=0)) / (x @ x)
    return float(np.mean(np.abs(slopes)))


def run_em(pu: PUDataset, config: EMConfig = EMConfig()) -> EMResult:
    state = initialize(pu, config)
    clip = config.train.prob_clip
    e_x = pu.propensity_features

    def record(st, slope):
        return {
            "iteration": st.iteration,
            "loglik": st.loglik,
            "objective": st.objective,
            "mean_yhat": float(np.mean(st.yhat)),
            "mean_e": float(np.mean(st.propensity_history[-1])),
            "slope": slope,
        }

    trace = [record(state, None)]
    converged = False
    for it in range(1, config.max_iters + 1):
        yhat = e_step(state.classifier, state.propensity, pu, clip)
        init = (state.classifier, state.propensity) if config.warm_start else None
        f, e = m_step(yhat, pu, config, init=init)
        prev_obj = state.objective
        hist = (state.propensity_history + [_probs(e, e_x, clip)])[-config.slope_window:]
        state = EMState(
            classifier=f,
            propensity=e,
            yhat=yhat,
            loglik=loglikelihood(f, e, pu, clip),
            objective=penalised_objective(f, e, pu, config),
            iteration=it,
            propensity_history=hist,
        )
        slope = mean_abs_slope(hist) if len(hist) >= config.slope_window else None
        trace.append(record(state, slope))
        rel = abs(state.objective - prev_obj) / max(abs(prev_obj), 1e-300)
        if rel < config.loglik_rel_tol and slope is not None and slope < config.slope_tol:
            converged = True
            break

    f_final = state.classifier
    if config.retrain_after:
        e_hat = _probs(state.propensity, e_x, clip)
        f_final = train_pw_classifier(pu, e_hat, config.train, config.e_floor, init=f_final)
    return EMResult(
        classifier=f_final,
        propensity=state.propensity,
        em_classifier=state.classifier,
        trace=trace,
        converged=converged,
        iterations=state.iteration,
    )
