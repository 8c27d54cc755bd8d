"""Weighted L2-regularised logistic regression, written from scratch.

The trainer accepts arbitrary real example weights, including the negative
weights produced by propensity weighting.  The objective is

    J(theta) = sum_i w_i * logloss(t_i, p_i) / sum_i max(w_i, 0)
               + l2 / 2 * ||weights||^2

with p_i the clipped sigmoid prediction and the intercept left unpenalised.
Optimisation is full batch: a Newton direction when the Hessian is positive
definite, the negative gradient otherwise, always followed by a backtracking
line search so every accepted step decreases J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from scipy.special import expit

from sarpu.types import LinearModel


class DivergenceError(RuntimeError):
    """Training produced a non-finite or unboundedly negative objective."""


@dataclass(frozen=True)
class TrainConfig:
    """Optimiser settings.  ``l2_strength=None`` means 1 / sum(max(w, 0))."""

    l2_strength: Optional[float] = None
    learning_rate: float = 1.0
    max_epochs: int = 500
    grad_tolerance: float = 1e-8
    prob_clip: float = 1e-6

    def __post_init__(self):
        if self.l2_strength is not None and self.l2_strength < 0:
            raise ValueError("l2_strength must be nonnegative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be positive")
        if self.grad_tolerance <= 0:
            raise ValueError("grad_tolerance must be positive")
        if not 0 < self.prob_clip < 0.5:
            raise ValueError("prob_clip must lie in (0, 0.5)")

    def with_(self, **kw) -> "TrainConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class WeightedExample:
    features: np.ndarray
    target: int
    weight: float


@dataclass(frozen=True)
class WeightedExamples:
    """A batch of weighted examples stored column-wise.

    Iterating yields :class:`WeightedExample` rows; the trainer works on the
    arrays directly.
    """

    features: np.ndarray
    targets: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        t = np.asarray(self.targets, dtype=np.int64).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if X.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if not (X.shape[0] == t.shape[0] == w.shape[0]):
            raise ValueError("features, targets and weights must have equal length")
        if t.size and not np.all((t == 0) | (t == 1)):
            raise ValueError("targets must be 0/1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", t)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_rows(cls, rows) -> "WeightedExamples":
        rows = list(rows)
        if not rows:
            raise ValueError("no examples")
        X = np.vstack([np.asarray(r.features, dtype=float) for r in rows])
        return cls(X, [r.target for r in rows], [r.weight for r in rows])

    def __len__(self) -> int:
        return self.targets.shape[0]

    def __iter__(self) -> Iterator[WeightedExample]:
        for x, t, w in zip(self.features, self.targets, self.weights):
            yield WeightedExample(x, int(t), float(w))

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def scaled(self, factor: float) -> "WeightedExamples":
        return WeightedExamples(self.features, self.targets, self.weights * factor)


def _check_dim(model: LinearModel, X: np.ndarray) -> None:
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise ValueError(
            f"dimensionality mismatch: model has {model.dim} weights, "
            f"features have shape {X.shape}"
        )


def decision_function(model: LinearModel, features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    _check_dim(model, X)
    return X @ model.weights + model.intercept


def predict_proba(model: LinearModel, features, prob_clip: float = 1e-12) -> np.ndarray:
    """Clipped sigmoid probabilities in ``[prob_clip, 1 - prob_clip]``."""
    z = decision_function(model, features)
    return np.clip(expit(z), prob_clip, 1.0 - prob_clip)


def _resolve_l2(config: TrainConfig, weights: np.ndarray) -> float:
    if config.l2_strength is not None:
        return config.l2_strength
    return 1.0 / np.maximum(weights, 0).sum()


def _loss_terms(z, t, clip):
    # sigmoid(z) and sigmoid(-z) separately, to keep 1 - p accurate near 1
    p1 = np.clip(expit(z), clip, 1.0 - clip)
    p0 = np.clip(expit(-z), clip, 1.0 - clip)
    return np.where(t == 1, -np.log(p1), -np.log(p0))


def _objective(theta, X, t, w, wpos, l2, clip):
    z = X @ theta[:-1] + theta[-1]
    data = np.dot(w, _loss_terms(z, t, clip)) / wpos
    return data + 0.5 * l2 * np.dot(theta[:-1], theta[:-1])


def _grad_hess(theta, X, t, w, wpos, l2, clip, hessian=True):
    z = X @ theta[:-1] + theta[-1]
    p = expit(z)
    # the clipped loss is flat outside [clip, 1 - clip]
    active = (p >= clip) & (p <= 1.0 - clip)
    r = np.where(active, w * (p - t), 0.0) / wpos
    g = np.empty_like(theta)
    g[:-1] = X.T @ r + l2 * theta[:-1]
    g[-1] = r.sum()
    if not hessian:
        return g, None
    h = np.where(active, w * p * (1.0 - p), 0.0) / wpos
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    H = (Xa * h[:, None]).T @ Xa
    H[np.arange(len(theta) - 1), np.arange(len(theta) - 1)] += l2
    return g, H


def weighted_log_loss(
    model: LinearModel,
    examples: WeightedExamples,
    l2_strength: float = 0.0,
    prob_clip: float = 1e-6,
) -> float:
    """Weight-normalised log loss of ``model`` on ``examples`` plus the L2 term."""
    if len(examples) == 0:
        raise ValueError("no examples")
    _check_dim(model, examples.features)
    wpos = np.maximum(examples.weights, 0).sum()
    if wpos <= 0:
        raise ValueError("total positive weight must be > 0")
    return float(
        _objective(
            model.params,
            examples.features,
            examples.targets,
            examples.weights,
            wpos,
            l2_strength,
            prob_clip,
        )
    )


def weighted_log_loss_grad(
    model: LinearModel,
    examples: WeightedExamples,
    l2_strength: float = 0.0,
    prob_clip: float = 1e-6,
) -> np.ndarray:
    """Analytic gradient of :func:`weighted_log_loss`; intercept last."""
    _check_dim(model, examples.features)
    wpos = np.maximum(examples.weights, 0).sum()
    g, _ = _grad_hess(
        model.params,
        examples.features,
        examples.targets,
        examples.weights,
        wpos,
        l2_strength,
        prob_clip,
        hessian=False,
    )
    return g


def _canonical_order(X, t, w):
    # full-batch sums depend on summation order; sorting makes the fit
    # bit-identical under any permutation of the input examples
    keys = [w, t] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def fit_weighted(
    examples: WeightedExamples,
    config: TrainConfig = TrainConfig(),
    init: Optional[LinearModel] = None,
    return_history: bool = False,
):
    """Minimise the weighted objective; deterministic given its inputs.

    Stops when the gradient max-norm reaches ``grad_tolerance``, when ten
    consecutive steps improve the loss by less than 1e-12 (relative), or after
    ``max_epochs``.  Returns the fitted :class:`LinearModel`, or
    ``(model, losses)`` when ``return_history`` is set.
    """
    if len(examples) == 0:
        raise ValueError("no examples")
    X, t, w = examples.features, examples.targets, examples.weights
    if init is not None:
        _check_dim(init, X)
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(w)):
        raise DivergenceError("non-finite features or weights")
    if not np.any(w > 0):
        raise ValueError("at least one example needs positive weight")
    order = _canonical_order(X, t, w)
    X, t, w = X[order], t[order], w[order]
    wpos = np.maximum(w, 0).sum()
    l2 = _resolve_l2(config, w)
    clip = config.prob_clip
    # every clipped term is >= -delta_max * |w_i|
    floor = math.log(clip) * np.abs(w).sum() / wpos

    theta = np.zeros(X.shape[1] + 1) if init is None else init.params.copy()
    loss = _objective(theta, X, t, w, wpos, l2, clip)
    history = [loss]
    stalled = 0
    for _ in range(config.max_epochs):
        if not np.isfinite(loss):
            raise DivergenceError("non-finite loss")
        if loss < floor:
            raise DivergenceError(f"loss {loss:.6g} fell below divergence guard {floor:.6g}")
        g, H = _grad_hess(theta, X, t, w, wpos, l2, clip)
        if np.max(np.abs(g)) <= config.grad_tolerance:
            break
        direction = None
        try:
            L = np.linalg.cholesky(H)
            direction = -np.linalg.solve(L.T, np.linalg.solve(L, g))
        except np.linalg.LinAlgError:
            pass
        if direction is None or not np.all(np.isfinite(direction)):
            direction = -g
        slope = float(g @ direction)
        if slope >= 0:
            direction, slope = -g, -float(g @ g)
        step = config.learning_rate
        accepted = False
        for _ in range(60):
            cand = theta + step * direction
            cand_loss = _objective(cand, X, t, w, wpos, l2, clip)
            if cand_loss <= loss + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # no representable decrease left along this direction
            break
        # kinks at the clip boundary can trap the line search in tiny steps
        if loss - cand_loss <= 1e-12 * max(1.0, abs(loss)):
            stalled += 1
        else:
            stalled = 0
        theta, loss = cand, cand_loss
        history.append(loss)
        if stalled >= 10:
            break
    if not np.isfinite(loss):
        raise DivergenceError("non-finite loss")
    model = LinearModel.from_params(theta)
    if return_history:
        return model, history
    return model


def fit(features, targets, config: TrainConfig = TrainConfig(), init=None) -> LinearModel:
    """Ordinary unit-weight logistic regression."""
    t = np.asarray(targets)
    return fit_weighted(WeightedExamples(features, t, np.ones(t.shape[0])), config, init)


def balanced_fit(features, targets, config: TrainConfig = TrainConfig()) -> LinearModel:
    """Fit with class weights n / (2 n_t) so both classes carry equal mass."""
    t = np.asarray(targets, dtype=np.int64)
    n = t.shape[0]
    n1 = int(t.sum())
    n0 = n - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("balanced_fit needs both target values present")
    w = np.where(t == 1, n / (2.0 * n1), n / (2.0 * n0))
    return fit_weighted(WeightedExamples(features, t, w), config)


def save_model(model: LinearModel, path) -> None:
    """Flat text record: dimension, weights, intercept (17 significant digits)."""
    lines = [str(model.dim)]
    lines += [format(float(v), ".17g") for v in model.weights]
    lines.append(format(model.intercept, ".17g"))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> LinearModel:
    tokens = Path(path).read_text().split()
    if not tokens:
        raise ValueError(f"{path}: empty model file")
    try:
        dim = int(tokens[0])
        values = [float(v) for v in tokens[1:]]
    except ValueError as exc:
        raise ValueError(f"{path}: malformed model file") from exc
    if len(values) != dim + 1:
        raise ValueError(f"{path}: expected {dim + 1} values, found {len(values)}")
    return LinearModel(values[:-1], values[-1])
