"""Baselines that assume a constant labeling probability.

Includes the naive learner, a label-frequency estimator, SCAR-weighted
training and the stratified SAR-to-SCAR reduction for discrete propensity
attributes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from sarpu.glm import TrainConfig, fit, predict_proba
from sarpu.types import LinearModel, PUDataset
from sarpu.weighting import DEFAULT_E_FLOOR, train_pw_classifier

log = logging.getLogger(__name__)

C_EPS = 1e-6


@dataclass(frozen=True)
class ScarEstimate:
    c: float
    alpha: float

    def __post_init__(self):
        if not 0 < self.c <= 1:
            raise ValueError(f"label frequency {self.c} outside (0, 1]")
        if not 0 < self.alpha <= 1 + 1e-12:
            raise ValueError(f"class prior {self.alpha} outside (0, 1]")


def train_naive(pu: PUDataset, config: TrainConfig = TrainConfig()) -> LinearModel:
    """Treat every unlabeled row as negative and fit s directly."""
    s = pu.observed
    if s.min() == s.max():
        raise ValueError("naive training needs both labeled and unlabeled rows")
    return fit(pu.features, s, config)


def estimate_c(pu: PUDataset, s_model: LinearModel) -> ScarEstimate:
    """Label frequency as the mean s-model prediction over labeled rows.

    ``c`` is clipped to ``[max(mean(s), eps), 1]`` so the implied class prior
    never exceeds one.
    """
    s = pu.observed
    if s.sum() == 0:
        raise ValueError("estimate_c needs at least one labeled row")
    preds = predict_proba(s_model, pu.features[s == 1])
    # sort first: the mean must not depend on row order
    c = float(np.mean(np.sort(preds)))
    lo = max(float(s.mean()), C_EPS)
    c = min(max(c, lo), 1.0)
    return ScarEstimate(c=c, alpha=min(float(s.mean()) / c, 1.0))


def train_scar(
    pu: PUDataset,
    c: float,
    config: TrainConfig = TrainConfig(),
    e_floor: float = DEFAULT_E_FLOOR,
) -> LinearModel:
    if not 0 < c <= 1:
        raise ValueError("c must lie in (0, 1]")
    return train_pw_classifier(pu, np.full(pu.n, c), config, e_floor)


@dataclass
class Stratification:
    """Rows grouped by their propensity-attribute configuration."""

    configurations: list
    rows: list
    estimates: list
    fallback: list

    def __len__(self) -> int:
        return len(self.configurations)

    def lookup(self) -> dict:
        return {cfg: est.c for cfg, est in zip(self.configurations, self.estimates)}

    def propensity_for(self, x_e, default: float) -> np.ndarray:
        """Stratum label frequency per row of ``x_e``; unseen strata get ``default``."""
        table = self.lookup()
        return np.array([table.get(_key(r), default) for r in np.asarray(x_e)])

    def summary_rows(self, pu: PUDataset) -> list:
        out = []
        for cfg, rows, est, fb in zip(self.configurations, self.rows, self.estimates, self.fallback):
            out.append(
                {
                    "configuration": " ".join(format(v, "g") for v in cfg),
                    "rows": len(rows),
                    "labeled": int(pu.observed[rows].sum()),
                    "c_hat": est.c,
                    "fallback": fb,
                }
            )
        return out


@dataclass
class StratifiedResult:
    stratification: Stratification
    e_hat: np.ndarray
    classifier: LinearModel
    global_estimate: ScarEstimate
    s_model: LinearModel


def _key(row) -> tuple:
    return tuple(float(v) for v in row)


def stratify(pu: PUDataset, max_levels: int = 16) -> tuple:
    """Partition rows by propensity-attribute configuration (sorted keys)."""
    Xe = pu.propensity_features
    if Xe.shape[1] == 0:
        raise ValueError("dataset declares no propensity attributes")
    for j in range(Xe.shape[1]):
        col = Xe[:, j]
        if not np.all(col == np.round(col)) or np.unique(col).size > max_levels:
            raise ValueError(
                f"propensity attribute {pu.propensity_attr_indices[j]} is not discrete; "
                "stratification needs a finite set of configurations"
            )
    configs, inverse = np.unique(Xe, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    rows = [np.flatnonzero(inverse == k) for k in range(configs.shape[0])]
    return [_key(c) for c in configs], rows


def reduce_sar_to_scar(
    pu: PUDataset,
    config: TrainConfig = TrainConfig(),
    e_floor: float = DEFAULT_E_FLOOR,
    s_model: Optional[LinearModel] = None,
    max_levels: int = 16,
) -> StratifiedResult:
    """Per-stratum label frequencies pooled into one propensity-weighted fit.

    Label frequencies come from a single naive s-model that sees the
    propensity attributes; strata without labeled rows fall back to the
    global estimate.
    """
    configs, rows = stratify(pu, max_levels)
    if s_model is None:
        s_model = train_naive(pu, config)
    glob = estimate_c(pu, s_model)
    estimates, fallback = [], []
    for cfg, r in zip(configs, rows):
        sub = pu.subset(r)
        if sub.observed.sum() == 0:
            log.warning("stratum %s has no labeled rows; using global c=%.4f", cfg, glob.c)
            estimates.append(glob)
            fallback.append(True)
        else:
            estimates.append(estimate_c(sub, s_model))
            fallback.append(False)
    e_hat = np.empty(pu.n)
    for r, est in zip(rows, estimates):
        e_hat[r] = est.c
    strat = Stratification(configs, rows, estimates, fallback)
    clf = train_pw_classifier(pu, e_hat, config, e_floor)
    return StratifiedResult(strat, e_hat, clf, glob, s_model)
