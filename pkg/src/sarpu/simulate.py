"""Construction of SAR PU benchmark instances from labeled data.

Pipeline: cluster the data, draw per-cluster Bernoulli parameters for k
artificial binary propensity attributes, append the sampled attributes, then
for each train/test split draw several PU labelings with

    e(x_e) = prod_i (p_low^(1 - x_e_i) * p_high^(x_e_i))^(1/k).

Every random draw comes from a substream keyed on (seed, purpose, split,
labeling), so instances can be regenerated independently.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from sarpu.types import LabeledDataset, PUDataset

# substream purpose tags
_ATTRS, _SPLIT, _LABEL, _KMEANS = 0, 1, 2, 3


@dataclass(frozen=True)
class SimulationConfig:
    k_clusters: int = 5
    k_prop_attrs: int = 2
    p_low: float = 0.2
    p_high: float = 0.8
    n_splits: int = 5
    n_labelings: int = 5
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.k_clusters < 1:
            raise ValueError("k_clusters must be positive")
        if self.k_prop_attrs < 0:
            raise ValueError("k_prop_attrs must be nonnegative")
        if not 0 < self.p_low <= self.p_high < 1:
            raise ValueError("need 0 < p_low <= p_high < 1")
        if self.n_splits < 1 or self.n_labelings < 1:
            raise ValueError("n_splits and n_labelings must be positive")
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *[int(k) for k in key]])


def propensity_score(x_e, p_low: float, p_high: float):
    """Geometric interpolation between p_low and p_high; rows of ``x_e`` are instances."""
    x = np.asarray(x_e, dtype=float)
    if x.size and not np.all((x == 0) | (x == 1)):
        raise ValueError("propensity attributes must be binary")
    k = x.shape[-1]
    if k == 0:
        raise ValueError("need at least one propensity attribute")
    log_e = ((1 - x) * np.log(p_low) + x * np.log(p_high)).sum(axis=-1) / k
    e = np.exp(log_e)
    # pin the endpoints against exp/log round-off
    e = np.clip(e, p_low, p_high)
    return e if e.ndim else float(e)


def kmeans(features, k: int, seed: int = 0, max_iter: int = 100, return_inertia: bool = False):
    """Lloyd's algorithm from a k-means++ start; deterministic given ``seed``."""
    X = np.asarray(features, dtype=float)
    n = X.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    rng = substream(seed, _KMEANS)
    centers = np.empty((k, X.shape[1]))
    chosen = [int(rng.integers(n))]
    centers[0] = X[chosen[0]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # all remaining points coincide with a center
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(rest))
        chosen.append(idx)
        centers[j] = X[idx]
        d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))

    labels = None
    for _ in range(max_iter):
        dist = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(dist, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = X[labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    inertia = float(((X - centers[labels]) ** 2).sum())
    if return_inertia:
        return labels, inertia
    return labels


@dataclass
class PropensityAttrInfo:
    clusters: np.ndarray
    theta: np.ndarray  # (k_clusters, k_prop_attrs) Bernoulli parameters
    inertia: float


def attach_propensity_attrs(data: LabeledDataset, config: SimulationConfig, rng=None):
    """Append k binary propensity attributes drawn per k-means cluster.

    Returns ``(dataset, info)``; the dataset's ``propensity_attr_indices``
    point at the appended columns.
    """
    if data.n == 0:
        raise ValueError("empty dataset")
    k = config.k_prop_attrs
    if k == 0:
        return data, PropensityAttrInfo(np.zeros(data.n, dtype=int), np.zeros((0, 0)), 0.0)
    if rng is None:
        rng = substream(config.seed, _ATTRS)
    clusters, inertia = kmeans(data.features, config.k_clusters, config.seed, return_inertia=True)
    theta = rng.uniform(0.0, 1.0, size=(config.k_clusters, k))
    u = rng.uniform(size=(data.n, k))
    attrs = (u < theta[clusters]).astype(float)
    d = data.n_features
    out = LabeledDataset(
        np.hstack([data.features, attrs]),
        data.classes,
        tuple(data.propensity_attr_indices) + tuple(range(d, d + k)),
    )
    return out, PropensityAttrInfo(clusters, theta, inertia)


def label_with_propensity(data: LabeledDataset, e, rng) -> PUDataset:
    """Sample s_i ~ Bernoulli(y_i * e_i)."""
    e = np.asarray(e, dtype=float)
    y = data.classes
    s = (rng.uniform(size=data.n) < y * e).astype(np.int64)
    return PUDataset(data.features, s, y, e, data.propensity_attr_indices)


def label_pu(data: LabeledDataset, config: SimulationConfig, rng) -> PUDataset:
    if not data.propensity_attr_indices:
        raise ValueError("attach propensity attributes before labeling")
    x_e = data.features[:, list(data.propensity_attr_indices)]
    e = np.atleast_1d(propensity_score(x_e, config.p_low, config.p_high))
    return label_with_propensity(data, e, rng)


@dataclass
class ExperimentInstance:
    split: int
    labeling: int
    train: PUDataset
    test: LabeledDataset
    test_propensity: np.ndarray
    train_rows: np.ndarray
    test_rows: np.ndarray


@dataclass
class Experiment:
    instances: list
    manifest: dict

    def __len__(self):
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def __getitem__(self, i):
        return self.instances[i]


def make_experiment_instances(data: LabeledDataset, config: SimulationConfig) -> Experiment:
    """``n_splits * n_labelings`` (train PU, supervised test) pairs.

    Propensity attributes are appended before splitting, so train and test
    share them.  Labelings of one split share its row partition.
    """
    ext, info = attach_propensity_attrs(data, config)
    n = ext.n
    n_test = int(round(config.test_fraction * n))
    if n_test < 1 or n - n_test < 2:
        raise ValueError(f"dataset of {n} rows too small for test_fraction={config.test_fraction}")
    x_e = ext.features[:, list(ext.propensity_attr_indices)]
    e_all = (
        np.atleast_1d(propensity_score(x_e, config.p_low, config.p_high))
        if ext.propensity_attr_indices
        else np.ones(n)
    )
    instances, streams = [], []
    for j in range(config.n_splits):
        perm = substream(config.seed, _SPLIT, j).permutation(n)
        test_rows = np.sort(perm[:n_test])
        train_rows = np.sort(perm[n_test:])
        train_data = ext.subset(train_rows)
        test_data = ext.subset(test_rows)
        for l in range(config.n_labelings):
            rng = substream(config.seed, _LABEL, j, l)
            pu = label_with_propensity(train_data, e_all[train_rows], rng)
            instances.append(
                ExperimentInstance(j, l, pu, test_data, e_all[test_rows], train_rows, test_rows)
            )
            streams.append({"split": j, "labeling": l, "substream": [config.seed, _LABEL, j, l]})
    manifest = {
        "config": asdict(config),
        "n_rows": n,
        "n_features": ext.n_features,
        "propensity_attr_indices": list(ext.propensity_attr_indices),
        "kmeans_inertia": info.inertia,
        "cluster_theta": info.theta.tolist(),
        "cluster_sizes": np.bincount(info.clusters, minlength=config.k_clusters).tolist()
        if config.k_prop_attrs
        else [],
        "attr_substream": [config.seed, _ATTRS],
        "split_substreams": [[config.seed, _SPLIT, j] for j in range(config.n_splits)],
        "instances": streams,
    }
    return Experiment(instances, manifest)


def make_blobs(
    n: int = 2000,
    n_features: int = 4,
    separation: float = 3.0,
    positive_fraction: float = 0.5,
    seed: int = 0,
    scale: bool = True,
) -> LabeledDataset:
    """Two Gaussian classes with unit covariance, means ``separation`` apart.

    Features are min-max scaled to [-1, 1] when ``scale`` is set.
    """
    rng = substream(seed, 99)
    y = (rng.uniform(size=n) < positive_fraction).astype(np.int64)
    direction = np.ones(n_features) / np.sqrt(n_features)
    X = rng.normal(size=(n, n_features)) + np.outer(y - 0.5, direction * separation)
    if scale:
        lo, hi = X.min(axis=0), X.max(axis=0)
        X = 2.0 * (X - lo) / np.where(hi > lo, hi - lo, 1.0) - 1.0
    return LabeledDataset(X, y)


def make_stratified_sar(
    n: int = 8000,
    stratum_propensity=(0.2, 0.4, 0.6, 0.8),
    separation: float = 6.0,
    n_features: int = 2,
    seed: int = 0,
) -> PUDataset:
    """Blobs plus a 2-bit propensity attribute with one fixed e per configuration.

    Configuration ``(b0, b1)`` maps to ``stratum_propensity[2 * b0 + b1]``.
    """
    if len(stratum_propensity) != 4:
        raise ValueError("expected four stratum propensities")
    base = make_blobs(n, n_features, separation, seed=seed)
    rng = substream(seed, 98)
    code = rng.integers(0, 4, size=n)
    bits = np.stack([code // 2, code % 2], axis=1).astype(float)
    e = np.asarray(stratum_propensity, dtype=float)[code]
    d = base.n_features
    data = LabeledDataset(np.hstack([base.features, bits]), base.classes, (d, d + 1))
    return label_with_propensity(data, e, rng)
