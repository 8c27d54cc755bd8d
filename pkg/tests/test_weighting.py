import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sarpu.glm import TrainConfig, decision_function, fit, predict_proba
from sarpu.metrics import mse_prob, roc_auc
from sarpu.scar import train_naive
from sarpu.simulate import label_with_propensity, make_blobs
from sarpu.types import LabeledDataset, PUDataset
from sarpu.weighting import expand, train_pw_classifier


def _pu(s, e=None):
    s = np.asarray(s)
    X = np.arange(len(s), dtype=float)[:, None]
    return PUDataset(X, s, s)


def test_unit_propensity_companions_have_zero_weight():
    ex = expand(_pu([1, 0, 1]), np.ones(3))
    assert list(ex.targets) == [1, 0, 0, 1, 0]
    assert list(ex.weights) == [1.0, 0.0, 1.0, 1.0, 0.0]


def test_half_propensity_gives_two_and_minus_one():
    ex = expand(_pu([1]), [0.5])
    assert list(ex.targets) == [1, 0]
    assert list(ex.weights) == [2.0, -1.0]


def test_floor_applied():
    ex = expand(_pu([1]), [0.25], e_floor=0.5)
    assert list(ex.weights) == [2.0, -1.0]


def test_floor_zero_is_exact():
    ex = expand(_pu([1]), [0.25], e_floor=0.0)
    assert list(ex.weights) == [4.0, -3.0]


@pytest.mark.parametrize("bad", [[0.0], [-0.1], [1.2], [np.nan]])
def test_invalid_propensity(bad):
    with pytest.raises(ValueError):
        expand(_pu([1]), bad)


def test_length_mismatch():
    with pytest.raises(ValueError):
        expand(_pu([1, 0]), [0.5])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.floats(0.01, 1.0)), min_size=1, max_size=40),
       st.sampled_from([0.0, 0.05, 0.3]))
def test_expansion_bookkeeping(rows, floor):
    s = np.array([r[0] for r in rows])
    e = np.array([r[1] for r in rows])
    pu = _pu(s)
    ex = expand(pu, e, floor)
    assert len(ex) == pu.n + s.sum()
    assert ex.weights.sum() == pytest.approx(pu.n, rel=1e-12)
    assert np.max(np.abs(ex.weights)) <= 1.0 / max(floor, e.min()) + 1e-12
    # order preserving: source row index is non-decreasing along the expansion
    assert np.all(np.diff(ex.features[:, 0]) >= 0)


def test_fully_labeled_matches_supervised():
    data = make_blobs(400, 3, 2.0, seed=4)
    pu = PUDataset(data.features, data.classes, data.classes)
    cfg = TrainConfig()
    pw = train_pw_classifier(pu, np.ones(pu.n), cfg, e_floor=0.0)
    sup = fit(data.features, data.classes, cfg.with_(l2_strength=1.0 / pu.n))
    assert np.max(np.abs(pw.params - sup.params)) < 1e-6


def _split(data, n_train):
    tr = LabeledDataset(data.features[:n_train], data.classes[:n_train])
    te = LabeledDataset(data.features[n_train:], data.classes[n_train:])
    return tr, te


def scar_auc_gap(seeds=range(5), c=0.3, separation=4.0):
    """Mean held-out AUC of true-c weighting minus naive, over seeds."""
    gaps = []
    for seed in seeds:
        data = make_blobs(3000, 4, separation, seed=seed)
        tr, te = _split(data, 2000)
        pu = label_with_propensity(tr, np.full(tr.n, c), np.random.default_rng(seed))
        pw = train_pw_classifier(pu, np.full(pu.n, c))
        naive = train_naive(pu)
        gaps.append(
            roc_auc(decision_function(pw, te.features), te.classes)
            - roc_auc(decision_function(naive, te.features), te.classes)
        )
    return float(np.mean(gaps))


def test_scar_true_c_matches_naive_auc():
    # Under SCAR the naive scores are a monotone map of the posterior, so
    # weighting cannot improve the ranking; it may only add variance.  See the
    # decisions ledger: the check is "no worse than 0.005", not ">=".
    assert scar_auc_gap() >= -0.005


def test_sar_true_e_beats_naive_mse():
    # two clusters with very different labeling probabilities
    data = make_blobs(3000, 2, 3.0, seed=9)
    tr, te = _split(data, 2000)
    e = np.where(tr.features[:, 0] > 0, 0.8, 0.2)
    pu = label_with_propensity(tr, e, np.random.default_rng(9))
    pw = train_pw_classifier(pu, e)
    naive = train_naive(pu)
    assert mse_prob(predict_proba(pw, te.features), te.classes) <= mse_prob(
        predict_proba(naive, te.features), te.classes
    )


def test_pair_weights_keep_positive_mass_dominant():
    # each labeled pair sums to 1, so positive mass exceeds negative mass by n
    ex = expand(_pu([1, 1, 0]), np.full(3, 0.1), e_floor=0.0)
    w = ex.weights
    assert w[w > 0].sum() - (-w[w < 0].sum()) == pytest.approx(3.0)
