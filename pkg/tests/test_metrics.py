import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sarpu.benchmark import (
    METHODS,
    canonical_method,
    fit_method,
    run_benchmark,
    summary_table,
)
from sarpu.metrics import MethodResult, mse_prob, mse_propensity, roc_auc, t_confidence
from sarpu.simulate import SimulationConfig, make_blobs


def pair_count_auc(scores, y):
    pos = [s for s, t in zip(scores, y) if t == 1]
    neg = [s for s, t in zip(scores, y) if t == 0]
    won = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return won / (len(pos) * len(neg))


labelled_scores = st.integers(2, 60).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(-5, 5).map(float), min_size=n, max_size=n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n),
    )
).filter(lambda t: 0 < sum(t[1]) < len(t[1]))


def test_mse_examples():
    assert mse_prob([1, 0, 1], [1, 0, 1]) == 0
    assert mse_prob([0.5] * 4, [1, 0, 0, 1]) == 0.25
    assert mse_prob([0.7, 0.4], [1, 0]) == pytest.approx(0.125)
    with pytest.raises(ValueError):
        mse_prob([0.5], [1, 0])


def test_mse_minimised_at_base_rate():
    y = np.array([1, 1, 0, 0, 0, 1, 0, 0, 0, 0])
    grid = np.linspace(0, 1, 101)
    best = grid[np.argmin([mse_prob(np.full(10, c), y) for c in grid])]
    assert best == pytest.approx(y.mean())


def test_auc_examples():
    assert roc_auc([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0
    assert roc_auc([0.3] * 4, [1, 0, 1, 0]) == 0.5
    assert roc_auc([0.9, 0.4, 0.6, 0.1], [1, 1, 0, 0]) == 0.75


def test_auc_single_class():
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.2], [1, 1])


@settings(max_examples=150, deadline=None)
@given(labelled_scores)
def test_auc_matches_pair_counting(data):
    scores, y = data
    assert roc_auc(scores, y) == pytest.approx(pair_count_auc(scores, y), abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(labelled_scores, st.floats(0.1, 10), st.floats(-5, 5))
def test_auc_invariant_to_increasing_maps(data, a, b):
    scores, y = data
    s = np.array(scores) / 5.0
    base = roc_auc(s, y)
    assert roc_auc(np.exp(s), y) == pytest.approx(base, abs=1e-12)
    assert roc_auc(a * s + b, y) == pytest.approx(base, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 50), st.randoms(use_true_random=False))
def test_auc_complement(n, rnd):
    scores = np.array(rnd.sample(range(1000), n), dtype=float)
    y = np.array([rnd.randint(0, 1) for _ in range(n)])
    if y.min() == y.max():
        y[0] = 1 - y[0]
    assert roc_auc(scores, y) + roc_auc(-scores, y) == pytest.approx(1.0, abs=1e-12)


def test_mse_propensity_examples():
    e = np.array([0.2, 0.5, 0.8])
    assert mse_propensity(e, e) == 0
    assert mse_propensity(e + 0.1, e) == pytest.approx(0.01)
    assert mse_propensity([0.3, 0.3, 0.9], e) == pytest.approx((0.01 + 0.04 + 0.01) / 3)
    with pytest.raises(ValueError):
        mse_propensity([], [])


def test_t_confidence():
    mean, hw = t_confidence([1.0, 2.0, 3.0])
    assert mean == 2.0
    assert hw == pytest.approx(4.302652729911275 * 1.0 / np.sqrt(3))
    assert np.isnan(t_confidence([1.0])[1])


def test_method_result_degenerate_ci():
    r = MethodResult("naive", {"auc_f": [0.8]})
    assert r.degenerate_ci and r.mean("auc_f") == 0.8 and np.isnan(r.halfwidth("auc_f"))


def test_canonical_method():
    assert canonical_method("sar-scar-strat") == "sar-strat"
    with pytest.raises(ValueError):
        canonical_method("km2")


@pytest.fixture(scope="module")
def small_bench():
    data = make_blobs(400, 3, 3.0, seed=2)
    cfg = SimulationConfig(n_splits=2, n_labelings=2, seed=2)
    return data, cfg, run_benchmark(data, cfg)


def test_benchmark_supervised_upper_bound(small_bench):
    _, _, bench = small_bench
    res = bench.by_method()
    sup = res["supervised"].mean("auc_f")
    for m in METHODS:
        assert res[m].mean("auc_f") <= sup + 0.02
    assert res["sar-em"].mean("auc_f") >= res["naive"].mean("auc_f")
    assert not bench.failures


def test_benchmark_order_independent(small_bench):
    data, cfg, bench = small_bench
    rev = run_benchmark(data, cfg, methods=list(reversed(METHODS)))
    a = {r.method: r.summary for r in bench.results}
    b = {r.method: r.summary for r in rev.results}
    assert a == b


def test_single_method_single_instance():
    data = make_blobs(200, 2, 3.0, seed=0)
    bench = run_benchmark(data, SimulationConfig(n_splits=1, n_labelings=1), methods=["naive"])
    assert len(bench.results) == 1 and bench.results[0].degenerate_ci
    assert "nan" in summary_table(bench)


def test_failures_recorded_not_raised():
    data = make_blobs(200, 2, 3.0, seed=0)
    cfg = SimulationConfig(n_splits=1, n_labelings=1)
    from sarpu.simulate import make_experiment_instances
    from sarpu.types import PUDataset

    inst = make_experiment_instances(data, cfg)[0]
    tr = inst.train
    # strip the true propensities so sar-true-e cannot run
    inst.train = PUDataset(tr.features, tr.observed, tr.hidden_classes, None, tr.propensity_attr_indices)
    bench = run_benchmark(data, cfg, methods=["naive", "sar-true-e"], instances=[inst])
    assert len(bench.failures) == 1 and bench.failures[0][2] == "sar-true-e"
    assert bench.by_method()["sar-true-e"].failures == 1
    assert "n_failed" in summary_table(bench)


def test_summary_table_shape(small_bench):
    _, _, bench = small_bench
    lines = summary_table(bench).strip().split("\n")
    assert lines[0].split("\t")[:6] == ["dataset", "method", "metric", "mean", "ci_halfwidth", "n_instances"]
    auc_rows = [l for l in lines[1:] if l.split("\t")[2] == "auc_f"]
    assert len(auc_rows) == 6


def test_propensity_on_train_flag():
    data = make_blobs(300, 2, 3.0, seed=1)
    cfg = SimulationConfig(n_splits=1, n_labelings=1)
    a = run_benchmark(data, cfg, methods=["sar-em"], propensity_on="test")
    b = run_benchmark(data, cfg, methods=["sar-em"], propensity_on="train")
    assert a.results[0].values["mse_e"] != b.results[0].values["mse_e"]
    assert a.results[0].values["auc_f"] == b.results[0].values["auc_f"]


def test_fit_method_preconditions(sar_instance):
    from sarpu.benchmark import PreconditionError
    from sarpu.types import PUDataset

    tr = sar_instance.train
    bare = PUDataset(tr.features, tr.observed, propensity_attr_indices=tr.propensity_attr_indices)
    with pytest.raises(PreconditionError):
        fit_method("supervised", bare)
    with pytest.raises(PreconditionError):
        fit_method("sar-true-e", bare)
