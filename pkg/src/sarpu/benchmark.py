"""Benchmark runner: simulate instances, train every method, score on test."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from sarpu import metrics
from sarpu.em import EMConfig, run_em
from sarpu.glm import DivergenceError, TrainConfig, decision_function, fit, predict_proba
from sarpu.scar import estimate_c, reduce_sar_to_scar, train_naive, train_scar
from sarpu.simulate import ExperimentInstance, SimulationConfig, make_experiment_instances
from sarpu.types import LabeledDataset, LinearModel, PUDataset
from sarpu.weighting import train_pw_classifier

log = logging.getLogger(__name__)

METHODS = ("naive", "scar-en", "sar-strat", "sar-em", "sar-true-e", "supervised")
ALIASES = {"sar-scar-strat": "sar-strat"}
METRICS = ("mse_f", "auc_f", "mse_e")


class PreconditionError(ValueError):
    """The training data lacks what a method needs (e.g. hidden labels)."""


def canonical_method(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in METHODS:
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return name


@dataclass
class FittedMethod:
    method: str
    classifier: LinearModel
    # maps a full feature matrix to estimated propensities, when the method has them
    propensity: Optional[Callable] = None
    propensity_model: Optional[LinearModel] = None
    extras: dict = field(default_factory=dict)


def fit_method(
    method: str,
    train: PUDataset,
    em_config: EMConfig = EMConfig(),
) -> FittedMethod:
    method = canonical_method(method)
    cfg = em_config.train
    idx = list(train.propensity_attr_indices)

    if method == "naive":
        return FittedMethod(method, train_naive(train, cfg))

    if method == "supervised":
        if train.hidden_classes is None:
            raise PreconditionError("supervised training needs hidden classes")
        return FittedMethod(method, fit(train.features, train.hidden_classes, cfg))

    if method == "scar-en":
        s_model = train_naive(train, cfg)
        est = estimate_c(train, s_model)
        clf = train_scar(train, est.c, cfg, em_config.e_floor)
        return FittedMethod(
            method,
            clf,
            propensity=lambda X, c=est.c: np.full(X.shape[0], c),
            extras={"c": est.c, "alpha": est.alpha},
        )

    if method == "sar-strat":
        res = reduce_sar_to_scar(train, cfg, em_config.e_floor)
        strat, default = res.stratification, res.global_estimate.c
        return FittedMethod(
            method,
            res.classifier,
            propensity=lambda X: strat.propensity_for(X[:, idx], default),
            extras={"stratification": res, "c": default},
        )

    if method == "sar-em":
        res = run_em(train, em_config)
        e_model = res.propensity
        return FittedMethod(
            method,
            res.classifier,
            propensity=lambda X: predict_proba(e_model, X[:, idx]),
            propensity_model=e_model,
            extras={"em": res},
        )

    # sar-true-e
    if train.true_propensity is None:
        raise PreconditionError("sar-true-e needs the true propensity scores")
    clf = train_pw_classifier(train, train.true_propensity, cfg, em_config.e_floor)
    return FittedMethod(method, clf, extras={"true_e": True})


def evaluate_method(
    fitted: FittedMethod,
    test: LabeledDataset,
    test_propensity=None,
    propensity_rows: Optional[tuple] = None,
) -> dict:
    """Test-set metrics.  ``propensity_rows`` overrides the (features, e, y)
    used for the propensity MSE, e.g. to score on train positives instead."""
    scores = decision_function(fitted.classifier, test.features)
    proba = predict_proba(fitted.classifier, test.features)
    out = {
        "mse_f": metrics.mse_prob(proba, test.classes),
        "auc_f": metrics.roc_auc(scores, test.classes),
    }
    if fitted.method == "sar-true-e":
        out["mse_e"] = 0.0
    elif fitted.propensity is not None:
        if propensity_rows is None:
            if test_propensity is None:
                return out
            propensity_rows = (test.features, np.asarray(test_propensity), test.classes)
        X, e_true, y = propensity_rows
        pos = np.asarray(y) == 1
        if pos.any():
            out["mse_e"] = metrics.mse_propensity(fitted.propensity(X[pos]), e_true[pos])
    return out


def _run_instance(args):
    inst, methods, em_config, propensity_on = args
    rows, failures, traces = [], [], {}
    for m in methods:
        try:
            fitted = fit_method(m, inst.train, em_config)
        except (DivergenceError, ValueError, FloatingPointError, ZeroDivisionError) as exc:
            failures.append((inst.split, inst.labeling, m, f"{type(exc).__name__}: {exc}"))
            continue
        prow = None
        if propensity_on == "train":
            tr = inst.train
            prow = (tr.features, tr.true_propensity, tr.hidden_classes)
        vals = evaluate_method(fitted, inst.test, inst.test_propensity, prow)
        for metric in METRICS:
            if metric in vals:
                rows.append((inst.split, inst.labeling, m, metric, vals[metric]))
        if m == "sar-em":
            traces[(inst.split, inst.labeling)] = fitted.extras["em"].trace
    return rows, failures, traces


@dataclass
class BenchmarkResult:
    dataset: str
    results: list  # MethodResult per method, in request order
    records: list  # long-form dicts
    failures: list
    em_traces: dict
    manifest: dict

    def by_method(self) -> dict:
        return {r.method: r for r in self.results}


def run_benchmark(
    dataset: LabeledDataset,
    sim_config: SimulationConfig = SimulationConfig(),
    methods=METHODS,
    em_config: EMConfig = EMConfig(),
    dataset_name: str = "dataset",
    jobs: int = 1,
    propensity_on: str = "test",
    instances: Optional[list] = None,
) -> BenchmarkResult:
    """Train and score every method on every simulated instance.

    Failed fits are recorded and excluded from the aggregates; they never
    abort the run.
    """
    methods = [canonical_method(m) for m in methods]
    if len(set(methods)) != len(methods):
        raise ValueError("duplicate methods")
    if propensity_on not in ("test", "train"):
        raise ValueError("propensity_on must be 'test' or 'train'")
    manifest = {}
    if instances is None:
        exp = make_experiment_instances(dataset, sim_config)
        instances, manifest = exp.instances, exp.manifest
    work = [(inst, methods, em_config, propensity_on) for inst in instances]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_run_instance, work))
    else:
        outputs = [_run_instance(w) for w in work]

    rows, failures, traces = [], [], {}
    for r, f, t in outputs:
        rows.extend(r)
        failures.extend(f)
        traces.update(t)
    rows.sort(key=lambda r: (methods.index(r[2]), r[3], r[0], r[1]))
    failures.sort()

    results = []
    for m in methods:
        values = {}
        for split, lab, method, metric, v in rows:
            if method == m:
                values.setdefault(metric, []).append(v)
        n_failed = sum(1 for f in failures if f[2] == m)
        results.append(metrics.MethodResult(m, values, failures=n_failed))
    records = [
        {"dataset": dataset_name, "method": m, "split": s, "labeling": l, "metric": k, "value": v}
        for s, l, m, k, v in rows
    ]
    for f in failures:
        log.warning("split %d labeling %d method %s failed: %s", *f)
    return BenchmarkResult(dataset_name, results, records, failures, traces, manifest)


def _fmt(v) -> str:
    return "nan" if v is None or v != v else format(float(v), ".10g")


def summary_table(bench: BenchmarkResult) -> str:
    lines = ["dataset\tmethod\tmetric\tmean\tci_halfwidth\tn_instances\tn_failed"]
    for res in bench.results:
        for metric in METRICS:
            if metric not in res.values:
                continue
            mean, hw = res.summary[metric]
            lines.append(
                "\t".join(
                    [
                        bench.dataset,
                        res.method,
                        metric,
                        _fmt(mean),
                        _fmt(hw),
                        str(len(res.values[metric])),
                        str(res.failures),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def long_table(bench: BenchmarkResult) -> str:
    lines = ["dataset\tmethod\tsplit\tlabeling\tmetric\tvalue"]
    for r in bench.records:
        lines.append(
            f"{r['dataset']}\t{r['method']}\t{r['split']}\t{r['labeling']}\t{r['metric']}\t{_fmt(r['value'])}"
        )
    for s, l, m, err in bench.failures:
        lines.append(f"{bench.dataset}\t{m}\t{s}\t{l}\tfailed\t{err}")
    return "\n".join(lines) + "\n"
