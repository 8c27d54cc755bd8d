"""Brute-force and Monte-Carlo checks of the estimator theory and of EM.

Each check returns a :class:`CheckResult`.  The oracles here enumerate
labelings or joint distributions explicitly and never reuse the closed forms
they are checking.  Estimator functions are injectable so a deliberately
broken estimator can be shown to fail.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit, logit

from sarpu import risk
from sarpu.em import EMConfig, e_step, m_step, run_em
from sarpu.glm import TrainConfig
from sarpu.types import BoundSpec, CostKind, CostSpec, LinearModel, PUDataset

COSTS = (CostKind.MAE, CostKind.MSE, CostKind.LOGLOSS)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    value: float = float("nan")
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def random_instance(rng, n_max=12, e_min=0.05):
    n = int(rng.integers(1, n_max + 1))
    y = rng.integers(0, 2, size=n)
    e = rng.uniform(e_min, 1.0, size=n)
    yhat = rng.uniform(0.01, 0.99, size=n)
    return yhat, y, e


def enumerate_expectation(yhat, y, e_true, e_used, cost, risk_fn: Callable = risk.pw_risk) -> float:
    """E over all labelings of the positives, each weighted by its probability."""
    y = np.asarray(y)
    pos = np.flatnonzero(y == 1)
    total = 0.0
    for bits in itertools.product((0, 1), repeat=len(pos)):
        s = np.zeros(len(y), dtype=int)
        s[pos] = bits
        b = np.asarray(bits)
        prob = float(np.prod(np.where(b == 1, e_true[pos], 1.0 - e_true[pos])))
        total += prob * float(risk_fn(yhat, s, e_used, cost))
    return total


@_timed
def check_unbiasedness(n_instances=100, n_max=12, seed=0, tol=1e-12, risk_fn=risk.pw_risk):
    """Exhaustive expectation of the estimator equals the true risk."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(n_instances):
        yhat, y, e = random_instance(rng, n_max)
        cost = CostSpec(COSTS[k % 3])
        exp = enumerate_expectation(yhat, y, e, e, cost, risk_fn)
        worst = max(worst, abs(exp - risk.true_risk(yhat, y, cost).value))
    return CheckResult(
        "unbiasedness", worst <= tol, f"max |E[R_hat] - R| = {worst:.3g} over {n_instances} instances (tol {tol:g})", worst
    )


@_timed
def check_bias(n_instances=100, n_max=12, seed=1, tol=1e-12, enumerate_upto=10):
    """Closed-form bias equals R - E[R_hat] with misspecified propensities.

    Uses the row-wise expectation for every instance and, for instances with
    at most ``enumerate_upto`` positives, the literal enumeration as well.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        yhat, y, e = random_instance(rng, n_max)
        e_hat = rng.uniform(0.05, 1.0, size=len(y))
        for kind in COSTS:
            cost = CostSpec(kind)
            r = risk.true_risk(yhat, y, cost).value
            b = risk.pw_bias(yhat, y, e, e_hat, cost)
            rowwise = risk.brute_force_expected_pw_risk(yhat, y, e, e_hat, cost)
            worst = max(worst, abs((r - rowwise) - b))
            if y.sum() <= enumerate_upto:
                full = enumerate_expectation(yhat, y, e, e_hat, cost)
                worst = max(worst, abs((r - full) - b), abs(full - rowwise))
    return CheckResult(
        "bias", worst <= tol, f"max |(R - E[R_hat]) - bias| = {worst:.3g} (tol {tol:g})", worst
    )


@_timed
def check_expected_risk_degeneracy(n=50, seed=2, eps=1e-12):
    """The all-positive hypothesis has (near) zero expected risk."""
    rng = np.random.default_rng(seed)
    y = np.zeros(n, dtype=int)
    y[: n // 2] = 1
    e = rng.uniform(0.2, 0.8, size=n)
    s = (rng.uniform(size=n) < y * e).astype(int)
    cost = CostSpec(CostKind.MAE, clip_epsilon=eps)
    yhat = np.full(n, 1.0 - eps)
    exp = risk.expected_risk(yhat, s, e, cost).value
    tr = risk.true_risk(yhat, y, cost).value
    pw = risk.pw_risk(yhat, s, e, cost).value
    ok = exp <= 1e-9 and tr > 0.1 and abs(pw) > 0.1
    return CheckResult(
        "expected-risk degeneracy", ok, f"R_exp={exp:.3g}, R={tr:.3f}, R_pw={pw:.3f}", exp
    )


def bound_instance(n=200, seed=3, e_low=0.2, e_high=0.8):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n)
    e = rng.uniform(e_low, e_high, size=n)
    yhat = rng.uniform(0.01, 0.99, size=n)
    return yhat, y, e


@_timed
def check_bound_coverage(n=200, n_labelings=10_000, etas=(0.1, 0.05), seed=3):
    """Fraction of labelings where |R_hat - R| exceeds the bound stays <= eta."""
    yhat, y, e = bound_instance(n, seed)
    cost = CostSpec(CostKind.MSE)
    r = risk.true_risk(yhat, y, cost).value
    t1 = risk.pw_terms(yhat, np.ones(n), e, cost)
    t0 = risk.pw_terms(yhat, np.zeros(n), e, cost)
    rng = np.random.default_rng(seed + 1)
    S = rng.uniform(size=(n_labelings, n)) < (y * e)
    est = np.where(S, t1, t0).mean(axis=1)
    dev = np.abs(est - r)
    rates, ok = {}, True
    for eta in etas:
        bound = risk.estimator_bound(cost, BoundSpec(eta, n))
        rates[eta] = float(np.mean(dev > bound))
        ok &= rates[eta] <= eta
    detail = ", ".join(f"eta={k:g}: exceedance {v:.4f}" for k, v in rates.items())
    return CheckResult("estimator bound coverage", bool(ok), detail, max(rates.values()))


@_timed
def check_erm_bound(n=200, n_labelings=1000, grid=16, eta=0.05, seed=4):
    """True risk of the empirical minimiser rarely exceeds its estimate + slack."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=n)
    y = (rng.uniform(size=n) < expit(3 * x)).astype(int)
    e = 0.2 + 0.6 * (x + 1) / 2
    slopes = np.linspace(-4, 4, grid)
    offsets = np.linspace(-2, 2, grid)
    H = np.array([expit(a * x + b) for a in slopes for b in offsets])
    cost = CostSpec(CostKind.MSE)
    true = np.array([risk.true_risk(h, y, cost).value for h in H])
    T1 = np.array([risk.pw_terms(h, np.ones(n), e, cost) for h in H])
    T0 = np.array([risk.pw_terms(h, np.zeros(n), e, cost) for h in H])
    slack = risk.erm_bound(cost, BoundSpec(eta, n, hypothesis_count=len(H)))
    S = rng.uniform(size=(n_labelings, n)) < (y * e)
    violations = 0
    for s in S:
        est = np.where(s, T1, T0).mean(axis=1)
        best = int(np.argmin(est))
        violations += true[best] > est[best] + slack
    rate = violations / n_labelings
    return CheckResult(
        "ERM bound", rate <= eta, f"|H|={len(H)}, violation rate {rate:.4f} (eta {eta:g})", rate
    )


def _one_hot_models(f_vals, e_vals):
    k = len(f_vals)
    X = np.eye(k)
    return X, LinearModel(logit(f_vals), 0.0), LinearModel(logit(e_vals), 0.0)


@_timed
def check_estep_bayes(n_spaces=50, max_configs=8, seed=5, tol=1e-12):
    """E-step equals Pr(y=1 | s, x) from explicit enumeration of the joint.

    Each instance space has up to eight configurations x with known
    Pr(y=1|x) and e(x).  The joint Pr(x, y, s) is tabulated and conditioned
    by summation.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_spaces):
        k = int(rng.integers(1, max_configs + 1))
        X, f, e = _one_hot_models(rng.uniform(0.05, 0.95, k), rng.uniform(0.05, 0.95, k))
        px = rng.dirichlet(np.ones(k))
        # probabilities the models actually represent
        fx = expit(X @ f.weights + f.intercept)
        ex = expit(X @ e.weights + e.intercept)
        joint = np.zeros((k, 2, 2))  # x, y, s
        joint[:, 1, 1] = px * fx * ex
        joint[:, 1, 0] = px * fx * (1 - ex)
        joint[:, 0, 0] = px * (1 - fx)
        for s_val in (0, 1):
            exact = joint[:, 1, s_val] / joint[:, :, s_val].sum(axis=1)
            pu = PUDataset(X, np.full(k, s_val), propensity_attr_indices=tuple(range(k)))
            got = e_step(f, e, pu, prob_clip=1e-12)
            worst = max(worst, float(np.max(np.abs(got - exact))))
    return CheckResult(
        "E-step Bayes equivalence", worst <= tol, f"max deviation {worst:.3g} over {n_spaces} spaces", worst
    )


def monotonicity_violation(trace, key="objective") -> float:
    vals = np.array([r[key] for r in trace], dtype=float)
    if len(vals) < 2:
        return 0.0
    return float(max(0.0, -np.min(np.diff(vals))))


@_timed
def check_em_monotone(pu: PUDataset = None, config: EMConfig = EMConfig(), tol=1e-9, seed=6):
    if pu is None:
        from sarpu.simulate import SimulationConfig, make_blobs, make_experiment_instances

        data = make_blobs(1000, 4, 3.0, seed=seed)
        pu = make_experiment_instances(data, SimulationConfig(n_splits=1, n_labelings=1, seed=seed))[0].train
    res = run_em(pu, config)
    worst = monotonicity_violation(res.trace)
    return CheckResult(
        "EM monotonicity",
        worst <= tol,
        f"{res.iterations} iterations, largest objective decrease {worst:.3g} (tol {tol:g})",
        worst,
    )


def fixed_point_surrogate(grid=21):
    """Dense grid with exact expected weights under known (f*, e*).

    Rows are (x1, x_e) grid points, each present once with s=1 and once with
    s=0, weighted by Pr(x) Pr(s | x).
    """
    x1 = np.linspace(-1, 1, grid)
    pts = np.array([(a, b) for a in x1 for b in (0.0, 1.0)])
    f_star = LinearModel([2.0, 0.5], -0.3)
    e_star = LinearModel([1.5], -0.7)
    fx = expit(pts @ f_star.weights + f_star.intercept)
    ex = expit(pts[:, [1]] @ e_star.weights + e_star.intercept)
    X = np.vstack([pts, pts])
    s = np.concatenate([np.ones(len(pts), int), np.zeros(len(pts), int)])
    w = np.concatenate([fx * ex, 1 - fx * ex]) / len(pts)
    pu = PUDataset(X, s, propensity_attr_indices=(1,))
    return pu, w, f_star, e_star


@_timed
def check_fixed_point(tol=1e-4):
    pu, w, f_star, e_star = fixed_point_surrogate()
    cfg = EMConfig(train=TrainConfig(l2_strength=0.0, grad_tolerance=1e-12, prob_clip=1e-12))
    yhat = e_step(f_star, e_star, pu, prob_clip=1e-12)
    # cold start: the M-step optimum itself must be (f*, e*)
    f, e = m_step(yhat, pu, cfg, init=None, sample_weight=w)
    dev = max(
        float(np.max(np.abs(f.params - f_star.params))),
        float(np.max(np.abs(e.params - e_star.params))),
    )
    return CheckResult("EM fixed point", dev <= tol, f"parameter drift {dev:.3g} (tol {tol:g})", dev)


SUITES = {
    "props": (check_unbiasedness, check_bias, check_expected_risk_degeneracy),
    "bounds": (check_bound_coverage, check_erm_bound),
    "em": (check_estep_bayes, check_fixed_point, check_em_monotone),
}


def run_suite(name: str) -> list:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return [check() for check in SUITES[name]]
