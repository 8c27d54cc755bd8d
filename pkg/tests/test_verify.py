import numpy as np
import pytest

from sarpu import risk, verify
from sarpu.em import EMConfig


def flipped_pw_risk(yhat, s, e, cost):
    """pw_risk with the sign of the negative-companion term flipped."""
    d1 = risk.delta(cost, 1, np.asarray(yhat))
    d0 = risk.delta(cost, 0, np.asarray(yhat))
    s, e = np.asarray(s), np.asarray(e)
    per = s * (d1 / e - (1 - 1 / e) * d0) + (1 - s) * d0
    return risk.RiskReport(float(per.mean()), risk.EstimatorKind.PROPENSITY_WEIGHTED, cost, len(s))


@pytest.mark.parametrize("name", sorted(verify.SUITES))
def test_suites_pass(name):
    results = verify.run_suite(name)
    assert results
    for r in results:
        assert r.passed, r.line()


def test_mutation_breaks_unbiasedness():
    res = verify.check_unbiasedness(risk_fn=flipped_pw_risk)
    assert not res.passed
    assert res.line().startswith("[FAIL] unbiasedness")


def test_enumeration_matches_closed_form():
    rng = np.random.default_rng(0)
    for _ in range(20):
        yhat, y, e = verify.random_instance(rng, n_max=8)
        e_used = rng.uniform(0.1, 1, size=len(y))
        from sarpu.types import CostSpec

        cost = CostSpec()
        assert verify.enumerate_expectation(yhat, y, e, e_used, cost) == pytest.approx(
            risk.brute_force_expected_pw_risk(yhat, y, e, e_used, cost), abs=1e-12
        )


def test_bound_check_reports_rates():
    res = verify.check_bound_coverage(n_labelings=2000)
    assert "eta=0.1" in res.detail and "eta=0.05" in res.detail
    assert 0 <= res.value <= 0.05


def test_unknown_suite():
    with pytest.raises(ValueError):
        verify.run_suite("everything")


def test_monotonicity_violation_helper():
    trace = [{"objective": v} for v in (-10.0, -9.0, -9.5, -8.0)]
    assert verify.monotonicity_violation(trace) == pytest.approx(0.5)
    assert verify.monotonicity_violation(trace[:1]) == 0.0


def test_fixed_point_surrogate_weights_are_probabilities():
    pu, w, f, e = verify.fixed_point_surrogate(grid=5)
    assert w.sum() == pytest.approx(1.0)
    assert pu.n == 2 * 5 * 2


def test_em_monotone_without_warm_start():
    res = verify.check_em_monotone(config=EMConfig(warm_start=False))
    assert res.passed, res.detail
