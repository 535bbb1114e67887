import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repta.ammonia import (
    AmmoniaError, AmmoniaParams, FitUndefinedError, PlanError, QssPlan, RampViolationError, as_power,
    derive_kappa_as, discretize_plan, fit_t_trans, kg_to_nm3, min_t_trans_for_ramp, transition,
)
from repta.config import TechnoEconomicConfig
from repta.schedule import Schedule

P = AmmoniaParams()
Q_R = P.q_h2_rated


def test_kappa_as_by_hand_stoichiometry():
    mol_h2 = 1000 / 22.414  # mol per Nm3
    n2_t = mol_h2 / 3 * 28.0134 / 1e6
    assert n2_t == pytest.approx(4.164e-4, rel=1e-3)
    expected = 0.24 * n2_t + 0.64 * 5.060e-4
    assert derive_kappa_as(P) == pytest.approx(expected, rel=1e-12)
    assert derive_kappa_as(P) == pytest.approx(4.237e-4, rel=1e-3)


def test_kappa_as_zero():
    assert derive_kappa_as(AmmoniaParams(kappa_n2=0, kappa_nh3=0)) == 0.0


def test_hydrogen_to_ammonia_stoichiometry():
    nh3_t = 2 / 3 * (1000 / 22.414) * 17.031 / 1e6
    assert nh3_t == pytest.approx(5.060e-4, rel=2e-3)


def test_as_power_examples():
    assert as_power(0.0, P) == 0.0
    rated = 1e5 / 5.060e-4 / 8760
    assert rated == pytest.approx(22560, rel=1e-4)
    assert as_power(rated, P) == pytest.approx(9.56, abs=0.005)
    assert as_power(2 * 1234.0, P) == pytest.approx(2 * as_power(1234.0, P))
    with pytest.raises(AmmoniaError):
        as_power(-1.0, P)


def test_transition_examples():
    assert transition(880, 1980, 2.0, 0.0) == 880
    assert transition(880, 1980, 2.0, 40.0) == pytest.approx(1980, rel=1e-8)
    assert transition(880, 1980, 2.066, 2.066) == pytest.approx(1980 - 1100 / math.e, abs=1e-9)
    assert transition(880, 1980, 2.066, 2.066) == pytest.approx(1575.3, abs=0.05)
    with pytest.raises(AmmoniaError):
        transition(1, 2, 0.0, 1.0)
    with pytest.raises(AmmoniaError):
        transition(1, 2, 1.0, -1.0)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0, 5e4), st.floats(0, 5e4), st.floats(0.01, 50), st.floats(0, 200),
)
def test_transition_stays_between_endpoints(q0, q1, t, tau):
    q = transition(q0, q1, t, tau)
    assert min(q0, q1) - 1e-9 * max(1, q0, q1) <= q <= max(q0, q1) + 1e-9 * max(1, q0, q1)


def test_discretize_constant_plan():
    plan = QssPlan(np.full(3, 0.8 * Q_R))
    out = discretize_plan(plan, P)
    np.testing.assert_allclose(out, 0.8 * Q_R)
    assert len(out) == 72


def test_discretize_two_period_matches_transition():
    lo, hi = 0.4 * Q_R, 0.9 * Q_R
    out = discretize_plan(QssPlan([lo, hi]), P)
    np.testing.assert_allclose(out[:24], lo)
    expected = transition(lo, hi, 2.0, np.arange(1, 25, dtype=float))
    np.testing.assert_allclose(out[24:], expected, rtol=1e-12)


def test_discretize_rejects_overload():
    with pytest.raises(PlanError):
        discretize_plan(QssPlan([0.5 * Q_R, 1.2 * Q_R]), P)


def test_discretize_rejects_ramp_breaking_jump():
    plan = QssPlan([0.3 * Q_R, 1.1 * Q_R])
    with pytest.raises(RampViolationError):
        discretize_plan(plan, P)
    # a slow enough transition makes the same plan admissible
    t_min = min_t_trans_for_ramp(0.8 * Q_R, P)
    slow = AmmoniaParams(t_trans=t_min * 1.001)
    discretize_plan(plan, slow)


def test_plan_count_checked():
    with pytest.raises(PlanError):
        QssPlan([Q_R]).validate(P, n_windows=2)


def test_plan_consumption_matches_ledger_ammonia():
    cfg = TechnoEconomicConfig(n_hours=48)
    out = discretize_plan(QssPlan([0.5 * Q_R, 0.7 * Q_R]), P)
    zeros = np.zeros(48)
    sched = Schedule(zeros, zeros, zeros, zeros, zeros, zeros, zeros, zeros, out, out, np.zeros(49))
    assert sched.m_nh3(cfg.c_h2ma) == pytest.approx(cfg.c_h2ma * out.sum(), rel=1e-9)


def test_kg_conversion():
    assert float(kg_to_nm3(1.0)) == pytest.approx(11.126)


def _first_order(t_true, n=24, q0=880.0, q1=1980.0, dt=1.0):
    return transition(q0, q1, t_true, dt * np.arange(n))


def test_fit_noiseless():
    t_hat, rmse = fit_t_trans(_first_order(2.0), 880.0, 1980.0)
    assert t_hat == pytest.approx(2.0, abs=1e-3)
    assert rmse < 1e-2


def test_fit_scale_invariant():
    rng = np.random.default_rng(3)
    y = _first_order(2.5) * (1 + 0.01 * rng.normal(size=24))
    t1, r1 = fit_t_trans(y, 880, 1980)
    t2, r2 = fit_t_trans(7 * y, 7 * 880, 7 * 1980)
    assert t2 == pytest.approx(t1, abs=2e-4)
    assert r2 == pytest.approx(7 * r1, rel=1e-3)


def test_fit_constant_target_goes_to_lower_bound():
    y = np.full(10, 1980.0)
    t_hat, rmse = fit_t_trans(y, 880, 1980)
    assert t_hat == pytest.approx(0.05, abs=1e-3)
    # only the first sample (at tau = 0) keeps its mismatch
    assert rmse == pytest.approx(1100 / math.sqrt(10), rel=1e-6)


def test_fit_errors_and_divergent_data():
    with pytest.raises(FitUndefinedError):
        fit_t_trans([1, 2, 3], 5, 5)
    with pytest.raises(AmmoniaError):
        fit_t_trans([1, 2], 0, 5)
    t_hat, rmse = fit_t_trans(np.array([0, 100, -50, 400, -300.0]), 0, 10)
    assert math.isfinite(t_hat) and rmse > 50
