"""End-to-end acceptance checks, one test per criterion.

Each test tags itself with ``record_property("criterion", k)``; the
conftest hook prints one PASS/FAIL line per criterion after the run.
Every schedule produced here is collected and audited by criterion 8.
"""

import itertools
import math
import os
import time

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.optimize import linprog

from repta.ammonia import fit_t_trans, transition
from repta.config import PriceGrid, TechnoEconomicConfig
from repta.economics import crf, proposition1_check
from repta.milp import Domain, Model, SolveOptions, big_m_product, solve
from repta.pricing import price
from repta.profiles import synthetic_pair
from repta.robust import solve_robust, worst_case_profiles
from repta.schedule import Distribution, PriceSet
from repta.sizing import SCENARIOS, TABLE_V_COLUMNS, GridSpec, InfeasibleError, Overrides, audit_schedule, run_benchmark, size

from conftest import toy_config, toy_profiles
from test_pricing import enumerate_prices

TIGHT = SolveOptions(gap=1e-9)
AUDIT = []  # (label, schedule, capacities, cfg, wind, solar)


def _keep(label, sized, wind, solar):
    AUDIT.append((label, sized.schedule, sized.capacities, sized.cfg, wind, solar))


@pytest.fixture
def criterion(record_property):
    def tag(k, title):
        record_property("criterion", k)
        record_property("title", title)
    return tag


# -- 1 -------------------------------------------------------------------------


def test_c1_proposition1_invariance(criterion):
    criterion(1, "inner prices leave total revenue unchanged")
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    n = 168
    wind, solar = synthetic_pair(n=n, seed=11)
    worst, schedules = 0.0, 0
    while schedules < 20:
        cfg = TechnoEconomicConfig(n_hours=n, p_nh3=float(rng.uniform(2000, 7000)), dt_as=float(rng.choice([4, 24, 168])))
        pins = Overrides(c_w=float(rng.uniform(100, 400)), c_s=float(rng.uniform(0, 300)),
                         c_ae=5.0 * int(rng.integers(12, 40)), c_hs=float(rng.uniform(2e4, 2e5)))
        try:
            sized = size(cfg, wind, solar, pins, SolveOptions(gap=1e-6))
        except InfeasibleError:
            continue
        _keep(f"c1[{schedules}]", sized, wind, solar)
        s = sized.schedule
        # a random admissible hourly split of inner supply and purchases
        inner = np.clip(s.p_inner, 0, None)
        purch = np.clip(s.p_ae + s.p_as - inner, 0, None)
        inner = s.p_ae + s.p_as - purch
        lo, hi = np.maximum(0, inner - s.p_as), np.minimum(inner, s.p_ae)
        ae_in = lo + rng.uniform(0, 1, n) * (hi - lo)
        dist = Distribution(ae_in, s.p_ae - ae_in, inner - ae_in, s.p_as - (inner - ae_in))
        samples = [PriceSet.market(cfg, rng.uniform(0, 0.6), rng.uniform(0, 6)) for _ in range(10)]
        gap = proposition1_check(s, sized.capacities, dist, cfg, samples)
        worst = max(worst, gap / max(1.0, abs(sized.dtr)))
        schedules += 1
    assert worst <= 1e-6
    assert time.perf_counter() - t0 < 10


# -- 2 -------------------------------------------------------------------------


def _kappa_as(cfg):
    n2_per_nm3 = 1000 / 22.414 / 3 * 28.0134 / 1e6
    return cfg.kappa_n2 * n2_per_nm3 + cfg.kappa_nh3 * cfg.c_h2ma


def _invest(cfg, c_w, c_s, c_ae, c_hs):
    total = 0.0
    for name, cap in (("WT", c_w), ("PV", c_s), ("AE", c_ae), ("HS", c_hs)):
        f = cfg.facilities[name]
        total += cfg.year_fraction * crf(cfg.interest, f.lifetime) * f.unit_cost * (1 + f.om_fraction) * cap
    f = cfg.facilities["AS"]
    total += cfg.year_fraction * crf(cfg.interest, f.lifetime) * f.unit_cost * (1 + f.om_fraction) * cfg.m_nh3_nominal / 1e5
    return total


def operation_lp(cfg, wind, solar, c_w, c_s, c_ae, c_hs):
    """Best operating revenue for fixed capacities, written straight as one LP.

    Variables per hour: sell, purchase, curtailment, electrolyzer power,
    hydrogen in, hydrogen out; then the tank level at hour boundaries and
    the per-window ammonia setpoints. Returns ``(revenue, x)`` or None.
    """
    n, dt = cfg.n_hours, cfg.dt
    steps, windows = cfg.steps_per_window, cfg.n_windows
    q_r, k_as = cfg.q_h2_rated, _kappa_as(cfg)
    gen = c_w * wind.values + c_s * solar.values
    S, U, C, A, QI, QO = (np.arange(n) + k * n for k in range(6))
    NS = 6 * n + np.arange(n + 1)
    QSS = 7 * n + 1 + np.arange(windows)
    nv = 7 * n + 1 + windows
    eq_r, eq_c, eq_v, eq_b = [], [], [], []
    ub_r, ub_c, ub_v, ub_b = [], [], [], []

    def row(store, cols, vals, rhs):
        r, c, v, b = store
        k = len(b)
        r.extend([k] * len(cols))
        c.extend(cols)
        v.extend(vals)
        b.append(rhs)

    EQ, UB = (eq_r, eq_c, eq_v, eq_b), (ub_r, ub_c, ub_v, ub_b)
    for t in range(n):
        # sold + curtailed + loads = generation + purchase
        row(EQ, [S[t], C[t], A[t], QO[t], U[t]], [1, 1, 1, k_as, -1], gen[t])
        row(UB, [C[t]], [1], gen[t])
        row(EQ, [A[t], QI[t]], [1, -cfg.kappa_h2], 0.0)
        row(EQ, [NS[t + 1], NS[t], QI[t], QO[t]], [1, -1, -dt, dt], 0.0)
        row(EQ, [QO[t], QSS[t // steps]], [1, -1], 0.0)
    row(UB, list(S) + list(U), [dt] * n + [-dt] * n, cfg.r_net * dt * gen.sum())
    row(UB, list(QO), [cfg.c_h2ma * dt] * n, cfg.m_nh3_horizon)
    for w in range(windows - 1):
        row(UB, [QSS[w + 1], QSS[w]], [1, -1], cfg.ramp_up * q_r * dt)
        row(UB, [QSS[w], QSS[w + 1]], [1, -1], cfg.ramp_down * q_r * dt)
    bounds = [(0, None)] * (6 * n) + [(cfg.eta_hs_min * c_hs, cfg.eta_hs_max * c_hs)] * (n + 1)
    bounds += [(cfg.eta_as_min * q_r, cfg.eta_as_max * q_r)] * windows
    for t in range(n):
        bounds[A[t]] = (cfg.eta_ae_min * c_ae, cfg.eta_ae_max * c_ae)
    bounds[NS[0]] = bounds[NS[n]] = (cfg.hs_initial * c_hs, cfg.hs_initial * c_hs)
    c = np.zeros(nv)
    c[S] = -1e3 * cfg.p_fit * dt
    c[U] = 1e3 * cfg.p_purch * dt
    c[QO] = -cfg.p_nh3 * cfg.c_h2ma * dt
    A_eq = sp.csr_matrix((eq_v, (eq_r, eq_c)), shape=(len(eq_b), nv))
    A_ub = sp.csr_matrix((ub_v, (ub_r, ub_c)), shape=(len(ub_b), nv))
    res = linprog(c, A_ub=A_ub, b_ub=ub_b, A_eq=A_eq, b_eq=eq_b, bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9})
    if res.status != 0:
        return None
    x = res.x
    # selling and buying in the same hour only loses money, so the LP
    # optimum never needs the exclusivity binaries; check that it holds
    assert np.all(np.minimum(x[S], x[U]) <= 1e-6 * (1 + gen.max()))
    return -res.fun - _invest(cfg, c_w, c_s, c_ae, c_hs), x


def test_c2_two_stage_matches_enumeration(criterion):
    criterion(2, "decomposed pipeline equals exhaustive enumeration on a 24 h instance")
    t0 = time.perf_counter()
    cfg = toy_config(24)
    wind, solar = toy_profiles(24)
    grid = {"c_w": GridSpec(0, 60, 7), "c_s": GridSpec(0, 40, 4), "n_ae": GridSpec(14, 2, 8),
            "c_hs": GridSpec(0, 2.5e4, 5)}
    tuples = list(itertools.product(*(g.values() for g in grid.values())))
    assert len(tuples) <= 1e4
    best, best_caps = -math.inf, None
    for c_w, c_s, n_ae, c_hs in tuples:
        out = operation_lp(cfg, wind, solar, c_w, c_s, n_ae * cfg.ae_unit_size, c_hs)
        if out is not None and out[0] > best:
            best, best_caps = out[0], (c_w, c_s, n_ae, c_hs)
    assert best_caps is not None

    sized = size(cfg, wind, solar, Overrides(grid=grid), TIGHT)
    _keep("c2", sized, wind, solar)
    assert sized.dtr == pytest.approx(best, rel=1e-6)

    pgrid = PriceGrid(0.0, 0.5, 8, 5.0)
    outcome = price(sized, cfg, pgrid)
    oracle_obj, _ = enumerate_prices(sized, cfg, pgrid)
    assert outcome.objective == pytest.approx(oracle_obj, rel=1e-6, abs=1e-9)
    # the enumerated capacity tuple gives the same pricing optimum when re-sized on its own
    c_w, c_s, n_ae, c_hs = best_caps
    again = size(cfg, wind, solar, Overrides(c_w=c_w, c_s=c_s, c_ae=n_ae * cfg.ae_unit_size, c_hs=c_hs), TIGHT)
    assert again.dtr == pytest.approx(best, rel=1e-6)
    assert time.perf_counter() - t0 < 300


# -- 3 -------------------------------------------------------------------------


def test_c3_igdt_trends(criterion, fortnight_profitable):
    criterion(3, "robust alpha rises with beta, revenue target kept, ammonia share falls")
    t0 = time.perf_counter()
    cfg, wind, solar, sized = fortnight_profitable
    _keep("c3:deterministic", sized, wind, solar)
    betas = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    results = [solve_robust(sized, b, cfg, wind, solar) for b in betas]
    alphas = [r.alpha_star for r in results]
    r_as = [r.r_as for r in results]
    assert alphas[0] <= 1e-3
    assert all(b >= a for a, b in zip(alphas, alphas[1:]))
    assert all(b <= a + 1e-9 for a, b in zip(r_as, r_as[1:]))
    for r in results:
        rtr, dtr = r.inner.dtr, sized.dtr
        assert rtr >= (1 - r.beta) * dtr - 1e-6 * abs(dtr)
        w, s = worst_case_profiles(wind, solar, r.alpha_star)
        _keep(f"c3:beta={r.beta}", r.inner, w, s)
    assert time.perf_counter() - t0 < 600


# -- 4 -------------------------------------------------------------------------


FULL_YEAR = os.environ.get("REPTA_FULL_YEAR") == "1"


def test_c4_benchmark_dominance(criterion):
    hours = 8760 if FULL_YEAR else 720
    criterion(4, f"proposed design dominates BS1-BS4 at {hours} h, report has every table column")
    t0 = time.perf_counter()
    cfg = TechnoEconomicConfig(n_hours=hours)
    wind, solar = synthetic_pair(3500 * hours / 8760, 1800 * hours / 8760, seed=1, n=hours)
    opts = SolveOptions(gap=1e-4)
    rows = {}
    for scenario in SCENARIOS:
        rows[scenario] = run_benchmark(scenario, cfg, wind, solar, opts)
        assert set(TABLE_V_COLUMNS) <= set(rows[scenario])
        sized = size(cfg, wind, solar, Overrides.for_scenario(scenario), opts)
        _keep(f"c4:{scenario}", sized, wind, solar)
    dtr = {k: r["DTR_1e4_RMB_per_yr"] for k, r in rows.items()}
    slack = 1e-4 * abs(dtr["Proposed"])  # the solver gap
    for k in ("BS1", "BS2", "BS3", "BS4"):
        assert dtr["Proposed"] >= dtr[k] - slack
    assert dtr["Proposed"] > dtr["BS4"] + slack
    assert time.perf_counter() - t0 < (1800 if FULL_YEAR else 180)


# -- 5 -------------------------------------------------------------------------


def test_c5_flexibility_monotone(criterion, fortnight_profitable):
    criterion(5, "revenue does not rise as the ammonia scheduling period grows")
    t0 = time.perf_counter()
    cfg, wind, solar, _ = fortnight_profitable
    dtr = []
    for dt_as in (4.0, 24.0, 168.0):
        sized = size(cfg.replace(dt_as=dt_as), wind, solar, None, SolveOptions(gap=1e-8))
        _keep(f"c5:{dt_as}", sized, wind, solar)
        dtr.append(sized.dtr)
    assert all(b <= a + 1e-6 * abs(a) for a, b in zip(dtr, dtr[1:]))
    assert time.perf_counter() - t0 < 600


# -- 6 -------------------------------------------------------------------------


def test_c6_transition_fit(criterion):
    criterion(6, "transition time constant recovered from clean and noisy data")
    t0 = time.perf_counter()
    q_r = TechnoEconomicConfig().q_h2_rated
    q0, q1, dt = 0.4 * q_r, 0.9 * q_r, 0.25
    tau = dt * np.arange(48)
    clean = transition(q0, q1, 2.0, tau)
    t_hat, _ = fit_t_trans(clean, q0, q1, dt)
    assert abs(t_hat - 2.0) <= 1e-3
    noisy = clean * (1 + 0.02 * np.random.default_rng(7).normal(size=clean.size))
    t_hat, rmse = fit_t_trans(noisy, q0, q1, dt)
    assert abs(t_hat - 2.0) <= 0.05 * 2.0
    assert rmse <= 0.03 * q_r
    assert time.perf_counter() - t0 < 1


# -- 7 -------------------------------------------------------------------------


def test_c7_linearization_exact(criterion):
    criterion(7, "big-M products exact; finer price grids never worse")
    t0 = time.perf_counter()
    for W in (0.0, 1e-3, 1.0, 10.0, 240.0, 7.5e5):
        for sense in ("min", "max"):
            for b_val in (0, 1):
                for w_val in (0.0, W / 3, W):
                    m = Model()
                    b = m.add_var("b", b_val, b_val, Domain.BINARY)
                    w = m.add_var("w", 0.0, W)
                    z = big_m_product(m, b, w)
                    m.add_constraint(w, "==", w_val)
                    m.set_objective(z, sense)
                    res = solve(m, SolveOptions(gap=0))
                    assert abs(res.value(z) - b_val * w_val) <= 1e-9 * W
    cfg = toy_config(24)
    wind, solar = toy_profiles(24)
    sized = size(cfg, wind, solar, None, TIGHT)
    _keep("c7", sized, wind, solar)
    objs = [price(sized, cfg, PriceGrid(0.0, 0.5, n_p, 5.0)).objective for n_p in (8, 16, 32)]
    assert objs[0] >= objs[1] - 1e-9 and objs[1] >= objs[2] - 1e-9
    assert time.perf_counter() - t0 < 30


# -- 8 -------------------------------------------------------------------------


def test_c8_every_schedule_audits_clean(criterion):
    criterion(8, "every schedule above passes the independent constraint audit")
    assert len(AUDIT) >= 20, "run the whole module so the other criteria contribute schedules"
    failures = []
    for label, sched, caps, cfg, wind, solar in AUDIT:
        bad = audit_schedule(sched, caps, cfg, wind, solar, tol=1e-6)
        if bad:
            failures.append((label, bad[:3]))
    assert failures == []
