import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repta.milp import (
    ConfigurationError, Domain, FrozenModelError, Model, ModelMismatchError, SolveOptions, Status,
    ValidationError, available_backends, big_m_product, quicksum, solve, verify_solution,
)

BACKENDS = available_backends()


def test_backends_listed():
    assert set(BACKENDS) == {"highs", "bnb"}


def test_bound_tightening():
    m = Model()
    x = m.add_var("x")
    assert x.bounds == (0.0, math.inf)
    x.set_bounds(0, 10)
    assert x.bounds == (0.0, 10.0)
    with pytest.raises(ValidationError):
        x.set_bounds(5, 1)


def test_trivial_self_constraint_is_fine():
    m = Model()
    x = m.add_var("x", 0, 4)
    m.add_constraint(x, "<=", x, name="tautology")
    m.set_objective(x, "max")
    res = solve(m)
    assert res.objective == pytest.approx(4)
    assert verify_solution(m, res) == []


def test_nan_and_inf_coefficients_rejected():
    m = Model()
    x = m.add_var("x")
    with pytest.raises(ValidationError):
        m.add_constraint(x * float("nan"), "<=", 1)
    with pytest.raises(ValidationError):
        m.add_rows("r", [(m.add_vars("y", 2), [1.0, math.inf])], "<=", 0)
    with pytest.raises(ValidationError):
        m.add_var("z", float("nan"), 1)


def test_foreign_variable_rejected():
    a, b = Model("a"), Model("b")
    x = a.add_var("x")
    y = b.add_var("y")
    with pytest.raises(ModelMismatchError):
        a.add_constraint(y, "<=", 1)
    with pytest.raises(ModelMismatchError):
        _ = x + y


def test_frozen_model_rejects_changes():
    m = Model()
    x = m.add_var("x", 0, 1)
    m.set_objective(x, "max")
    solve(m)
    with pytest.raises(FrozenModelError):
        m.add_var("y")


def test_linexpr_drops_zero_terms():
    m = Model()
    x, y = m.add_var("x"), m.add_var("y")
    e = 2 * x + y - y
    assert set(e.terms) == {x.index}


def test_unknown_backend():
    m = Model()
    x = m.add_var("x", 0, 1)
    m.set_objective(x, "max")
    with pytest.raises(ConfigurationError):
        solve(m, SolveOptions(backend="gurobi"))


def test_empty_model_rejected():
    with pytest.raises(ValidationError):
        solve(Model())


@pytest.mark.parametrize("backend", BACKENDS)
def test_simple_lp(backend):
    m = Model()
    x = m.add_var("x")
    m.add_constraint(x, "<=", 3)
    m.set_objective(x, "max")
    res = solve(m, SolveOptions(backend=backend))
    assert res.status is Status.OPTIMAL
    assert res.value(x) == pytest.approx(3)


@pytest.mark.parametrize("backend", BACKENDS)
def test_infeasible(backend):
    m = Model()
    x = m.add_var("x", -math.inf, math.inf)
    m.add_constraint(x, ">=", 1)
    m.add_constraint(x, "<=", 0)
    m.set_objective(x, "max")
    assert solve(m, SolveOptions(backend=backend)).status is Status.INFEASIBLE


@pytest.mark.parametrize("backend", BACKENDS)
def test_unbounded(backend):
    m = Model()
    x = m.add_var("x")
    m.set_objective(x, "max")
    assert solve(m, SolveOptions(backend=backend)).status is Status.UNBOUNDED


@pytest.mark.parametrize("backend", BACKENDS)
def test_knapsack_matches_brute_force(backend):
    w, v = [2, 3, 4], [3, 4, 5]
    best = max(
        sum(vi for vi, pick in zip(v, s) if pick)
        for s in itertools.product((0, 1), repeat=3)
        if sum(wi for wi, pick in zip(w, s) if pick) <= 5
    )
    assert best == 7
    m = Model()
    b = m.add_vars("b", 3, 0, 1, Domain.BINARY)
    m.add_constraint(b.sum(np.array(w, float)), "<=", 5)
    m.set_objective(b.sum(np.array(v, float)), "max")
    res = solve(m, SolveOptions(backend=backend))
    assert res.objective == pytest.approx(7)
    np.testing.assert_allclose(res.value(b), [1, 1, 0])
    assert verify_solution(m, res) == []


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_backends_agree_with_enumeration(seed):
    rng = np.random.default_rng(seed)
    n_int, n_cont, n_rows = 3, 2, 3
    A = rng.integers(-3, 5, size=(n_rows, n_int + n_cont)).astype(float)
    rhs = rng.integers(2, 12, size=n_rows).astype(float)
    c = rng.integers(-2, 6, size=n_int + n_cont).astype(float)
    ub_int = 3

    def build():
        m = Model()
        xi = m.add_vars("xi", n_int, 0, ub_int, Domain.INTEGER)
        xc = m.add_vars("xc", n_cont, 0, 4)
        for r in range(n_rows):
            m.add_constraint(xi.sum(A[r, :n_int]) + xc.sum(A[r, n_int:]), "<=", rhs[r])
        m.set_objective(xi.sum(c[:n_int]) + xc.sum(c[n_int:]), "max")
        return m

    # oracle: enumerate the integer part, LP over the continuous part
    from scipy.optimize import linprog

    best = -math.inf
    for xi in itertools.product(range(ub_int + 1), repeat=n_int):
        xi = np.array(xi, float)
        res = linprog(-c[n_int:], A_ub=A[:, n_int:], b_ub=rhs - A[:, :n_int] @ xi, bounds=[(0, 4)] * n_cont)
        if res.status == 0:
            best = max(best, c[:n_int] @ xi - res.fun)
    for backend in BACKENDS:
        m = build()
        res = solve(m, SolveOptions(backend=backend, gap=1e-9))
        if best == -math.inf:
            assert res.status is Status.INFEASIBLE
        else:
            assert res.objective == pytest.approx(best, abs=1e-6)
            assert verify_solution(m, res) == []


def test_bnb_node_limit_reports_limit():
    rng = np.random.default_rng(1)
    m = Model()
    b = m.add_vars("b", 25, 0, 1, Domain.BINARY)
    w = rng.uniform(1, 10, 25)
    m.add_constraint(b.sum(w), "<=", w.sum() / 2.3)
    m.set_objective(b.sum(w + rng.uniform(0, 1, 25)), "max")
    res = solve(m, SolveOptions(backend="bnb", node_limit=3, gap=0))
    assert res.status is Status.LIMIT


def test_verify_reports_exact_constraint():
    m = Model()
    x, y = m.add_var("x"), m.add_var("y")
    m.add_constraint(x + y, "<=", 4, name="cap")
    m.add_constraint(x, "<=", 3, name="xcap")
    m.set_objective(x + 2 * y, "max")
    res = solve(m)
    assert verify_solution(m, res) == []
    x_bad = res.x.copy()
    x_bad[y.index] += 0.5
    report = verify_solution(m, x_bad)
    assert [v.name for v in report] == ["cap"]
    assert report[0].amount == pytest.approx(0.5)


def test_verify_flags_fractional_integer_and_missing():
    m = Model()
    k = m.add_var("k", 0, 5, Domain.INTEGER)
    x = m.add_var("x", 0, 1)
    m.set_objective(k, "max")
    report = verify_solution(m, {k: 2.5, x: 0.0})
    assert [(v.kind, v.name) for v in report] == [("integrality", "k")]
    with pytest.raises(ValidationError):
        verify_solution(m, {k: 2.0})


def test_relaxed_solve_drops_integrality_only_for_that_call():
    m = Model()
    k = m.add_var("k", 0, 10, Domain.INTEGER)
    m.add_constraint(2 * k, "<=", 7)
    m.set_objective(k, "max")
    assert solve(m, relax=[k.index]).objective == pytest.approx(3.5)
    assert solve(m).objective == pytest.approx(3)


def test_lp_text_one_named_row_per_line():
    m = Model("demo")
    x = m.add_var("x", 0, 2)
    k = m.add_var("k", 0, 3, Domain.INTEGER)
    m.add_constraint(x + k, "<=", 4, name="cap")
    m.add_constraint(x - k, "==", 0, name="link")
    m.set_objective(x + k, "max")
    text = m.to_lp_text()
    assert " cap: +1 x +1 k <= 4" in text
    assert " link: +1 x -1 k = 0" in text
    assert "General\n k" in text


# -- big-M products ------------------------------------------------------------


@pytest.mark.parametrize("W", [1e-3, 1.0, 10.0, 7.5e5])
@pytest.mark.parametrize("sense", ["min", "max"])
def test_big_m_product_exhaustive(W, sense):
    for b_val in (0, 1):
        for w_val in (0.0, W / 2, W):
            m = Model()
            b = m.add_var("b", b_val, b_val, Domain.BINARY)
            w = m.add_var("w", 0.0, W)
            z = big_m_product(m, b, w)
            m.add_constraint(w, "==", w_val)
            m.set_objective(z, sense)
            res = solve(m, SolveOptions(gap=0))
            assert abs(res.value(z) - b_val * w_val) <= 1e-9 * W


def test_big_m_product_free_binary():
    """With b free the product still tracks b * w: maximizing z - 0.1 b picks b = 1 iff w > 0."""
    for w_val in (0.0, 2.0, 4.2, 10.0):
        m = Model()
        b = m.add_var("b", 0, 1, Domain.BINARY)
        w = m.add_var("w", 0.0, 10.0)
        m.add_constraint(w, "==", w_val)
        z = big_m_product(m, b, w)
        m.set_objective(z - 0.1 * b, "max")
        res = solve(m, SolveOptions(gap=0))
        assert res.value(z) == pytest.approx(res.value(b) * w_val, abs=1e-9 * 10)
        assert res.value(z) == pytest.approx(w_val if w_val > 0.1 else 0.0, abs=1e-9)


def test_big_m_product_errors():
    m = Model()
    b = m.add_var("b", 0, 1, Domain.BINARY)
    with pytest.raises(ValidationError):
        big_m_product(m, b, m.add_var("w"))
    with pytest.raises(ValidationError):
        big_m_product(m, m.add_var("c", 0, 1), m.add_var("w2", 0, 1))
    with pytest.raises(ValidationError):
        big_m_product(m, b, m.add_var("w3", -1, 1))


def test_quicksum_and_value():
    m = Model()
    xs = [m.add_var(f"x{i}", 0, i) for i in range(4)]
    e = quicksum(xs) + 1.5
    m.set_objective(e, "max")
    res = solve(m)
    assert res.objective == pytest.approx(0 + 1 + 2 + 3 + 1.5)
    assert res.value(e) == pytest.approx(res.objective)


@pytest.mark.parametrize("presolve", [True, False])
def test_presolve_regression_case(presolve):
    """A 5-variable case some older HiGHS presolves cut to 26 instead of 27.5."""
    A = np.array([[3, -2, 1, 0, 1], [4, -2, 0, -2, 4], [0, 3, -2, -2, 2]], float)
    rhs = [7.0, 4.0, 9.0]
    c = np.array([5, 0, 0, 2, 3], float)
    m = Model()
    xi = m.add_vars("xi", 3, 0, 3, Domain.INTEGER)
    xc = m.add_vars("xc", 2, 0, 4)
    for r in range(3):
        m.add_constraint(xi.sum(A[r, :3]) + xc.sum(A[r, 3:]), "<=", rhs[r])
    m.set_objective(xi.sum(c[:3]) + xc.sum(c[3:]), "max")
    res = solve(m, SolveOptions(gap=1e-9, presolve=presolve))
    assert res.objective == pytest.approx(27.5)
