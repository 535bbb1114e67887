"""Solver backends and solution verification.

Two exact backends satisfy the same contract: ``highs`` (HiGHS through
its own Python bindings) and ``bnb``, a small best-first branch-and-bound
over LP relaxations meant for test-sized models.
"""

from __future__ import annotations

import enum
import heapq
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .model import LinExpr, Model, Sense, ValidationError, Var, VarArray

log = logging.getLogger(__name__)


class ConfigurationError(Exception):
    """Requested backend is not available."""


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    LIMIT = "limit"


@dataclass(frozen=True)
class SolveOptions:
    gap: float = 1e-4
    time_limit: float = 600.0
    backend: str = "highs"
    node_limit: int = 100_000
    presolve: bool = True


@dataclass(frozen=True)
class SolveResult:
    status: Status
    objective: float
    x: np.ndarray | None
    gap: float
    wall_time: float
    model: Model = field(repr=False, compare=False)
    backend: str = "highs"

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL or (self.status is Status.LIMIT and self.x is not None)

    def value(self, item):
        """Value of a ``Var``, ``VarArray`` (as ndarray) or ``LinExpr``."""
        if self.x is None:
            raise ValueError(f"no solution available (status={self.status.value})")
        if isinstance(item, Var):
            return float(self.x[item.index])
        if isinstance(item, VarArray):
            return self.x[item.idx].copy()
        return LinExpr.lift(item).value(self.x)


def solve(model: Model, options: SolveOptions | None = None, relax=None, **kw) -> SolveResult:
    """Freeze ``model`` and solve it with the configured backend.

    ``relax`` lists variable indices whose integrality is dropped for this
    solve only; the caller is responsible for repairing the result.
    """
    options = options or SolveOptions(**kw)
    if model.n_vars == 0:
        raise ValidationError("model has no variables")
    try:
        backend = _BACKENDS[options.backend]
    except KeyError:
        raise ConfigurationError(f"unknown backend {options.backend!r}; have {sorted(_BACKENDS)}") from None
    model.freeze()
    t0 = time.perf_counter()
    relaxed = None if relax is None else np.asarray(relax, dtype=np.int64)
    status, obj, x, gap = backend(model, options, relaxed)
    wall = time.perf_counter() - t0
    log.debug("%s: %s obj=%s gap=%s in %.2fs", model.name, status.value, obj, gap, wall)
    return SolveResult(status, obj, x, gap, wall, model, options.backend)


def _signed_cost(model, relaxed=None):
    c, const, A, lo, hi, lb, ub, integ = model.arrays()
    if relaxed is not None and len(relaxed):
        integ = integ.copy()
        integ[relaxed] = 0
    sign = -1.0 if model.sense is Sense.MAX else 1.0
    return sign, sign * c, const, A, lo, hi, lb, ub, integ


def _highs_run(c, A, lo, hi, lb, ub, integ, options: SolveOptions, presolve: bool):
    import highspy

    A = sp.csc_matrix(A)
    lp = highspy.HighsLp()
    lp.num_col_, lp.num_row_ = len(c), A.shape[0]
    lp.col_cost_ = np.asarray(c, dtype=float)  # objective recomputed from x, no offset needed
    lp.col_lower_, lp.col_upper_ = np.asarray(lb, dtype=float), np.asarray(ub, dtype=float)
    lp.row_lower_, lp.row_upper_ = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = A.indptr
    lp.a_matrix_.index_ = A.indices
    lp.a_matrix_.value_ = A.data
    if integ.any():
        lp.integrality_ = [highspy.HighsVarType.kInteger if k else highspy.HighsVarType.kContinuous for k in integ]
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("time_limit", float(options.time_limit))
    h.setOptionValue("mip_rel_gap", float(options.gap))
    h.setOptionValue("presolve", "on" if presolve else "off")
    h.setOptionValue("threads", 1)
    h.passModel(lp)
    h.run()
    return h


def _highs(model: Model, options: SolveOptions, relaxed=None):
    import highspy

    MS = highspy.HighsModelStatus
    sign, c, const, A, lo, hi, lb, ub, integ = _signed_cost(model, relaxed)
    h = _highs_run(c, A, lo, hi, lb, ub, integ, options, options.presolve)
    status = h.getModelStatus()
    if status == MS.kUnboundedOrInfeasible:
        # presolve cannot tell the two apart; the plain solver can
        h = _highs_run(c, A, lo, hi, lb, ub, integ, options, False)
        status = h.getModelStatus()
    if status == MS.kInfeasible:
        return Status.INFEASIBLE, math.nan, None, math.inf
    if status in (MS.kUnbounded, MS.kUnboundedOrInfeasible):
        return Status.UNBOUNDED, math.nan, None, math.inf
    info = h.getInfo()
    x = None
    if info.primal_solution_status == 2:  # feasible point available
        x = np.asarray(h.getSolution().col_value, dtype=float)
    if x is not None and integ.any():
        # snap integers that HiGHS returns within its integrality tolerance
        mask = integ.astype(bool)
        x[mask] = np.round(x[mask])
    obj = math.nan if x is None else float(sign * (c @ x) + const)
    gap = 0.0 if not integ.any() else float(info.mip_gap)
    if status == MS.kOptimal:
        return Status.OPTIMAL, obj, x, gap
    if status in (MS.kTimeLimit, MS.kIterationLimit, MS.kSolutionLimit, MS.kInterrupt, MS.kHighsInterrupt):
        return Status.LIMIT, obj, x, gap if x is not None else math.inf
    raise RuntimeError(f"HiGHS stopped with model status {h.modelStatusToString(status)}")


def _split_rows(A, lo, hi):
    eq = np.isfinite(lo) & np.isfinite(hi) & (lo == hi)
    up = np.isfinite(hi) & ~eq
    dn = np.isfinite(lo) & ~eq
    A = A.tocsr()
    A_ub = None
    b_ub = None
    if up.any() or dn.any():
        A_ub = sp.vstack([A[up], -A[dn]]).tocsr()
        b_ub = np.concatenate([hi[up], -lo[dn]])
    A_eq = A[eq] if eq.any() else None
    b_eq = lo[eq] if eq.any() else None
    return A_ub, b_ub, A_eq, b_eq


def _branch_and_bound(model: Model, options: SolveOptions, relaxed=None):
    sign, c, const, A, lo, hi, lb, ub, integ = _signed_cost(model, relaxed)
    A_ub, b_ub, A_eq, b_eq = _split_rows(A, lo, hi)
    int_idx = np.flatnonzero(integ)
    deadline = time.perf_counter() + options.time_limit

    def relax(node_lb, node_ub):
        res = linprog(
            c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
            bounds=np.column_stack([node_lb, node_ub]), method="highs",
        )
        return res

    root = relax(lb, ub)
    if root.status == 2:
        return Status.INFEASIBLE, math.nan, None, math.inf
    if root.status == 3:
        return Status.UNBOUNDED, math.nan, None, math.inf
    if root.status != 0:
        return Status.LIMIT, math.nan, None, math.inf

    best_x, best_val = None, math.inf
    counter = 0
    heap = [(root.fun, counter, lb.copy(), ub.copy(), root.x)]
    nodes = 0
    limited = False
    while heap:
        bound, _, nlb, nub, x = heapq.heappop(heap)
        if bound >= best_val - options.gap * max(1.0, abs(best_val)):
            continue
        nodes += 1
        if nodes > options.node_limit or time.perf_counter() > deadline:
            heapq.heappush(heap, (bound, counter, nlb, nub, x))
            limited = True
            break
        frac = np.abs(x[int_idx] - np.round(x[int_idx]))
        if not len(int_idx) or frac.max() <= 1e-9:
            best_x, best_val = x.copy(), bound
            continue
        j = int_idx[int(np.argmax(frac))]
        for new_lb, new_ub in ((nlb[j], math.floor(x[j])), (math.ceil(x[j]), nub[j])):
            if new_lb > new_ub:
                continue
            clb, cub = nlb.copy(), nub.copy()
            clb[j], cub[j] = new_lb, new_ub
            res = relax(clb, cub)
            if res.status == 0 and res.fun < best_val:
                counter += 1
                heapq.heappush(heap, (res.fun, counter, clb, cub, res.x))

    if best_x is None:
        return (Status.LIMIT, math.nan, None, math.inf) if limited else (Status.INFEASIBLE, math.nan, None, math.inf)
    best_x[int_idx] = np.round(best_x[int_idx])
    obj = float(sign * (c @ best_x) + const)
    if limited:
        proven = min(h[0] for h in heap) if heap else best_val
        gap = abs(best_val - proven) / max(1e-10, abs(best_val))
        return Status.LIMIT, obj, best_x, gap
    return Status.OPTIMAL, obj, best_x, 0.0


_BACKENDS = {"highs": _highs, "bnb": _branch_and_bound}


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


# -- verification -------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str  # "row", "bound" or "integrality"
    name: str
    amount: float


def _as_vector(model: Model, assignment) -> np.ndarray:
    if isinstance(assignment, SolveResult):
        assignment = assignment.x
    if isinstance(assignment, dict):
        x = np.full(model.n_vars, np.nan)
        for key, val in assignment.items():
            x[key.index if isinstance(key, Var) else int(key)] = val
    else:
        x = np.asarray(assignment, dtype=float)
        if x.shape != (model.n_vars,):
            raise ValidationError(f"assignment has shape {x.shape}, model has {model.n_vars} variables")
    missing = np.flatnonzero(np.isnan(x))
    if len(missing):
        names = ", ".join(model.var_name(i) for i in missing[:5])
        raise ValidationError(f"assignment is missing {len(missing)} variable(s): {names}")
    return x


def verify_solution(model: Model, assignment, tol_abs: float = 1e-6, tol_rel: float = 1e-6) -> list[Violation]:
    """List every row, bound and integrality violation beyond tolerance.

    A row counts as violated when it misses its bound by more than
    ``tol_abs + tol_rel * scale`` where ``scale`` is the larger of the bound
    magnitude and the row's absolute activity ``sum |a_ij x_j|``.
    """
    x = _as_vector(model, assignment)
    c, const, A, lo, hi, lb, ub, integ = model.arrays()
    out: list[Violation] = []
    if A.shape[0]:
        act = A @ x
        scale = abs(A) @ np.abs(x)
        over = act - hi
        under = lo - act
        worst = np.maximum(np.where(np.isfinite(hi), over, -np.inf), np.where(np.isfinite(lo), under, -np.inf))
        ref = np.maximum(scale, np.maximum(np.where(np.isfinite(hi), np.abs(hi), 0), np.where(np.isfinite(lo), np.abs(lo), 0)))
        for r in np.flatnonzero(worst > tol_abs + tol_rel * ref):
            out.append(Violation("row", model.row_name(int(r)), float(worst[r])))
    bound_gap = np.maximum(lb - x, x - ub)
    bscale = np.maximum(np.abs(x), np.where(np.isfinite(ub), np.abs(ub), 0))
    for j in np.flatnonzero(bound_gap > tol_abs + tol_rel * bscale):
        out.append(Violation("bound", model.var_name(int(j)), float(bound_gap[j])))
    frac = np.abs(x - np.round(x))
    for j in np.flatnonzero((integ > 0) & (frac > tol_abs)):
        out.append(Violation("integrality", model.var_name(int(j)), float(frac[j])))
    return out
