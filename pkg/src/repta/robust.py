"""Robust hydrogen storage sizing against renewable shortfall.

Wind, solar and electrolyzer capacities stay at the deterministic optimum.
For a trial uncertainty horizon ``alpha`` both capacity-factor profiles are
cut to ``(1 - alpha)`` of their forecast and the operation plus the tank
size are re-optimized. The largest ``alpha`` whose best revenue still
reaches ``(1 - beta) * DTR`` is found by bisection.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

from .config import TechnoEconomicConfig
from .milp import SolveOptions
from .profiles import Profile
from .sizing import InfeasibleError, SizingError, SizingResult, build_sizing_model, solve_sizing

log = logging.getLogger(__name__)

ALPHA_TOL = 1e-3
REVENUE_RTOL = 1e-6


class RobustError(SizingError):
    pass


class InconsistencyError(RobustError):
    """The deterministic revenue is not attainable at zero uncertainty."""


class NonPositiveRevenueError(RobustError):
    """A revenue sacrifice is meaningless when the deterministic revenue is not positive."""


def worst_case_profiles(wind: Profile, solar: Profile, alpha: float) -> tuple:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return wind.scaled(1.0 - alpha), solar.scaled(1.0 - alpha)


@dataclass
class IgdtResult:
    beta: float
    alpha_star: float
    c_hs_robust: float  # Nm3
    r_as: float
    rtr: float  # 1e4 RMB/yr
    dtr: float  # 1e4 RMB/yr
    saturated: bool = False  # even alpha = 1 keeps the revenue target
    iterations: int = 0
    inner: SizingResult | None = field(default=None, repr=False)

    def row(self) -> dict:
        return {
            "beta": self.beta, "alpha_star": self.alpha_star, "C_HS_robust": self.c_hs_robust,
            "r_AS": self.r_as, "RTR_1e4_RMB_per_yr": self.rtr, "DTR_1e4_RMB_per_yr": self.dtr,
            "saturated": self.saturated,
        }


def inner_solve(sized: SizingResult, wind: Profile, solar: Profile, alpha: float,
                options: SolveOptions | None = None, overrides=None) -> SizingResult | None:
    """Best operation at ``alpha`` with wind, solar and electrolyzer capacity pinned; None if infeasible."""
    w, s = worst_case_profiles(wind, solar, alpha)
    sm = build_sizing_model(sized.cfg, w, s, overrides, fixed_caps=sized.capacities, name=f"robust[a={alpha:.4f}]")
    try:
        return solve_sizing(sm, options, diagnose=False)
    except InfeasibleError:
        return None


def revenue_target(dtr: float, beta: float) -> float:
    """Lowest acceptable worst-case revenue (``beta = 1`` still asks for a non-negative one)."""
    return (1.0 - beta) * dtr - REVENUE_RTOL * abs(dtr)


def solve_robust(sized: SizingResult, beta: float, cfg: TechnoEconomicConfig | None, wind: Profile, solar: Profile,
                 options: SolveOptions | None = None, tol: float = ALPHA_TOL, overrides=None) -> IgdtResult:
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    if cfg is not None and cfg is not sized.cfg:
        sized = dataclasses.replace(sized, cfg=cfg)
    opts = options or SolveOptions()
    # revenue comparisons are at 1e-6 relative; the solver must be tighter than that
    opts = dataclasses.replace(opts, gap=min(opts.gap, 1e-7))
    if sized.dtr <= 0:
        raise NonPositiveRevenueError(
            f"deterministic revenue {sized.dtr:.6g} RMB is not positive; (1 - beta) * DTR would exceed DTR"
        )
    target = revenue_target(sized.dtr, beta)
    year = sized.cfg.year_fraction

    def feasible(alpha):
        res = inner_solve(sized, wind, solar, alpha, opts, overrides)
        return res is not None and res.dtr >= target, res

    ok, best = feasible(0.0)
    if best is None:
        raise InconsistencyError("operation model is infeasible at alpha = 0 with the deterministic capacities")
    if not ok:
        raise InconsistencyError(
            f"deterministic revenue {sized.dtr:.6g} not reproduced at alpha = 0 (got {best.dtr:.6g})"
        )
    lo, hi, iterations, saturated = 0.0, 1.0, 0, False
    top_ok, top = feasible(1.0)
    if top_ok:
        lo, best, saturated = 1.0, top, True
    else:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            iterations += 1
            ok, res = feasible(mid)
            if ok:
                lo, best = mid, res
            else:
                hi = mid
    if best.violations:
        raise RobustError(f"inner solution at alpha={lo} fails verification: {best.violations[0]}")
    return IgdtResult(
        beta=beta, alpha_star=lo, c_hs_robust=best.capacities.c_hs, r_as=best.r_as,
        rtr=best.dtr / year / 1e4, dtr=sized.dtr / year / 1e4, saturated=saturated,
        iterations=iterations, inner=best,
    )


def recheck(result: IgdtResult, sized: SizingResult, wind: Profile, solar: Profile, overrides=None) -> bool:
    """Re-solve the inner model at ``alpha_star`` and check verification and the revenue bound afresh."""
    fresh = inner_solve(sized, wind, solar, result.alpha_star, SolveOptions(gap=1e-7), overrides)
    if fresh is None or fresh.violations:
        return False
    return fresh.dtr >= revenue_target(sized.dtr, result.beta)
