"""Stage II: inner electricity and hydrogen prices that balance investor returns.

With the Stage-I schedule frozen, the only remaining bilinear products are
the inner electricity price times the inner energy bought by the
electrolyzers and by the synthesis loop. The price is put on a binary grid
and each ``b_j * energy`` product is linearized exactly with big-M.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass

import numpy as np

from . import economics
from .config import PriceGrid, TechnoEconomicConfig
from .economics import INVESTORS, InvestorLedger
from .milp import Domain, Model, SolveOptions, Status, big_m_product, quicksum, solve, verify_solution
from .schedule import Distribution, PriceSet, Schedule

log = logging.getLogger(__name__)


class PricingError(RuntimeError):
    pass


class PricingInfeasibleError(PricingError):
    def __init__(self, message, best_er=None):
        super().__init__(message)
        self.best_er = best_er


def frozen_flows(schedule: Schedule) -> dict:
    """Hourly inner supply, grid purchase and loads, made exactly consistent.

    Solver output satisfies the power balance only to tolerance; the
    purchase series is recomputed from the other three so the four split
    identities admit an exact solution.
    """
    inner = np.clip(schedule.p_inner, 0.0, None)
    p_ae = np.clip(schedule.p_ae, 0.0, None)
    p_as = np.clip(schedule.p_as, 0.0, None)
    purch = np.clip(p_ae + p_as - inner, 0.0, None)
    inner = p_ae + p_as - purch
    return {"inner": inner, "purch": purch, "p_ae": p_ae, "p_as": p_as}


@dataclass
class PricingModel:
    model: Model
    v: dict
    grid: PriceGrid
    step: float
    schedule: Schedule
    invest: dict
    er_min: dict
    constants: dict


def _profits(v, k, step, grid):
    """Linear profit expressions per investor (RMB over the horizon)."""
    p_in_lo = 1e3 * grid.p_lo
    sum_b = quicksum(v["b"])
    sum_z_ae = quicksum(v["z_ae"])
    sum_z_as = quicksum(v["z_as"])
    rg = k["fit_income"] + p_in_lo * k["e_inner"] + (1e3 * step * k["e_inner"]) * sum_b
    aehs = (k["q_in"] * v["p_h2"] - p_in_lo * v["e_ae_in"] - (1e3 * step) * sum_z_ae
            - k["p_purch"] * v["e_ae_pu"])
    as_ = (k["nh3_income"] - p_in_lo * v["e_as_in"] - (1e3 * step) * sum_z_as
           - k["p_purch"] * v["e_as_pu"] - k["q_out"] * v["p_h2"])
    return {"RG": rg, "AEHS": aehs, "AS": as_}


def build_pricing_model(sizing_result, cfg: TechnoEconomicConfig, price_grid: PriceGrid | None = None,
                        enforce_er_min: bool = True) -> PricingModel:
    grid = price_grid or PriceGrid()
    if grid.p_hi < grid.p_lo:
        raise ValueError("price grid upper bound below lower bound")
    degenerate = grid.p_hi == grid.p_lo
    if not degenerate and grid.n_p < 2:
        raise ValueError("price grid needs at least two binaries")
    n_bin = 1 if degenerate else grid.n_p
    step = 0.0 if degenerate else (grid.p_hi - grid.p_lo) / grid.n_p

    sched = sizing_result.schedule
    invest = dict(sizing_result.invest)
    for name, value in invest.items():
        if value <= 0:
            raise economics.UndefinedERError(f"{name} has no investment; its earnings ratio is undefined")
    flows = frozen_flows(sched)
    n, dt = len(sched), sched.dt
    e_inner = float(dt * flows["inner"].sum())

    m = Model("pricing")
    v = {}
    v["ae_in"] = m.add_vars("P_AE_Inner", n)
    v["ae_pu"] = m.add_vars("P_AE_purch", n)
    v["as_in"] = m.add_vars("P_AS_Inner", n)
    v["as_pu"] = m.add_vars("P_AS_purch", n)
    m.add_rows("split_inner", [(v["ae_in"], 1.0), (v["as_in"], 1.0)], "==", flows["inner"])
    m.add_rows("split_purch", [(v["ae_pu"], 1.0), (v["as_pu"], 1.0)], "==", flows["purch"])
    m.add_rows("split_ae", [(v["ae_in"], 1.0), (v["ae_pu"], 1.0)], "==", flows["p_ae"])
    m.add_rows("split_as", [(v["as_in"], 1.0), (v["as_pu"], 1.0)], "==", flows["p_as"])

    v["e_ae_in"] = m.add_var("E_AE_Inner", 0.0, e_inner)
    v["e_as_in"] = m.add_var("E_AS_Inner", 0.0, e_inner)
    v["e_ae_pu"] = m.add_var("E_AE_purch")
    v["e_as_pu"] = m.add_var("E_AS_purch")
    for key, series in (("e_ae_in", "ae_in"), ("e_as_in", "as_in"), ("e_ae_pu", "ae_pu"), ("e_as_pu", "as_pu")):
        m.add_constraint(v[key] - v[series].sum(dt), "==", 0.0, name=f"aggregate_{key}")

    v["b"] = m.add_vars("b_price", n_bin, 0, 0 if degenerate else 1, Domain.BINARY)
    if n_bin > 1:
        m.add_rows("price_order", [(v["b"][:-1], 1.0), (v["b"][1:], -1.0)], ">=", 0.0)
    v["z_ae"] = [big_m_product(m, v["b"][j], v["e_ae_in"], f"z_ae[{j}]") for j in range(n_bin)]
    v["z_as"] = [big_m_product(m, v["b"][j], v["e_as_in"], f"z_as[{j}]") for j in range(n_bin)]
    v["p_h2"] = m.add_var("p_H2_Inner", 0.0, grid.p_h2_max)

    k = {
        "fit_income": cfg.price_mwh("p_fit") * sched.energy("p_sell"),
        "nh3_income": cfg.p_nh3 * sched.m_nh3(cfg.c_h2ma),
        "e_inner": e_inner,
        "q_in": float(dt * sched.q_in.sum()),
        "q_out": float(dt * sched.q_out.sum()),
        "p_purch": cfg.price_mwh("p_purch"),
    }
    profit = _profits(v, k, step, grid)
    er = {name: (profit[name] - invest[name]) * (1.0 / invest[name]) for name in INVESTORS}
    v["er"] = er
    v["w1"] = m.add_var("w1")
    v["w2"] = m.add_var("w2")
    m.add_constraint(er["RG"] - er["AEHS"] - v["w1"], "<=", 0.0, name="w1_pos")
    m.add_constraint(er["AEHS"] - er["RG"] - v["w1"], "<=", 0.0, name="w1_neg")
    m.add_constraint(er["AEHS"] - er["AS"] - v["w2"], "<=", 0.0, name="w2_pos")
    m.add_constraint(er["AS"] - er["AEHS"] - v["w2"], "<=", 0.0, name="w2_neg")
    if enforce_er_min:
        for name in INVESTORS:
            need = cfg.er_min.get(name, 0.0) * invest[name]
            m.add_constraint(profit[name] - invest[name], ">=", need, name=f"er_min_{name}")
    m.set_objective(v["w1"] + v["w2"], "min")
    return PricingModel(m, v, grid, step, sched, invest, dict(cfg.er_min), k)


@dataclass
class PricingOutcome:
    prices: PriceSet
    distribution: Distribution
    ledger: InvestorLedger
    objective: float
    status: Status
    violations: list

    @property
    def report(self) -> dict:
        out = er_report(self.ledger)
        out.update({
            "p_Inner": self.prices.p_inner, "p_H2_Inner": self.prices.p_h2_inner,
            "E_AE_Inner": self.distribution.e_ae_inner, "E_AS_Inner": self.distribution.e_as_inner,
        })
        return out


def solve_pricing(pm: PricingModel, sizing_result, cfg: TechnoEconomicConfig,
                  options: SolveOptions | None = None) -> PricingOutcome:
    opts = options or SolveOptions()
    # the deviation objective lives on an O(1) scale; use an absolute-tight gap
    opts = dataclasses.replace(opts, gap=min(opts.gap, 1e-9))
    res = solve(pm.model, opts)
    if res.status is Status.INFEASIBLE:
        best = None
        try:
            relaxed = build_pricing_model(sizing_result, cfg, pm.grid, enforce_er_min=False)
            rr = solve(relaxed.model, opts)
            if rr.x is not None:
                best = {name: rr.value(relaxed.v["er"][name]) for name in INVESTORS}
        except Exception:  # the report is best effort; the infeasibility is what matters
            log.exception("could not compute best attainable earnings ratios")
        raise PricingInfeasibleError(
            f"minimum earnings ratios {pm.er_min} unreachable at any grid price; best attainable {best}", best
        )
    if res.x is None:
        raise PricingError(f"pricing solve ended with status {res.status.value} and no solution")
    violations = verify_solution(pm.model, res.x)
    v = pm.v
    n_on = int(round(res.value(v["b"]).sum()))
    p_inner = pm.grid.p_lo + pm.step * n_on
    prices = PriceSet(p_inner, max(0.0, res.value(v["p_h2"])), cfg.p_fit, cfg.p_purch, cfg.p_nh3)
    flows = frozen_flows(pm.schedule)
    ae_in = np.clip(res.value(v["ae_in"]), 0.0, None)
    as_in = flows["inner"] - ae_in
    dist = Distribution(ae_in, flows["p_ae"] - ae_in, as_in, flows["p_as"] - as_in, pm.schedule.dt)
    led = economics.ledger(pm.schedule, sizing_result.capacities, prices, dist, cfg, invest=pm.invest)
    dtr = sizing_result.dtr
    if abs(led.total - dtr) > 1e-6 * max(1.0, abs(dtr)):
        raise PricingError(f"pricing moved total revenue: {led.total:.6f} vs DTR {dtr:.6f}")
    return PricingOutcome(prices, dist, led, res.objective, res.status, violations)


def price(sizing_result, cfg: TechnoEconomicConfig, price_grid: PriceGrid | None = None,
          options: SolveOptions | None = None) -> PricingOutcome:
    pm = build_pricing_model(sizing_result, cfg, price_grid)
    return solve_pricing(pm, sizing_result, cfg, options)


def er_report(ledger: InvestorLedger) -> dict:
    """Earnings ratios, their two pairwise deviations and the deviation sum."""
    er = {}
    for name in INVESTORS:
        er[name] = ledger.er(name)  # raises UndefinedERError on zero investment
    d1 = abs(er["RG"] - er["AEHS"])
    d2 = abs(er["AEHS"] - er["AS"])
    return {
        "ER_RG": er["RG"], "ER_AEHS": er["AEHS"], "ER_AS": er["AS"],
        "dev_RG_AEHS": d1, "dev_AEHS_AS": d2, "deviation_sum": d1 + d2,
    }
