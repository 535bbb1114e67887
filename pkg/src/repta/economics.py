"""Investor accounting for the RG, AEHS and AS parts of the plant.

All money is RMB over the modelled horizon; annual investment charges are
pro-rated to the horizon so that a one-week model compares like with like.
Reports convert to 1e4 RMB/yr.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .config import TechnoEconomicConfig
from .schedule import Capacities, Distribution, PriceSet, Schedule

INVESTORS = ("RG", "AEHS", "AS")


class EconomicsError(ValueError):
    pass


class InconsistencyError(EconomicsError):
    """Schedule and power split disagree."""


class PreconditionError(EconomicsError):
    pass


class UndefinedERError(EconomicsError):
    pass


def crf(r: float, years: int) -> float:
    """Capital recovery factor ``r (1+r)^Y / ((1+r)^Y - 1)``."""
    if r <= 0:
        raise ValueError(f"interest rate must be positive, got {r}")
    if years < 1 or int(years) != years:
        raise ValueError(f"lifetime must be a positive integer, got {years}")
    g = (1.0 + r) ** years
    return r * g / (g - 1.0)


def _annual(cfg: TechnoEconomicConfig, name: str) -> float:
    fac = cfg.facilities[name]
    return crf(cfg.interest, fac.lifetime) * fac.loaded_cost


def investment_coefficients(cfg: TechnoEconomicConfig) -> dict:
    """Horizon investment charge per unit capacity (RMB per MW or Nm3), plus the AS block."""
    f = cfg.year_fraction
    return {
        "WT": f * _annual(cfg, "WT"),
        "PV": f * _annual(cfg, "PV"),
        "AE": f * _annual(cfg, "AE"),
        "HS": f * _annual(cfg, "HS"),
        "AS": f * _annual(cfg, "AS") * cfg.m_nh3_nominal / cfg.as_block_output,
    }


def investments(caps: Capacities, cfg: TechnoEconomicConfig) -> dict:
    k = investment_coefficients(cfg)
    return {
        "RG": k["WT"] * caps.c_w + k["PV"] * caps.c_s,
        "AEHS": k["AE"] * caps.c_ae + k["HS"] * caps.c_hs,
        "AS": k["AS"],
    }


@dataclass(frozen=True)
class InvestorLine:
    profit: float
    invest: float

    @property
    def net(self) -> float:
        return self.profit - self.invest

    @property
    def er(self) -> float:
        if self.invest <= 0:
            raise UndefinedERError("earnings ratio undefined for zero investment")
        return self.net / self.invest


@dataclass(frozen=True)
class InvestorLedger:
    lines: dict  # investor -> InvestorLine
    year_fraction: float = 1.0
    m_nh3: float = 0.0

    def __getitem__(self, investor) -> InvestorLine:
        return self.lines[investor]

    @property
    def total(self) -> float:
        return sum(line.net for line in self.lines.values())

    @property
    def total_invest(self) -> float:
        return sum(line.invest for line in self.lines.values())

    @property
    def system_er(self) -> float:
        return self.total / self.total_invest

    def er(self, investor) -> float:
        return self.lines[investor].er

    def annual_1e4(self, value: float) -> float:
        return value / self.year_fraction / 1e4

    def er_constraints_met(self, er_min: dict, tol: float = 1e-9) -> dict:
        """Minimum earnings ratios, checked as ``J_i >= ER_min * invest_i``."""
        out = {}
        for name, line in self.lines.items():
            need = er_min.get(name, 0.0) * line.invest
            out[name] = line.net >= need - tol * max(1.0, abs(line.invest))
        return out

    def to_dict(self) -> dict:
        out = {"DTR_1e4_RMB_per_yr": self.annual_1e4(self.total), "m_NH3_t": self.m_nh3}
        for name, line in self.lines.items():
            out[name] = {
                "profit_1e4_RMB_per_yr": self.annual_1e4(line.profit),
                "invest_1e4_RMB_per_yr": self.annual_1e4(line.invest),
                "net_1e4_RMB_per_yr": self.annual_1e4(line.net),
                "ER": line.er if line.invest > 0 else None,
            }
        out["system_ER"] = self.system_er if self.total_invest > 0 else None
        return out


def check_distribution(schedule: Schedule, dist: Distribution, tol: float = 1e-6):
    """Raise unless the hourly split reproduces inner supply, purchases and both loads."""
    checks = {
        "inner supply": (schedule.p_inner, dist.p_ae_inner + dist.p_as_inner),
        "grid purchase": (schedule.p_purch, dist.p_ae_purch + dist.p_as_purch),
        "electrolyzer load": (schedule.p_ae, dist.p_ae_inner + dist.p_ae_purch),
        "synthesis load": (schedule.p_as, dist.p_as_inner + dist.p_as_purch),
    }
    for what, (want, got) in checks.items():
        err = np.abs(want - got)
        bad = err > tol * (1.0 + np.abs(want))
        if bad.any():
            t = int(np.argmax(bad))
            raise InconsistencyError(f"{what} mismatch at hour {t}: {want[t]:.6g} vs {got[t]:.6g}")
    for name in ("p_ae_inner", "p_ae_purch", "p_as_inner", "p_as_purch"):
        if np.any(getattr(dist, name) < -tol):
            raise InconsistencyError(f"negative {name} in power split")


def ledger(
    schedule: Schedule,
    caps: Capacities,
    prices: PriceSet,
    dist: Distribution,
    cfg: TechnoEconomicConfig,
    invest: dict | None = None,
) -> InvestorLedger:
    """Per-investor profit, investment charge and net revenue.

    ``invest`` overrides the charges computed from ``caps`` (the pricing
    stage passes the frozen Stage-I values).
    """
    check_distribution(schedule, dist)
    dt = schedule.dt
    p_fit, p_purch, p_in = 1e3 * prices.p_fit, 1e3 * prices.p_purch, 1e3 * prices.p_inner
    q_in = dt * schedule.q_in.sum()
    q_out = dt * schedule.q_out.sum()
    m_nh3 = cfg.c_h2ma * q_out
    e_ae_purch = dt * dist.p_ae_purch.sum()
    e_as_purch = dt * dist.p_as_purch.sum()
    profit = {
        "RG": p_fit * schedule.energy("p_sell") + p_in * dt * schedule.p_inner.sum(),
        "AEHS": prices.p_h2_inner * q_in - p_in * dist.e_ae_inner - p_purch * e_ae_purch,
        "AS": prices.p_nh3 * m_nh3 - p_in * dist.e_as_inner - p_purch * e_as_purch - prices.p_h2_inner * q_out,
    }
    invest = invest or investments(caps, cfg)
    lines = {name: InvestorLine(float(profit[name]), float(invest[name])) for name in INVESTORS}
    return InvestorLedger(lines, cfg.year_fraction, float(m_nh3))


def stage1_revenue(schedule: Schedule, caps: Capacities, cfg: TechnoEconomicConfig) -> float:
    """Total revenue with inner-price terms dropped (they cancel on a closed storage cycle)."""
    inv = investments(caps, cfg)
    income = (
        cfg.price_mwh("p_fit") * schedule.energy("p_sell")
        - cfg.price_mwh("p_purch") * schedule.energy("p_purch")
        + cfg.p_nh3 * schedule.m_nh3(cfg.c_h2ma)
    )
    return float(income - sum(inv.values()))


def inner_price_terms(schedule: Schedule, dist: Distribution, prices: PriceSet) -> float:
    """Part of total revenue that depends on the inner prices."""
    dt = schedule.dt
    elec = 1e3 * prices.p_inner * dt * (schedule.p_inner - dist.p_ae_inner - dist.p_as_inner).sum()
    h2 = prices.p_h2_inner * dt * (schedule.q_in - schedule.q_out).sum()
    return float(elec + h2)


def proposition1_check(
    schedule: Schedule,
    caps: Capacities,
    dist: Distribution,
    cfg: TechnoEconomicConfig,
    price_samples,
    tol: float = 1e-6,
) -> float:
    """Largest pairwise gap in total revenue across inner-price samples.

    Requires a closed storage cycle; without it the gap is genuinely non-zero.
    """
    drift = schedule.n_sto[-1] - schedule.n_sto[0]
    scale = max(1.0, abs(schedule.n_sto[0]), schedule.dt * float(schedule.q_in.sum()))
    if abs(drift) > tol * scale:
        raise PreconditionError(f"storage does not close its cycle (n(N) - n(0) = {drift:.6g} Nm3)")
    totals = [ledger(schedule, caps, p, dist, cfg).total for p in price_samples]
    if len(totals) < 2:
        return 0.0
    return max(abs(a - b) for a, b in itertools.combinations(totals, 2))
