"""Stage I: deterministic sizing of wind, solar, electrolyzers and hydrogen tank.

The model maximizes total system revenue over the horizon. Inner transfer
prices cancel out of the total on a closed storage cycle, so the objective
only carries market trades and investment charges and the model is a MILP.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import economics
from .ammonia import AmmoniaParams, derive_kappa_as
from .config import TechnoEconomicConfig
from .milp import Domain, Model, SolveOptions, SolveResult, Status, VarArray, solve, verify_solution
from .profiles import Profile
from .schedule import Capacities, Schedule

log = logging.getLogger(__name__)

SCENARIOS = ("BS1", "BS2", "BS3", "BS4", "Proposed")

# constraint families that can be dropped when diagnosing infeasibility
FAMILIES = ("ammonia_output", "ammonia_min_load", "electrolyzer_min_load", "net_on_grid", "storage_cycle", "ramp")


class SizingError(RuntimeError):
    pass


class InfeasibleError(SizingError):
    def __init__(self, message, family=None):
        super().__init__(message)
        self.family = family


class SolverLimitError(SizingError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Capacity restricted to ``lo + step * k`` for integer ``0 <= k < count``."""

    lo: float
    step: float
    count: int

    def values(self):
        return self.lo + self.step * np.arange(self.count)


@dataclass(frozen=True)
class Overrides:
    c_w: float | None = None
    c_s: float | None = None
    c_ae: float | None = None
    c_hs: float | None = None
    no_tank: bool = False
    grid: dict = field(default_factory=dict)  # "c_w" | "c_s" | "n_ae" | "c_hs" -> GridSpec

    @classmethod
    def for_scenario(cls, scenario: str) -> "Overrides":
        table = {
            "BS1": cls(c_s=0.0),
            "BS2": cls(c_w=0.0),
            "BS3": cls(no_tank=True, c_hs=0.0),
            "BS4": cls(c_w=200.0, c_s=260.0, c_ae=125.0),
            "Proposed": cls(),
        }
        try:
            return table[scenario]
        except KeyError:
            raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}") from None

    @classmethod
    def from_dict(cls, data: dict | None) -> "Overrides":
        data = dict(data or {})
        grid = {k: GridSpec(**v) for k, v in (data.pop("grid", None) or {}).items()}
        return cls(grid=grid, **data)


@dataclass
class SizingModel:
    model: Model
    cfg: TechnoEconomicConfig
    wind: Profile
    solar: Profile
    overrides: Overrides
    v: dict  # name -> Var | VarArray
    m1: float

    @property
    def has_tank(self) -> bool:
        return not self.overrides.no_tank


def _pinned_or_box(model, name, pinned, upper, grid: GridSpec | None):
    """Capacity variable: fixed, on a grid, or free in ``[0, upper]``."""
    if pinned is not None:
        if pinned < 0:
            raise ValueError(f"{name} must be non-negative")
        return model.add_var(name, pinned, pinned), pinned
    if grid is not None:
        var = model.add_var(name, grid.lo, grid.lo + grid.step * (grid.count - 1))
        k = model.add_var(f"{name}_k", 0, grid.count - 1, Domain.INTEGER)
        model.add_constraint(var - grid.step * k, "==", grid.lo, name=f"{name}_grid")
        return var, grid.lo + grid.step * (grid.count - 1)
    return model.add_var(name, 0.0, upper), upper


def build_sizing_model(
    cfg: TechnoEconomicConfig,
    wind: Profile,
    solar: Profile,
    overrides: Overrides | None = None,
    fixed_caps: Capacities | None = None,
    drop: frozenset = frozenset(),
    name: str = "sizing",
) -> SizingModel:
    """Assemble the sizing MILP.

    ``fixed_caps`` pins wind, solar and electrolyzer capacity (the robust
    stage); ``drop`` removes named constraint families for diagnosis.
    """
    overrides = overrides or Overrides()
    n, dt = cfg.n_hours, cfg.dt
    if len(wind) != n or len(solar) != n:
        raise ValueError(f"profiles have {len(wind)}/{len(solar)} steps, horizon needs {n}")
    unknown = set(drop) - set(FAMILIES)
    if unknown:
        raise ValueError(f"unknown constraint families {sorted(unknown)}")
    amm = AmmoniaParams.from_config(cfg)
    kappa_as = derive_kappa_as(amm)
    q_r = cfg.q_h2_rated
    m = Model(name)
    v = {}

    # -- capacities ------------------------------------------------------
    c_w_pin, c_s_pin, c_ae_pin = overrides.c_w, overrides.c_s, overrides.c_ae
    if fixed_caps is not None:
        c_w_pin, c_s_pin, c_ae_pin = fixed_caps.c_w, fixed_caps.c_s, fixed_caps.c_ae
    v["c_w"], cw_ub = _pinned_or_box(m, "C_W", c_w_pin, cfg.cw_max, overrides.grid.get("c_w"))
    v["c_s"], cs_ub = _pinned_or_box(m, "C_S", c_s_pin, cfg.cs_max, overrides.grid.get("c_s"))
    if c_ae_pin is not None:
        n_ae = c_ae_pin / cfg.ae_unit_size
        if abs(n_ae - round(n_ae)) > 1e-9:
            raise ValueError(f"electrolyzer capacity {c_ae_pin} MW is not a multiple of {cfg.ae_unit_size} MW")
        v["n_ae"] = m.add_var("N_AE", round(n_ae), round(n_ae), Domain.INTEGER)
        nae_ub = round(n_ae)
    elif "n_ae" in overrides.grid:
        g = overrides.grid["n_ae"]
        v["n_ae"] = m.add_var("N_AE", g.lo, g.lo + g.step * (g.count - 1), Domain.INTEGER)
        k = m.add_var("N_AE_k", 0, g.count - 1, Domain.INTEGER)
        m.add_constraint(v["n_ae"] - g.step * k, "==", g.lo, name="N_AE_grid")
        nae_ub = g.lo + g.step * (g.count - 1)
    else:
        v["n_ae"] = m.add_var("N_AE", 0, cfg.n_ae_max, Domain.INTEGER)
        nae_ub = cfg.n_ae_max
    c_ae_unit = cfg.ae_unit_size
    if overrides.no_tank:
        v["c_hs"] = m.add_var("C_HS", 0.0, 0.0)
    else:
        v["c_hs"], _ = _pinned_or_box(m, "C_HS", overrides.c_hs, cfg.chs_max, overrides.grid.get("c_hs"))

    m1 = cw_ub + cs_ub + cfg.eta_ae_max * c_ae_unit * nae_ub + cfg.eta_as_max * kappa_as * q_r

    # -- hourly operation ---------------------------------------------------
    for key, label in (("p_w", "P_W"), ("p_s", "P_S"), ("p_sell", "P_sell"), ("p_purch", "P_purch"),
                       ("p_curt", "P_curt"), ("p_ae", "P_AE"), ("p_as", "P_AS"), ("q_in", "q_in"), ("q_out", "q_out")):
        v[key] = m.add_vars(label, n)
    v["b_grid"] = m.add_vars("b_grid", n, 0, 1, Domain.BINARY)
    if not overrides.no_tank:
        v["n_sto"] = m.add_vars("n_sto", n + 1)
    windows = cfg.n_windows
    steps = cfg.steps_per_window
    lo_q = 0.0 if "ammonia_min_load" in drop else cfg.eta_as_min * q_r
    v["qss"] = m.add_vars("q_QSS", windows, lo_q, cfg.eta_as_max * q_r)

    w, s = wind.values, solar.values
    m.add_rows("wind_output", [(v["p_w"], 1.0), (v["c_w"], -w)], "==", 0.0)
    m.add_rows("solar_output", [(v["p_s"], 1.0), (v["c_s"], -s)], "==", 0.0)
    m.add_rows("ae_conversion", [(v["p_ae"], 1.0), (v["q_in"], -cfg.kappa_h2)], "==", 0.0)
    if "electrolyzer_min_load" not in drop:
        m.add_rows("ae_min_load", [(v["p_ae"], 1.0), (v["n_ae"], -cfg.eta_ae_min * c_ae_unit)], ">=", 0.0)
    m.add_rows("ae_max_load", [(v["p_ae"], 1.0), (v["n_ae"], -cfg.eta_ae_max * c_ae_unit)], "<=", 0.0)

    if overrides.no_tank:
        m.add_rows("no_tank_passthrough", [(v["q_in"], 1.0), (v["q_out"], -1.0)], "==", 0.0)
    else:
        nst = v["n_sto"]
        m.add_rows(
            "storage_balance",
            [(nst[1:], 1.0), (nst[:-1], -1.0), (v["q_in"], -dt), (v["q_out"], dt)], "==", 0.0,
        )
        m.add_rows("storage_min", [(nst[:-1], 1.0), (v["c_hs"], -cfg.eta_hs_min)], ">=", 0.0)
        m.add_rows("storage_max", [(nst[:-1], 1.0), (v["c_hs"], -cfg.eta_hs_max)], "<=", 0.0)
        m.add_constraint(nst[0] - cfg.hs_initial * v["c_hs"], "==", 0.0, name="storage_start")
        if "storage_cycle" not in drop:
            m.add_constraint(nst[n] - cfg.hs_initial * v["c_hs"], "==", 0.0, name="storage_end")

    m.add_rows("sell_when_on_grid", [(v["p_sell"], 1.0), (v["b_grid"], -m1)], "<=", 0.0)
    m.add_rows("purchase_when_off_grid", [(v["p_purch"], 1.0), (v["b_grid"], m1)], "<=", m1)
    if "net_on_grid" not in drop:
        net = (v["p_sell"].sum(dt) - v["p_purch"].sum(dt)
               - v["p_w"].sum(cfg.r_net * dt) - v["p_s"].sum(cfg.r_net * dt))
        m.add_constraint(net, "<=", 0.0, name="net_on_grid")
    m.add_rows(
        "power_balance",
        [(v["p_w"], 1.0), (v["p_s"], 1.0), (v["p_purch"], 1.0), (v["p_sell"], -1.0),
         (v["p_curt"], -1.0), (v["p_ae"], -1.0), (v["p_as"], -1.0)],
        "==", 0.0,
    )
    m.add_rows("curtail_le_generation", [(v["p_curt"], 1.0), (v["p_w"], -1.0), (v["p_s"], -1.0)], "<=", 0.0)
    m.add_rows("as_power", [(v["p_as"], 1.0), (v["q_out"], -kappa_as)], "==", 0.0)
    if "ammonia_output" not in drop:
        m.add_constraint(v["q_out"].sum(cfg.c_h2ma * dt), "<=", cfg.m_nh3_horizon, name="ammonia_output")

    window_of = np.repeat(np.arange(windows), steps)
    m.add_rows("qss_hold", [(v["q_out"], 1.0), (v["qss"][window_of], -1.0)], "==", 0.0)
    if windows > 1 and "ramp" not in drop:
        qss = v["qss"]
        m.add_rows("ramp_up", [(qss[1:], 1.0), (qss[:-1], -1.0)], "<=", cfg.ramp_up * q_r * dt)
        m.add_rows("ramp_down", [(qss[1:], 1.0), (qss[:-1], -1.0)], ">=", -cfg.ramp_down * q_r * dt)

    # -- objective -----------------------------------------------------------
    k = economics.investment_coefficients(cfg)
    obj = (
        v["p_sell"].sum(cfg.price_mwh("p_fit") * dt)
        - v["p_purch"].sum(cfg.price_mwh("p_purch") * dt)
        + v["q_out"].sum(cfg.p_nh3 * cfg.c_h2ma * dt)
        - k["WT"] * v["c_w"] - k["PV"] * v["c_s"]
        - (k["AE"] * c_ae_unit) * v["n_ae"] - k["HS"] * v["c_hs"]
        - k["AS"]
    )
    m.set_objective(obj, "max")
    m.annotations.update(kappa_as=kappa_as, m1=m1)
    return SizingModel(m, cfg, wind, solar, overrides, v, m1)


@dataclass
class SizingResult:
    capacities: Capacities
    schedule: Schedule
    dtr: float  # RMB over the horizon
    invest: dict  # investor -> horizon investment charge
    status: Status
    gap: float
    wall_time: float
    violations: list
    cfg: TechnoEconomicConfig = field(repr=False)
    binding_box: list = field(default_factory=list)

    @property
    def dtr_annual_1e4(self) -> float:
        return self.dtr / self.cfg.year_fraction / 1e4

    @property
    def m_nh3(self) -> float:
        return self.schedule.m_nh3(self.cfg.c_h2ma)

    @property
    def r_as(self) -> float:
        return self.m_nh3 / self.cfg.m_nh3_horizon


def _diagnose(sm: SizingModel, options: SolveOptions) -> str | None:
    for family in FAMILIES:
        trial = build_sizing_model(sm.cfg, sm.wind, sm.solar, sm.overrides, drop=frozenset({family}), name="diagnose")
        res = solve(trial.model, dataclasses.replace(options, gap=1e-2))
        if res.ok:
            return family
    return None


def extract_schedule(sm: SizingModel, x) -> tuple[Capacities, Schedule]:
    v = sm.v
    get = lambda item: x[item.idx].copy() if isinstance(item, VarArray) else float(x[item.index])
    n = sm.cfg.n_hours
    caps = Capacities(
        c_w=max(0.0, get(v["c_w"])), c_s=max(0.0, get(v["c_s"])), n_ae=int(round(get(v["n_ae"]))),
        c_ae_single=sm.cfg.ae_unit_size, c_hs=max(0.0, get(v["c_hs"])),
    )
    n_sto = get(v["n_sto"]) if sm.has_tank else np.zeros(n + 1)
    sched = Schedule(
        p_w=get(v["p_w"]), p_s=get(v["p_s"]), p_sell=get(v["p_sell"]), p_purch=get(v["p_purch"]),
        p_curt=get(v["p_curt"]), p_ae=get(v["p_ae"]), p_as=get(v["p_as"]),
        b_grid=np.round(get(v["b_grid"])), q_in=get(v["q_in"]), q_out=get(v["q_out"]), n_sto=n_sto,
        setpoints=get(v["qss"]), dt=sm.cfg.dt, has_tank=sm.has_tank,
    )
    return caps, sched


def solve_with_exclusivity(model: Model, v: dict, options: SolveOptions):
    """Solve with grid-exclusivity binaries relaxed, then repair them.

    The relaxation bounds the MILP from above. If setting ``b_grid = 1``
    exactly where power is sold yields a point feasible for the full model,
    that point has the relaxed objective and is therefore optimal for the
    MILP too. Otherwise the full MILP is solved.
    """
    b = v["b_grid"]
    res = solve(model, options, relax=b.idx)
    if res.x is None:
        return res if res.status is not Status.LIMIT else solve(model, options)
    x = res.x.copy()
    sell = x[v["p_sell"].idx]
    x[b.idx] = (sell > 1e-9).astype(float)
    if not verify_solution(model, x):
        return SolveResult(res.status, res.objective, x, res.gap, res.wall_time, model, res.backend)
    log.info("%s: relaxed exclusivity did not repair; solving full MILP", model.name)
    return solve(model, options)


def solve_sizing(sm: SizingModel, options: SolveOptions | None = None, diagnose: bool = True) -> SizingResult:
    options = options or SolveOptions()
    res = solve_with_exclusivity(sm.model, sm.v, options)
    if res.status is Status.INFEASIBLE:
        family = _diagnose(sm, options) if diagnose else None
        hint = f"; dropping '{family}' restores feasibility" if family else ""
        raise InfeasibleError(f"{sm.model.name}: model is infeasible{hint}", family)
    if res.status is Status.UNBOUNDED:
        raise SizingError(f"{sm.model.name}: model is unbounded")
    if res.x is None:
        raise SolverLimitError(f"{sm.model.name}: solver limit reached without an incumbent")
    violations = verify_solution(sm.model, res.x)
    if violations:
        log.warning("%s: %d constraint violations, first %s", sm.model.name, len(violations), violations[0])
    caps, sched = extract_schedule(sm, res.x)
    cfg = sm.cfg
    binding = []
    for label, val, ub, pinned in (
        ("C_W", caps.c_w, cfg.cw_max, sm.overrides.c_w), ("C_S", caps.c_s, cfg.cs_max, sm.overrides.c_s),
        ("N_AE", caps.n_ae, cfg.n_ae_max, sm.overrides.c_ae), ("C_HS", caps.c_hs, cfg.chs_max, sm.overrides.c_hs),
    ):
        if pinned is None and not sm.overrides.grid and val >= ub * (1 - 1e-9):
            log.warning("%s sits on its search bound %g; widen the box", label, ub)
            binding.append(label)
    return SizingResult(
        capacities=caps, schedule=sched, dtr=res.objective, invest=economics.investments(caps, cfg),
        status=res.status, gap=res.gap, wall_time=res.wall_time, violations=violations, cfg=cfg,
        binding_box=binding,
    )


def size(cfg, wind, solar, overrides=None, options=None) -> SizingResult:
    return solve_sizing(build_sizing_model(cfg, wind, solar, overrides), options)


def audit_schedule(sched: Schedule, caps: Capacities, cfg: TechnoEconomicConfig, wind: Profile, solar: Profile,
                   tol: float = 1e-6) -> list:
    """Check a schedule against every operating constraint, straight from the series.

    Independent of the model rows: each family is recomputed here and
    compared with a tolerance of ``tol`` absolute plus ``tol`` relative to
    the magnitudes involved. Returns ``(family, hour, excess)`` tuples.
    """
    out = []
    dt = sched.dt

    def check(family, excess, scale):
        excess = np.atleast_1d(np.asarray(excess, dtype=float))
        scale = np.broadcast_to(np.atleast_1d(np.asarray(scale, dtype=float)), excess.shape)
        bad = np.flatnonzero(excess > tol * (1.0 + np.abs(scale)))
        out.extend((family, int(t), float(excess[t])) for t in bad)

    q_r = cfg.q_h2_rated
    kappa_as = derive_kappa_as(AmmoniaParams.from_config(cfg))
    for name in ("p_w", "p_s", "p_sell", "p_purch", "p_curt", "p_ae", "p_as", "q_in", "q_out"):
        check(f"nonneg:{name}", -getattr(sched, name), 0.0)
    check("wind_output", np.abs(sched.p_w - caps.c_w * wind.values), caps.c_w)
    check("solar_output", np.abs(sched.p_s - caps.c_s * solar.values), caps.c_s)
    balance = sched.p_w + sched.p_s + sched.p_purch - sched.p_sell - sched.p_curt - sched.p_ae - sched.p_as
    check("power_balance", np.abs(balance), sched.p_w + sched.p_s + sched.p_purch)
    check("curtail_le_generation", sched.p_curt - sched.p_w - sched.p_s, sched.p_w + sched.p_s)
    check("ae_conversion", np.abs(sched.p_ae - cfg.kappa_h2 * sched.q_in), sched.p_ae)
    check("ae_min_load", cfg.eta_ae_min * caps.c_ae - sched.p_ae, caps.c_ae)
    check("ae_max_load", sched.p_ae - cfg.eta_ae_max * caps.c_ae, caps.c_ae)
    check("grid_exclusive", np.minimum(sched.p_sell, sched.p_purch), np.maximum(sched.p_sell, sched.p_purch))
    gen = dt * float((sched.p_w + sched.p_s).sum())
    check("net_on_grid", sched.energy("p_sell") - sched.energy("p_purch") - cfg.r_net * gen, gen)
    check("as_power", np.abs(sched.p_as - kappa_as * sched.q_out), sched.p_as)
    check("ammonia_output", sched.m_nh3(cfg.c_h2ma) - cfg.m_nh3_horizon, cfg.m_nh3_horizon)
    sp = sched.setpoints
    check("ammonia_min_load", cfg.eta_as_min * q_r - sp, q_r)
    check("ammonia_max_load", sp - cfg.eta_as_max * q_r, q_r)
    hold = sched.q_out - np.repeat(sp, cfg.steps_per_window)
    check("qss_hold", np.abs(hold), q_r)
    if len(sp) > 1:
        step = np.diff(sp)
        check("ramp_up", step - cfg.ramp_up * q_r * dt, q_r)
        check("ramp_down", -step - cfg.ramp_down * q_r * dt, q_r)
    if sched.has_tank:
        n = sched.n_sto
        check("storage_balance", np.abs(n[1:] - n[:-1] - dt * (sched.q_in - sched.q_out)), n[1:])
        check("storage_min", cfg.eta_hs_min * caps.c_hs - n[:-1], caps.c_hs)
        check("storage_max", n[:-1] - cfg.eta_hs_max * caps.c_hs, caps.c_hs)
        check("storage_start", abs(n[0] - cfg.hs_initial * caps.c_hs), caps.c_hs)
        check("storage_end", abs(n[-1] - cfg.hs_initial * caps.c_hs), caps.c_hs)
    else:
        check("no_tank_passthrough", np.abs(sched.q_in - sched.q_out), sched.q_in)
    return out


# -- reporting -------------------------------------------------------------


def exchange_rates(sched: Schedule) -> dict:
    """Grid exchange and curtailment as shares of available renewable energy."""
    gen = sched.energy("p_w") + sched.energy("p_s")
    if gen <= 0:
        return {"on_grid": math.nan, "off_grid": math.nan, "net_on_grid": math.nan, "curtailment": math.nan}
    sell, purch, curt = sched.energy("p_sell"), sched.energy("p_purch"), sched.energy("p_curt")
    return {"on_grid": sell / gen, "off_grid": purch / gen, "net_on_grid": (sell - purch) / gen, "curtailment": curt / gen}


def electrolyzer_flh(sched: Schedule, caps: Capacities) -> float:
    if caps.c_ae <= 0:
        return 0.0
    return sched.energy("p_ae") / caps.c_ae


TABLE_V_COLUMNS = (
    "scenario", "C_W", "C_S", "C_AE", "C_HS", "p_Inner", "p_H2_Inner", "rate_on_grid", "rate_off_grid",
    "rate_net_on_grid", "rate_curtailment", "FLH_AE", "DTR_1e4_RMB_per_yr", "ER", "wall_time_s",
)


def run_benchmark(scenario: str, cfg: TechnoEconomicConfig, wind: Profile, solar: Profile,
                  options: SolveOptions | None = None, price_grid=None) -> dict:
    """One row of the scenario comparison: sizes, prices, exchange rates, FLH, DTR, ER, time."""
    from .pricing import price  # late import: pricing depends on this module

    t0 = time.perf_counter()
    sized = size(cfg, wind, solar, Overrides.for_scenario(scenario), options)
    row = {"scenario": scenario, "status": sized.status.value}
    row.update(sized.capacities.to_dict())
    try:
        outcome = price(sized, cfg, price_grid, options)
        row["p_Inner"] = outcome.prices.p_inner
        row["p_H2_Inner"] = outcome.prices.p_h2_inner
        ledger = outcome.ledger
        row["pricing_status"] = "optimal"
    except Exception as exc:  # pricing infeasibility still leaves a usable sizing row
        log.warning("%s: pricing failed: %s", scenario, exc)
        row["p_Inner"] = row["p_H2_Inner"] = math.nan
        ledger = None
        row["pricing_status"] = type(exc).__name__
    rates = exchange_rates(sized.schedule)
    row.update({f"rate_{k}": val for k, val in rates.items()})
    row["FLH_AE"] = electrolyzer_flh(sized.schedule, sized.capacities) / cfg.year_fraction
    row["DTR_1e4_RMB_per_yr"] = sized.dtr_annual_1e4
    total_invest = sum(sized.invest.values())
    row["ER"] = sized.dtr / total_invest if total_invest > 0 else math.nan
    for name in economics.INVESTORS:
        row[f"ER_{name}"] = ledger.er(name) if ledger is not None and ledger[name].invest > 0 else math.nan
    row["gap"] = sized.gap
    row["wall_time_s"] = time.perf_counter() - t0
    return row
