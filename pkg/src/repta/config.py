"""Techno-economic parameters and run configuration.

Defaults reproduce the Inner Mongolia case: investment, price and
operation tables plus r = 8 %, r_net = 20 % and a 1e5 t/yr ammonia plant.
A YAML file only needs to name the values it changes.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

HOURS_PER_YEAR = 8760.0


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass(frozen=True)
class Facility:
    unit_cost: float  # RMB per MW (WT/PV/AE), per Nm3 (HS) or per block (AS)
    om_fraction: float
    lifetime: int

    @property
    def loaded_cost(self) -> float:
        """Initial cost plus O&M, both annualized later by the CRF."""
        return self.unit_cost * (1.0 + self.om_fraction)


def _default_facilities():
    return {
        "WT": Facility(6000e3, 0.02, 20),
        "PV": Facility(4000e3, 0.02, 20),
        "AE": Facility(3000e3, 0.03, 15),
        "HS": Facility(250.0, 0.02, 15),
        "AS": Facility(0.33e9, 0.03, 15),
    }


@dataclass(frozen=True)
class TechnoEconomicConfig:
    # horizon
    n_hours: int = 8760
    dt: float = 1.0
    # economics
    facilities: dict = field(default_factory=_default_facilities)
    as_block_output: float = 1e5  # t/yr covered by the AS block cost
    interest: float = 0.08
    p_fit: float = 0.2829  # RMB/kWh
    p_purch: float = 0.4572  # RMB/kWh
    p_nh3: float = 3200.0  # RMB/t
    r_net: float = 0.20
    m_nh3_nominal: float = 1e5  # t/yr
    er_min: dict = field(default_factory=lambda: {"RG": 0.0, "AEHS": 0.0, "AS": 0.0})
    # operation
    ae_unit_size: float = 5.0  # MW
    kappa_h2: float = 5e-3  # MWh/Nm3
    kappa_nh3: float = 0.64  # MWh/t
    kappa_n2: float = 0.24  # MWh/t
    c_h2ma: float = 5.060e-4  # t NH3 per Nm3 H2
    eta_ae_min: float = 0.05
    eta_ae_max: float = 1.20
    eta_as_min: float = 0.30
    eta_as_max: float = 1.10
    ramp_up: float = 0.20  # per-unit of rated load per hour
    ramp_down: float = 0.20
    eta_hs_min: float = 0.10
    eta_hs_max: float = 0.90
    hs_initial: float = 0.50
    dt_as: float = 24.0  # h
    t_trans: float = 2.0  # h
    # search box for the sizing model
    cw_max: float = 2000.0
    cs_max: float = 2000.0
    n_ae_max: int = 100
    chs_max: float = 5e6

    def __post_init__(self):
        if self.n_hours <= 0 or self.dt <= 0:
            raise ConfigError("horizon length and step must be positive")
        if not 0 < self.eta_as_min < self.eta_as_max:
            raise ConfigError("need 0 < eta_as_min < eta_as_max")
        if not 0 <= self.eta_ae_min <= self.eta_ae_max:
            raise ConfigError("need 0 <= eta_ae_min <= eta_ae_max")
        if not 0 <= self.eta_hs_min <= self.hs_initial <= self.eta_hs_max:
            raise ConfigError("storage bounds must bracket the initial level")
        if self.interest <= 0:
            raise ConfigError("interest rate must be positive")
        windows = self.n_hours * self.dt / self.dt_as
        if self.dt_as <= 0 or abs(windows - round(windows)) > 1e-9 or abs(self.dt_as / self.dt - round(self.dt_as / self.dt)) > 1e-9:
            raise ConfigError(
                f"ammonia scheduling period {self.dt_as} h must be a multiple of dt and divide the {self.n_hours * self.dt} h horizon"
            )
        if self.t_trans <= 0:
            raise ConfigError("transition time constant must be positive")
        missing = {"WT", "PV", "AE", "HS", "AS"} - set(self.facilities)
        if missing:
            raise ConfigError(f"missing facility parameters: {sorted(missing)}")

    # -- derived quantities -------------------------------------------------
    @property
    def horizon_hours(self) -> float:
        return self.n_hours * self.dt

    @property
    def year_fraction(self) -> float:
        """Share of a year covered by the horizon; scales annual costs and output."""
        return self.horizon_hours / HOURS_PER_YEAR

    @property
    def steps_per_window(self) -> int:
        return int(round(self.dt_as / self.dt))

    @property
    def n_windows(self) -> int:
        return self.n_hours // self.steps_per_window

    @property
    def q_h2_rated(self) -> float:
        """Rated hydrogen intake of the ammonia plant, Nm3/h."""
        return self.m_nh3_nominal / (self.c_h2ma * HOURS_PER_YEAR)

    @property
    def m_nh3_horizon(self) -> float:
        return self.m_nh3_nominal * self.year_fraction

    def price_mwh(self, name: str) -> float:
        """Electricity price in RMB/MWh (config stores RMB/kWh)."""
        return 1e3 * getattr(self, name)

    def replace(self, **changes) -> "TechnoEconomicConfig":
        return dataclasses.replace(self, **changes)

    def with_facility(self, name: str, **changes) -> "TechnoEconomicConfig":
        facilities = dict(self.facilities)
        facilities[name] = dataclasses.replace(facilities[name], **changes)
        return self.replace(facilities=facilities)


# YAML section/key -> config field
_SECTIONS = {
    "horizon": {"hours": "n_hours", "dt": "dt"},
    "prices": {"p_fit": "p_fit", "p_purch": "p_purch", "p_nh3": "p_nh3"},
    "economics": {
        "interest": "interest", "r_net": "r_net", "m_nh3": "m_nh3_nominal",
        "as_block_output": "as_block_output", "er_min": "er_min",
    },
    "operation": {
        "ae_unit_size": "ae_unit_size", "kappa_h2": "kappa_h2", "kappa_nh3": "kappa_nh3",
        "kappa_n2": "kappa_n2", "c_h2ma": "c_h2ma", "eta_ae_min": "eta_ae_min",
        "eta_ae_max": "eta_ae_max", "eta_as_min": "eta_as_min", "eta_as_max": "eta_as_max",
        "ramp_up": "ramp_up", "ramp_down": "ramp_down", "eta_hs_min": "eta_hs_min",
        "eta_hs_max": "eta_hs_max", "hs_initial": "hs_initial", "dt_as": "dt_as",
        "t_trans": "t_trans",
    },
    "bounds": {"cw_max": "cw_max", "cs_max": "cs_max", "n_ae_max": "n_ae_max", "chs_max": "chs_max"},
}

# per-kW costs in the file, per-MW internally
_PER_KW = {"WT", "PV", "AE"}


def system_from_dict(data: dict | None, base: TechnoEconomicConfig | None = None) -> TechnoEconomicConfig:
    base = base or TechnoEconomicConfig()
    data = dict(data or {})
    changes = {}
    for section, keys in _SECTIONS.items():
        block = data.pop(section, None) or {}
        for key, value in block.items():
            if key not in keys:
                raise ConfigError(f"unknown key {section}.{key}")
            changes[keys[key]] = value
    if "er_min" in changes:
        changes["er_min"] = {**base.er_min, **changes["er_min"]}
    investment = data.pop("investment", None) or {}
    if investment:
        facilities = dict(base.facilities)
        for name, spec in investment.items():
            if name not in facilities:
                raise ConfigError(f"unknown facility {name!r}")
            spec = dict(spec)
            if "unit_cost" in spec and name in _PER_KW:
                spec["unit_cost"] = float(spec["unit_cost"]) * 1e3
            if "om" in spec:
                spec["om_fraction"] = spec.pop("om")
            try:
                facilities[name] = dataclasses.replace(facilities[name], **spec)
            except TypeError as exc:
                raise ConfigError(f"bad investment entry for {name}: {exc}") from None
        changes["facilities"] = facilities
    if data:
        raise ConfigError(f"unknown system sections: {sorted(data)}")
    for key in ("n_hours", "n_ae_max"):
        if key in changes:
            changes[key] = int(changes[key])
    return base.replace(**changes)


@dataclass(frozen=True)
class PriceGrid:
    p_lo: float = 0.0
    p_hi: float = 0.5
    n_p: int = 128
    p_h2_max: float = 5.0

    def levels(self):
        import numpy as np

        if self.p_hi == self.p_lo:
            return np.array([self.p_lo])
        return self.p_lo + (self.p_hi - self.p_lo) / self.n_p * np.arange(self.n_p + 1)


@dataclass(frozen=True)
class RunConfig:
    system: TechnoEconomicConfig = field(default_factory=TechnoEconomicConfig)
    profiles: Path | None = None  # CSV; synthetic profiles when None
    wind_flh: float = 3500.0
    solar_flh: float = 1800.0
    out_dir: Path = Path("out")
    scenario: str = "Proposed"
    betas: tuple = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    sweep: tuple | None = None  # None: 4 h, 24 h, 168 h and the whole horizon, where they divide it
    price_grid: PriceGrid = field(default_factory=PriceGrid)
    gap: float = 1e-4
    time_limit: float = 600.0
    backend: str = "highs"
    seed: int = 1
    jobs: int = 1
    plot: bool = False
    flow_unit: str = "Nm3/h"  # unit of observed trajectories for `fit`

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def sweep_periods(self) -> tuple:
        if self.sweep is not None:
            return tuple(self.sweep)
        horizon = self.system.horizon_hours
        out = []
        for dt_as in (4.0, 24.0, 168.0, horizon):
            windows = horizon / dt_as
            if math.isclose(windows, round(windows)) and dt_as not in out:
                out.append(dt_as)
        return tuple(out)


_RUN_KEYS = {
    "profiles", "wind_flh", "solar_flh", "out_dir", "scenario", "betas", "sweep", "gap",
    "time_limit", "backend", "seed", "jobs", "plot", "flow_unit",
}


def load_config(path: str | Path | None) -> RunConfig:
    """Read a YAML run file; ``None`` or an empty file gives all defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    system = system_from_dict(data.pop("system", None))
    grid = data.pop("price_grid", None) or {}
    try:
        price_grid = PriceGrid(**grid)
    except TypeError as exc:
        raise ConfigError(f"bad price_grid: {exc}") from None
    unknown = set(data) - _RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown run keys: {sorted(unknown)}")
    run = {}
    for key, value in data.items():
        if key in ("profiles", "out_dir") and value is not None:
            value = Path(value)
            if key == "profiles" and not value.is_absolute():
                value = path.parent / value
        if key in ("betas", "sweep"):
            value = tuple(float(v) for v in value)
        run[key] = value
    cfg = RunConfig(system=system, price_grid=price_grid, **run)
    check_run(cfg)
    return cfg


def check_run(cfg: RunConfig):
    if cfg.profiles is not None and not Path(cfg.profiles).is_file():
        raise ConfigError(f"profile file not found: {cfg.profiles}")
    for dt_as in cfg.sweep or ():
        windows = cfg.system.horizon_hours / dt_as
        if dt_as <= 0 or not math.isclose(windows, round(windows)):
            raise ConfigError(f"sweep period {dt_as} h does not divide the {cfg.system.horizon_hours} h horizon")
    for beta in cfg.betas:
        if not 0.0 <= beta <= 1.0:
            raise ConfigError(f"beta must lie in [0, 1], got {beta}")
    g = cfg.price_grid
    if g.p_hi < g.p_lo or (g.p_hi > g.p_lo and g.n_p < 2):
        raise ConfigError("price grid needs p_hi >= p_lo and n_p >= 2")
