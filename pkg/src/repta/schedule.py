"""Value types shared by the sizing, pricing and accounting code."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Capacities:
    c_w: float = 0.0  # MW
    c_s: float = 0.0  # MW
    n_ae: int = 0
    c_ae_single: float = 5.0  # MW
    c_hs: float = 0.0  # Nm3

    def __post_init__(self):
        for name in ("c_w", "c_s", "n_ae", "c_hs"):
            if getattr(self, name) < 0:
                raise ValueError(f"capacity {name} must be non-negative")
        if int(self.n_ae) != self.n_ae:
            raise ValueError("electrolyzer count must be an integer")
        object.__setattr__(self, "n_ae", int(self.n_ae))

    @property
    def c_ae(self) -> float:
        return self.n_ae * self.c_ae_single

    def as_tuple(self):
        return (self.c_w, self.c_s, self.c_ae, self.c_hs)

    def to_dict(self) -> dict:
        return {"C_W": self.c_w, "C_S": self.c_s, "C_AE": self.c_ae, "N_AE": self.n_ae, "C_HS": self.c_hs}


SCHEDULE_COLUMNS = ("P_W", "P_S", "P_sell", "P_purch", "P_curt", "P_AE", "P_AS", "q_in", "q_out", "n_sto")


@dataclass(frozen=True, eq=False)
class Schedule:
    """Hourly operation; ``n_sto`` has one more entry than the other series."""

    p_w: np.ndarray
    p_s: np.ndarray
    p_sell: np.ndarray
    p_purch: np.ndarray
    p_curt: np.ndarray
    p_ae: np.ndarray
    p_as: np.ndarray
    b_grid: np.ndarray
    q_in: np.ndarray
    q_out: np.ndarray
    n_sto: np.ndarray
    setpoints: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dt: float = 1.0
    has_tank: bool = True

    def __post_init__(self):
        n = len(self.p_w)
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, (list, tuple, np.ndarray)):
                value = np.asarray(value, dtype=float)
                object.__setattr__(self, f.name, value)
        for name in ("p_s", "p_sell", "p_purch", "p_curt", "p_ae", "p_as", "b_grid", "q_in", "q_out"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"schedule series {name} has length {len(getattr(self, name))}, expected {n}")
        if len(self.n_sto) != n + 1:
            raise ValueError("storage series must have N + 1 entries")

    def __len__(self):
        return len(self.p_w)

    @property
    def p_inner(self) -> np.ndarray:
        """Renewable power used on site."""
        return self.p_w + self.p_s - self.p_sell - self.p_curt

    def energy(self, series: str) -> float:
        return float(self.dt * getattr(self, series).sum())

    def m_nh3(self, c_h2ma: float) -> float:
        return float(c_h2ma * self.dt * self.q_out.sum())

    def columns(self) -> dict:
        return {
            "P_W": self.p_w, "P_S": self.p_s, "P_sell": self.p_sell, "P_purch": self.p_purch,
            "P_curt": self.p_curt, "P_AE": self.p_ae, "P_AS": self.p_as, "q_in": self.q_in,
            "q_out": self.q_out, "n_sto": self.n_sto[:-1],
        }

    def to_csv(self, path: str | Path):
        cols = self.columns()
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(("hour",) + SCHEDULE_COLUMNS)
            for t in range(len(self)):
                writer.writerow([t] + [f"{cols[c][t]:.6f}" for c in SCHEDULE_COLUMNS])


@dataclass(frozen=True)
class PriceSet:
    p_inner: float  # RMB/kWh
    p_h2_inner: float  # RMB/Nm3
    p_fit: float = 0.2829
    p_purch: float = 0.4572
    p_nh3: float = 3200.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"price {f.name} must be non-negative")

    @classmethod
    def market(cls, cfg, p_inner: float = 0.0, p_h2_inner: float = 0.0) -> "PriceSet":
        return cls(p_inner, p_h2_inner, cfg.p_fit, cfg.p_purch, cfg.p_nh3)


@dataclass(frozen=True, eq=False)
class Distribution:
    """Split of electrolyzer and synthesis power between on-site renewables and grid."""

    p_ae_inner: np.ndarray
    p_ae_purch: np.ndarray
    p_as_inner: np.ndarray
    p_as_purch: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if f.name != "dt":
                object.__setattr__(self, f.name, np.asarray(getattr(self, f.name), dtype=float))

    @property
    def e_ae_inner(self) -> float:
        return float(self.dt * self.p_ae_inner.sum())

    @property
    def e_as_inner(self) -> float:
        return float(self.dt * self.p_as_inner.sum())

    @classmethod
    def proportional(cls, schedule: Schedule) -> "Distribution":
        """Split each hour's renewable and grid supply pro rata to the two loads."""
        load = schedule.p_ae + schedule.p_as
        share = np.divide(schedule.p_ae, load, out=np.zeros_like(load), where=load > 0)
        inner = np.clip(schedule.p_inner, 0.0, None)
        return cls(
            share * inner, share * schedule.p_purch,
            (1 - share) * inner, (1 - share) * schedule.p_purch, schedule.dt,
        )
