"""Limited flexibility of ammonia synthesis.

The plant follows quasi-steady-state (QSS) setpoints, one per scheduling
period, and relaxes between them as a first-order system. Hydrogen flows
are Nm3/h throughout; use :func:`kg_to_nm3` for plant data logged in kg/h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MOLAR_VOLUME = 22.414  # L/mol at standard conditions
M_N2 = 28.0134  # g/mol
M_NH3 = 17.031  # g/mol
NM3_PER_KG_H2 = 11.126


class AmmoniaError(ValueError):
    pass


class PlanError(AmmoniaError):
    """Setpoints outside the load range or of the wrong count."""


class RampViolationError(AmmoniaError):
    """The physical trajectory breaks the hourly ramp limit."""


class FitUndefinedError(AmmoniaError):
    pass


def kg_to_nm3(flow_kg):
    return np.asarray(flow_kg, dtype=float) * NM3_PER_KG_H2


def n2_tonnes_per_nm3_h2() -> float:
    mol_h2 = 1000.0 / MOLAR_VOLUME
    return mol_h2 / 3.0 * M_N2 * 1e-6


@dataclass(frozen=True)
class AmmoniaParams:
    kappa_n2: float = 0.24  # MWh/t N2
    kappa_nh3: float = 0.64  # MWh/t NH3
    q_h2_rated: float = 1e5 / (5.060e-4 * 8760)  # Nm3/h
    eta_min: float = 0.30
    eta_max: float = 1.10
    r_plus: float = 0.20
    r_minus: float = 0.20
    dt_as: float = 24.0
    t_trans: float = 2.0
    c_h2ma: float = 5.060e-4
    dt: float = 1.0

    def __post_init__(self):
        if not 0 < self.eta_min < self.eta_max:
            raise AmmoniaError("need 0 < eta_min < eta_max")
        ratio = self.dt_as / self.dt
        if self.dt_as <= 0 or abs(ratio - round(ratio)) > 1e-9:
            raise AmmoniaError("scheduling period must be a positive multiple of dt")
        if self.t_trans <= 0:
            raise AmmoniaError("T_trans must be positive")

    @classmethod
    def from_config(cls, cfg) -> "AmmoniaParams":
        return cls(
            kappa_n2=cfg.kappa_n2, kappa_nh3=cfg.kappa_nh3, q_h2_rated=cfg.q_h2_rated,
            eta_min=cfg.eta_as_min, eta_max=cfg.eta_as_max, r_plus=cfg.ramp_up,
            r_minus=cfg.ramp_down, dt_as=cfg.dt_as, t_trans=cfg.t_trans,
            c_h2ma=cfg.c_h2ma, dt=cfg.dt,
        )

    @property
    def steps_per_window(self) -> int:
        return int(round(self.dt_as / self.dt))

    @property
    def kappa_as(self) -> float:
        return derive_kappa_as(self)


def derive_kappa_as(params: AmmoniaParams) -> float:
    """Synthesis-loop energy per Nm3 of hydrogen (PSA nitrogen + Haber-Bosch), MWh/Nm3."""
    return params.kappa_n2 * n2_tonnes_per_nm3_h2() + params.kappa_nh3 * params.c_h2ma


def as_power(q_h2_out, params: AmmoniaParams):
    q = np.asarray(q_h2_out, dtype=float)
    if np.any(q < 0):
        raise AmmoniaError("hydrogen flow must be non-negative")
    p = params.kappa_as * q
    return float(p) if p.ndim == 0 else p


def transition(q_k, q_k1, t_trans: float, tau):
    """First-order relaxation from ``q_k`` toward ``q_k1`` after ``tau`` hours."""
    if not t_trans > 0:
        raise AmmoniaError(f"T_trans must be positive, got {t_trans}")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise AmmoniaError("tau must be non-negative")
    out = q_k1 + (np.asarray(q_k, dtype=float) - q_k1) * np.exp(-tau / t_trans)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class QssPlan:
    setpoints: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "setpoints", np.asarray(self.setpoints, dtype=float))

    def __len__(self):
        return len(self.setpoints)

    def validate(self, params: AmmoniaParams, n_windows: int | None = None):
        if n_windows is not None and len(self) != n_windows:
            raise PlanError(f"plan has {len(self)} setpoints, horizon needs {n_windows}")
        lo = params.eta_min * params.q_h2_rated
        hi = params.eta_max * params.q_h2_rated
        tol = 1e-9 * params.q_h2_rated
        bad = np.flatnonzero((self.setpoints < lo - tol) | (self.setpoints > hi + tol))
        if len(bad):
            k = bad[0]
            raise PlanError(
                f"setpoint {k} = {self.setpoints[k]:.1f} Nm3/h outside [{lo:.1f}, {hi:.1f}]"
                f" ({len(bad)} window(s) out of range)"
            )


def discretize_plan(plan: QssPlan, params: AmmoniaParams, initial: float | None = None, check_ramp: bool = True) -> np.ndarray:
    """Hourly hydrogen intake implied by a setpoint plan.

    Within window ``k`` the flow relaxes from its value at the window start
    toward setpoint ``k``, sampled at the end of each step. The first window
    starts from ``initial`` (default: its own setpoint).
    """
    plan.validate(params)
    steps = params.steps_per_window
    tau = params.dt * np.arange(1, steps + 1)
    out = np.empty(len(plan) * steps)
    state = plan.setpoints[0] if initial is None else float(initial)
    for k, target in enumerate(plan.setpoints):
        seg = transition(state, target, params.t_trans, tau)
        out[k * steps:(k + 1) * steps] = seg
        state = seg[-1]
    if check_ramp:
        prev = np.concatenate([[plan.setpoints[0] if initial is None else initial], out[:-1]])
        step = (out - prev) / params.dt
        up = params.r_plus * params.q_h2_rated
        down = params.r_minus * params.q_h2_rated
        tol = 1e-9 * params.q_h2_rated
        bad = np.flatnonzero((step > up + tol) | (step < -down - tol))
        if len(bad):
            t = bad[0]
            raise RampViolationError(
                f"hour {t}: flow changes by {step[t]:.1f} Nm3/h per h, limit [-{down:.1f}, {up:.1f}]"
            )
    return out


def min_t_trans_for_ramp(gap: float, params: AmmoniaParams) -> float:
    """Smallest time constant keeping the first-hour step of a ``gap`` jump within the ramp limit."""
    limit = min(params.r_plus, params.r_minus) * params.q_h2_rated * params.dt
    gap = abs(gap)
    if gap <= limit:
        return 0.0
    return -params.dt / math.log(1.0 - limit / gap)


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def fit_t_trans(observed, q_k: float, q_k1: float, dt: float = 1.0, t_lo: float = 0.05, t_hi: float = 50.0, tol: float = 1e-4):
    """Least-squares time constant for an observed setpoint change.

    ``observed[i]`` is sampled ``i * dt`` hours after the step. Returns
    ``(t_trans, rmse)`` with the rmse in the unit of ``observed``.
    """
    y = np.asarray(observed, dtype=float)
    if y.size < 3:
        raise AmmoniaError("need at least three observations")
    if q_k == q_k1:
        raise FitUndefinedError("setpoints coincide; the time constant is unidentifiable")
    tau = dt * np.arange(y.size)

    def sse(t):
        r = transition(q_k, q_k1, t, tau) - y
        return float(r @ r)

    a, b = t_lo, t_hi
    c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    fc, fd = sse(c), sse(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = sse(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = sse(d)
    t_hat = 0.5 * (a + b)
    return t_hat, math.sqrt(sse(t_hat) / y.size)
