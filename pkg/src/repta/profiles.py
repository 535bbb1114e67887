"""Hourly wind and solar capacity-factor profiles.

Profiles are per-unit of installed capacity. They are read from CSV
(``hour,wind_cf,solar_cf``), standardized from measured power, or
synthesized for desk studies.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm, weibull_min

log = logging.getLogger(__name__)

KINDS = ("wind", "solar")


class ProfileError(ValueError):
    pass


class SchemaError(ProfileError):
    pass


class HorizonMismatchError(ProfileError):
    pass


@dataclass(frozen=True, eq=False)
class Profile:
    values: np.ndarray
    kind: str
    dt: float = 1.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ProfileError("profile must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ProfileError(f"{self.kind} profile has non-finite values")
        if np.any(values < 0):
            raise ProfileError(f"{self.kind} profile has negative values")
        if self.kind not in KINDS:
            raise ProfileError(f"unknown profile kind {self.kind!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    @property
    def flh(self) -> float:
        """Full-load hours."""
        return float(self.dt * self.values.sum())

    def head(self, n: int) -> "Profile":
        return Profile(self.values[:n], self.kind, self.dt)

    def scaled(self, factor: float) -> "Profile":
        return Profile(self.values * factor, self.kind, self.dt)


@dataclass(frozen=True, eq=False)
class PowerSeries:
    values: np.ndarray
    label: str
    signed: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not self.signed and np.any(values < 0):
            raise ProfileError(f"{self.label}: negative power in an unsigned series")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)


def load_profiles(source: str | Path, n_hours: int = 8760, dt: float = 1.0) -> tuple[Profile, Profile]:
    path = Path(source)
    if not path.is_file():
        raise FileNotFoundError(f"profile file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = set(reader.fieldnames or ())
        missing = {"hour", "wind_cf", "solar_cf"} - fields
        if missing:
            raise SchemaError(f"{path}: missing column(s) {sorted(missing)}")
        wind, solar = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                w, s = float(row["wind_cf"]), float(row["solar_cf"])
            except (TypeError, ValueError):
                raise SchemaError(f"{path}:{lineno}: non-numeric capacity factor") from None
            if w < 0 or s < 0:
                raise ProfileError(f"{path}:{lineno}: negative capacity factor")
            wind.append(w)
            solar.append(s)
    if len(wind) != n_hours:
        raise HorizonMismatchError(f"{path}: {len(wind)} rows, horizon needs {n_hours}")
    out = Profile(np.array(wind), "wind", dt), Profile(np.array(solar), "solar", dt)
    for p in out:
        log.info("%s profile from %s: FLH %.1f h", p.kind, path.name, p.flh)
        if p.values.max() > 1.0:
            log.warning("%s profile exceeds 1.0 p.u. (max %.3f)", p.kind, p.values.max())
    return out


def save_profiles(path: str | Path, wind: Profile, solar: Profile):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour", "wind_cf", "solar_cf"])
        for t, (w, s) in enumerate(zip(wind.values, solar.values)):
            writer.writerow([t, repr(float(w)), repr(float(s))])


def standardize(raw_power: PowerSeries, installed_capacity: float, kind: str = "wind", dt: float = 1.0) -> Profile:
    if not installed_capacity > 0:
        raise ValueError(f"installed capacity must be positive, got {installed_capacity}")
    values = np.asarray(raw_power.values, dtype=float) / installed_capacity
    if values.size and values.max() > 1.0:
        log.warning("%s: standardized output reaches %.3f p.u.", raw_power.label, values.max())
    return Profile(values, kind, dt)


def scale(profile: Profile, capacity: float) -> PowerSeries:
    if capacity < 0:
        raise ValueError(f"capacity must be non-negative, got {capacity}")
    return PowerSeries(capacity * profile.values, f"{profile.kind} output")


# -- synthesis ------------------------------------------------------------


def _fit_flh(shape: np.ndarray, target: float, dt: float) -> np.ndarray:
    """Map ``shape`` monotonically onto [0, 1] so that ``dt * sum == target``.

    First a clipped gain ``min(1, g * shape)``; if even saturating every
    non-zero hour falls short, the floor is lifted: ``lam + (1 - lam) * clip``.
    """
    n = len(shape)
    if target >= n * dt:
        return np.ones(n)
    top = shape.max()
    if top <= 0:
        raise ValueError("profile shape is identically zero")

    def flh(values):
        return dt * values.sum()

    saturated = (shape > 0).astype(float)
    if flh(saturated) >= target:
        lo, hi = 0.0, 1.0 / shape[shape > 0].min()
        for _ in range(200):
            g = 0.5 * (lo + hi)
            if flh(np.minimum(1.0, g * shape)) < target:
                lo = g
            else:
                hi = g
        return np.minimum(1.0, hi * shape)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        lam = 0.5 * (lo + hi)
        if flh(lam + (1 - lam) * saturated) < target:
            lo = lam
        else:
            hi = lam
    return hi + (1 - hi) * saturated


def _solar_shape(n: int, dt: float, rng: np.random.Generator) -> np.ndarray:
    hours = (np.arange(n) * dt) + 0.5 * dt
    hod = hours % 24.0
    doy = hours / 24.0
    envelope = np.clip(np.sin(np.pi * (hod - 6.0) / 12.0), 0.0, None)
    seasonal = 1.0 + 0.25 * np.cos(2 * np.pi * (doy - 172.0) / 365.0)
    # day-level cloudiness persists over the day, plus hourly jitter
    days = int(np.ceil(n * dt / 24.0)) + 1
    cloud = np.clip(rng.beta(4.0, 1.6, size=days), 0.05, 1.0)
    jitter = np.exp(rng.normal(0.0, 0.12, size=n))
    return envelope * seasonal * cloud[(hours // 24).astype(int)] * jitter


def _wind_shape(n: int, dt: float, rng: np.random.Generator) -> np.ndarray:
    phi = np.exp(-dt / 12.0)  # about half a day of memory
    eps = rng.normal(0.0, np.sqrt(1 - phi**2), size=n)
    z = np.empty(n)
    z[0] = rng.normal()
    for t in range(1, n):
        z[t] = phi * z[t - 1] + eps[t]
    speed = weibull_min.ppf(norm.cdf(z), 2.0, scale=7.5)
    cut_in, rated, cut_out = 3.0, 12.0, 25.0
    power = np.clip((speed**3 - cut_in**3) / (rated**3 - cut_in**3), 0.0, 1.0)
    power[(speed < cut_in) | (speed >= cut_out)] = 0.0
    return power


def synthesize_profile(kind: str, target_flh: float, seed: int, n: int = 8760, dt: float = 1.0) -> Profile:
    """Synthetic profile with a prescribed number of full-load hours.

    Solar is a clear-sky diurnal envelope times seasonal and cloud factors;
    wind is an autoregressive speed process pushed through a cubic power
    curve. Both are rescaled to ``target_flh`` without exceeding 1 p.u.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown profile kind {kind!r}")
    if not 0 < target_flh <= n * dt:
        raise ValueError(f"target FLH {target_flh} outside (0, {n * dt}]")
    rng = np.random.default_rng([seed, KINDS.index(kind)])
    shape = _solar_shape(n, dt, rng) if kind == "solar" else _wind_shape(n, dt, rng)
    if kind == "solar" and target_flh > dt * np.count_nonzero(shape):
        raise ValueError(f"solar target FLH {target_flh} exceeds the {dt * np.count_nonzero(shape)} daylight hours")
    return Profile(_fit_flh(shape, target_flh, dt), kind, dt)


def synthetic_pair(wind_flh: float = 3500.0, solar_flh: float = 1800.0, seed: int = 1, n: int = 8760, dt: float = 1.0):
    """Wind and solar profiles for a year, truncated to ``n`` hours.

    FLH targets apply to the full year; a shorter horizon keeps the first
    ``n`` hours so nested horizons see the same weather.
    """
    year = max(n, int(round(8760 / dt)))
    wind = synthesize_profile("wind", wind_flh * year * dt / 8760, seed, year, dt)
    solar = synthesize_profile("solar", solar_flh * year * dt / 8760, seed, year, dt)
    return wind.head(n), solar.head(n)
