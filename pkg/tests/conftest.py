import numpy as np
import pytest

from repta.config import TechnoEconomicConfig
from repta.milp import SolveOptions
from repta.profiles import Profile, synthetic_pair
from repta.sizing import size

# Raised ammonia price so the two-week January window earns a positive
# revenue; the default 3200 RMB/t gives a loss there and leaves no revenue
# margin for the robust stage to trade.
PROFITABLE_NH3 = 6000.0


def toy_profiles(n=24, seed=0):
    """Day-shaped wind and solar for tiny instances."""
    rng = np.random.default_rng(seed)
    hours = np.arange(n)
    solar = np.clip(np.sin(np.pi * ((hours % 24) - 6) / 12), 0, None) * 0.9
    wind = np.clip(0.45 + 0.3 * np.sin(2 * np.pi * hours / 17 + 1.0) + 0.05 * rng.normal(size=n), 0, 1)
    return Profile(wind, "wind"), Profile(solar, "solar")


def toy_config(n=24, **changes):
    base = dict(n_hours=n, dt_as=4.0, p_nh3=PROFITABLE_NH3)
    base.update(changes)
    return TechnoEconomicConfig(**base)


@pytest.fixture(scope="session")
def fortnight():
    cfg = TechnoEconomicConfig(n_hours=336)
    wind, solar = synthetic_pair(n=336)
    return cfg, wind, solar


@pytest.fixture(scope="session")
def fortnight_profitable(fortnight):
    cfg, wind, solar = fortnight
    cfg = cfg.replace(p_nh3=PROFITABLE_NH3)
    sized = size(cfg, wind, solar, None, SolveOptions(gap=1e-6))
    return cfg, wind, solar, sized


@pytest.fixture(scope="session")
def week():
    cfg = TechnoEconomicConfig(n_hours=168)
    wind, solar = synthetic_pair(n=168)
    return cfg, wind, solar


# -- acceptance summary --------------------------------------------------------

_CRITERIA = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or report.failed:
        key = props["criterion"]
        passed = report.passed and _CRITERIA.get(key, (True,))[0]
        _CRITERIA[key] = (passed, props.get("title", ""), report.duration if report.when == "call" else 0.0)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        passed, title, seconds = _CRITERIA[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {title}  ({seconds:.1f} s)")
