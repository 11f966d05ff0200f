"""Component-level charge accounting and battery lifetime projection.

Backs the zero-standby and full-service-life claims with numbers: the
gamma sensor and switches draw nothing while idle (open circuit /
voltage-only sensing), everything else has a datasheet-class sleep and
active current, and the projection answers whether one primary lithium
cell outlives the detector.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from enum import Enum

HOURS_PER_YEAR = 8760.0
LIFETIME_HORIZON_YEARS = 50.0


class NegativeDuration(ValueError):
    pass


class OverlappingInterval(ValueError):
    pass


class InsufficientBattery(ValueError):
    pass


class Component(Enum):
    MCU = "mcu"
    RADIO = "radio"
    GPS = "gps"
    SIREN_LIGHT = "siren_light"
    GAMMA_SENSOR = "gamma_sensor"
    SWITCHES = "switches"

# components the device powers on and off at runtime
SWITCHED_COMPONENTS = (Component.SIREN_LIGHT, Component.GPS, Component.RADIO)


@dataclass(frozen=True)
class ComponentDraw:
    sleep_uA: float
    active_mA: float

    def __post_init__(self):
        if self.sleep_uA < 0 or self.active_mA < 0:
            raise ValueError("currents must be >= 0")
        if self.sleep_uA / 1000.0 > self.active_mA:
            raise ValueError("sleep draw cannot exceed active draw")

    def current_mA(self, mode: str) -> float:
        if mode == "sleep":
            return self.sleep_uA / 1000.0
        if mode == "active":
            return self.active_mA
        raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class PowerProfile:
    draws: dict[Component, ComponentDraw]

    def __post_init__(self):
        missing = set(Component) - set(self.draws)
        if missing:
            raise ValueError(f"profile missing components: {sorted(c.value for c in missing)}")
        # the sensing elements are passive by design: no standby draw
        for c in (Component.GAMMA_SENSOR, Component.SWITCHES):
            if self.draws[c].sleep_uA != 0.0:
                raise ValueError(f"{c.value} must have zero sleep current")

    def current_mA(self, component: Component, mode: str) -> float:
        return self.draws[component].current_mA(mode)


def default_profile() -> PowerProfile:
    return PowerProfile({
        Component.MCU: ComponentDraw(sleep_uA=2.0, active_mA=5.0),
        Component.RADIO: ComponentDraw(sleep_uA=3.0, active_mA=220.0),  # PSM idle / transmit burst
        Component.GPS: ComponentDraw(sleep_uA=0.0, active_mA=30.0),
        Component.SIREN_LIGHT: ComponentDraw(sleep_uA=0.0, active_mA=150.0),
        Component.GAMMA_SENSOR: ComponentDraw(sleep_uA=0.0, active_mA=0.001),
        Component.SWITCHES: ComponentDraw(sleep_uA=0.0, active_mA=0.001),
    })


@dataclass(frozen=True)
class Battery:
    capacity_mAh: float = 19_000.0   # D-size primary lithium pair
    self_discharge_fraction_per_year: float = 0.01

    def __post_init__(self):
        if self.capacity_mAh <= 0:
            raise InsufficientBattery("capacity must be > 0")
        if not 0.0 <= self.self_discharge_fraction_per_year < 1.0:
            raise ValueError("self-discharge fraction must be in [0, 1)")


@dataclass(frozen=True)
class LedgerEntry:
    t_start_s: float
    t_end_s: float
    component: Component
    mode: str
    charge_mAh: float


@dataclass(frozen=True)
class EnergyLedger:
    """Immutable charge timeline; accrue() returns a new ledger."""

    entries: tuple[LedgerEntry, ...] = ()
    total_mAh: float = 0.0
    cursors_s: dict[Component, float] = field(default_factory=dict)

    def component_total(self, component: Component) -> float:
        return sum(e.charge_mAh for e in self.entries if e.component is component)


def accrue(
    ledger: EnergyLedger,
    component: Component,
    mode: str,
    duration_s: float,
    profile: PowerProfile,
    t_start_s: float | None = None,
) -> EnergyLedger:
    """Append one charge interval.

    Without an explicit start time the interval begins at the
    component's running cursor, which keeps per-component intervals
    non-overlapping by construction. An explicit start below the cursor
    is rejected.
    """
    if duration_s < 0:
        raise NegativeDuration(f"duration_s = {duration_s}")
    cursor = ledger.cursors_s.get(component, 0.0)
    start = cursor if t_start_s is None else t_start_s
    if start < cursor:
        raise OverlappingInterval(
            f"{component.value}: start {start} precedes cursor {cursor}"
        )
    if duration_s == 0:
        return ledger
    charge = profile.current_mA(component, mode) * duration_s / 3600.0
    entry = LedgerEntry(start, start + duration_s, component, mode, charge)
    cursors = dict(ledger.cursors_s)
    cursors[component] = start + duration_s
    return EnergyLedger(ledger.entries + (entry,), ledger.total_mAh + charge, cursors)


def average_current_mA(profile: PowerProfile, duty: dict[Component, float]) -> float:
    """Duty-weighted mean draw across all components, in mA."""
    total = 0.0
    for component, draw in profile.draws.items():
        f = duty.get(component, 0.0)
        if not 0.0 <= f <= 1.0:
            raise ValueError(f"duty fraction for {component.value} must be in [0, 1]")
        total += draw.active_mA * f + (draw.sleep_uA / 1000.0) * (1.0 - f)
    return total


def project_lifetime(
    profile: PowerProfile,
    battery: Battery,
    duty: dict[Component, float],
) -> float:
    """Years until the battery is exhausted, self-discharge included.

    Solves dC/dt = -lambda*C - d in closed form, where lambda is the
    continuous rate equivalent to the annual self-discharge fraction and
    d the duty-weighted draw. Returns inf when nothing ever drains the
    cell; callers cap reporting at LIFETIME_HORIZON_YEARS.
    """
    draw_mAh_per_year = average_current_mA(profile, duty) * HOURS_PER_YEAR
    sd = battery.self_discharge_fraction_per_year
    if draw_mAh_per_year == 0.0:
        return math.inf
    if sd == 0.0:
        return battery.capacity_mAh / draw_mAh_per_year
    lam = -math.log(1.0 - sd)
    return math.log1p(battery.capacity_mAh * lam / draw_mAh_per_year) / lam


def format_lifetime(years: float) -> str:
    if years > LIFETIME_HORIZON_YEARS:
        return f"exceeds horizon (> {LIFETIME_HORIZON_YEARS:.0f} years)"
    return f"{years:.1f} years"


def remaining(ledger: EnergyLedger, battery: Battery, elapsed_years: float) -> float:
    """Capacity left after decay and everything the ledger consumed."""
    if elapsed_years < 0:
        raise ValueError("elapsed_years must be >= 0")
    decayed = battery.capacity_mAh * (1.0 - battery.self_discharge_fraction_per_year) ** elapsed_years
    return max(0.0, decayed - ledger.total_mAh)


# --- nominal duty cycle: daily heartbeat plus one 10 s alarm episode a week ---

HEARTBEAT_S_PER_DAY = 5.0
ALARM_EPISODE_S = 10.0
EPISODES_PER_WEEK = 1.0


def nominal_duty(
    heartbeat_s_per_day: float = HEARTBEAT_S_PER_DAY,
    episode_s: float = ALARM_EPISODE_S,
    episodes_per_week: float = EPISODES_PER_WEEK,
) -> dict[Component, float]:
    hb = heartbeat_s_per_day / 86_400.0
    ep = episode_s * episodes_per_week / 604_800.0
    return {
        Component.MCU: hb + ep,
        Component.RADIO: hb + ep,
        Component.GPS: ep,
        Component.SIREN_LIGHT: ep,
        Component.GAMMA_SENSOR: 0.0,
        Component.SWITCHES: 0.0,
    }


# --- CSV report emitters ---


def breakdown_csv(ledger: EnergyLedger) -> str:
    """Per-component charge totals, stable column and row order."""
    out = io.StringIO()
    out.write("component,charge_mAh\r\n")
    for component in Component:
        out.write(f"{component.value},{ledger.component_total(component):.9f}\r\n")
    out.write(f"total,{ledger.total_mAh:.9f}\r\n")
    return out.getvalue()


def sensitivity_csv(
    profile: PowerProfile | None = None,
    battery: Battery | None = None,
    episodes_per_week_grid: tuple[float, ...] = (0.25, 1.0, 7.0, 70.0, 700.0, 2000.0),
) -> str:
    """Lifetime vs alarm-episode rate, documenting where 10 years breaks."""
    profile = profile or default_profile()
    battery = battery or Battery()
    out = io.StringIO()
    out.write("episodes_per_week,avg_current_mA,projected_years,meets_10_year_target\r\n")
    for rate in episodes_per_week_grid:
        duty = nominal_duty(episodes_per_week=rate)
        years = project_lifetime(profile, battery, duty)
        avg = average_current_mA(profile, duty)
        shown = min(years, LIFETIME_HORIZON_YEARS)
        out.write(f"{rate},{avg:.6f},{shown:.2f},{'yes' if years >= 10.0 else 'no'}\r\n")
    return out.getvalue()


def heartbeat_sensitivity_csv(
    profile: PowerProfile | None = None,
    battery: Battery | None = None,
    period_h_grid: tuple[float, ...] = (0.5, 1.0, 6.0, 24.0, 168.0),
) -> str:
    """Lifetime vs keep-alive cadence; backs the daily-heartbeat default."""
    profile = profile or default_profile()
    battery = battery or Battery()
    out = io.StringIO()
    out.write("heartbeat_period_h,avg_current_mA,projected_years,meets_10_year_target\r\n")
    for period_h in period_h_grid:
        per_day = HEARTBEAT_S_PER_DAY * (24.0 / period_h)
        duty = nominal_duty(heartbeat_s_per_day=per_day)
        years = project_lifetime(profile, battery, duty)
        avg = average_current_mA(profile, duty)
        shown = min(years, LIFETIME_HORIZON_YEARS)
        out.write(f"{period_h},{avg:.6f},{shown:.2f},{'yes' if years >= 10.0 else 'no'}\r\n")
    return out.getvalue()
