"""Scenario files: scripted incidents as data.

A scenario is JSON with units spelled out in key names. The shipped
fixtures under scenarios/ are normative examples of the schema. The
seed fully determines a run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from ..sensors import SwitchFault


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


class StimulusKind(Enum):
    EXTEND_BRAID = "extend_braid"
    RETRACT_BRAID = "retract_braid"
    SHED_SOURCE = "shed_source"
    LIFT_DETECTOR = "lift_detector"
    GROUND_DETECTOR = "ground_detector"
    INJECT_SWITCH_FAULT = "inject_switch_fault"
    OPERATOR_COMMAND = "operator_command"

_COMMANDS = ("wake", "locate", "silence", "ping")


@dataclass(frozen=True)
class Stimulus:
    t_s: float
    kind: StimulusKind
    device_id: int
    switch: str | None = None          # inject_switch_fault: "first" | "second"
    fault: SwitchFault | None = None
    command: str | None = None         # operator_command: wake/locate/silence/ping
    operator: str = "scenario"


@dataclass(frozen=True)
class ScenarioDevice:
    device_id: int
    lat_e7: int
    lon_e7: int
    cell: str
    battery_mAh: float = 19_000.0


@dataclass(frozen=True)
class ScenarioCell:
    name: str
    capacity: int = 50_000


@dataclass(frozen=True)
class ChannelSegment:
    device_id: int
    from_s: float
    path_loss_dB: float


@dataclass(frozen=True)
class RadioParams:
    tech: str = "nbiot"                # "nbiot" | "gprs"
    gprs_threshold_dB: float = 9.0
    tx_power_dBm: float = 23.0
    noise_floor_dBm: float = -114.0
    residual_loss: float = 0.0
    max_attempts: int = 5
    backoff_base_s: float = 2.0
    backoff_factor: float = 2.0
    airtime_ms: int = 1000


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    duration_s: float
    devices: tuple[ScenarioDevice, ...]
    cells: tuple[ScenarioCell, ...]
    channel: tuple[ChannelSegment, ...]
    events: tuple[Stimulus, ...]
    radio: RadioParams = RadioParams()
    tick_interval_s: float = 60.0
    heartbeat_period_s: float = 86_400.0
    inactivity_timeout_s: float = 300.0
    fix_sigma_m: float = 5.0
    fix_delay_s: float = 5.0
    paging_delay_s: float = 10.0
    downlink_rtt_s: float = 0.5
    offline_scan_period_s: float = 0.0  # 0 disables platform-side scans
    isotope: str = "ir192"

    def with_path_loss(self, path_loss_dB: float) -> "Scenario":
        segments = tuple(replace(seg, path_loss_dB=path_loss_dB) for seg in self.channel)
        return replace(self, channel=segments)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValidationError(message)


def validate(scenario: Scenario) -> Scenario:
    _require(scenario.duration_s > 0, "duration_s must be > 0")
    _require(scenario.tick_interval_s > 0, "tick_interval_s must be > 0")
    _require(len(scenario.devices) > 0, "scenario needs at least one device")
    ids = [d.device_id for d in scenario.devices]
    _require(len(set(ids)) == len(ids), f"duplicate device ids: {sorted(ids)}")
    cell_names = {c.name for c in scenario.cells}
    _require(len(cell_names) == len(scenario.cells), "duplicate cell names")
    for device in scenario.devices:
        _require(
            device.cell in cell_names,
            f"device {device.device_id} references undefined cell {device.cell!r}",
        )
    known = set(ids)
    for seg in scenario.channel:
        _require(
            seg.device_id in known,
            f"channel segment references undefined device {seg.device_id}",
        )
        _require(seg.path_loss_dB >= 0, "path_loss_dB must be >= 0")
    for device_id in known:
        starts = [s.from_s for s in scenario.channel if s.device_id == device_id]
        _require(
            any(s <= 0 for s in starts),
            f"device {device_id} needs a channel segment starting at t<=0",
        )
    prev = None
    for ev in scenario.events:
        _require(
            ev.device_id in known,
            f"event at t={ev.t_s}s references undefined device {ev.device_id}",
        )
        if prev is not None:
            _require(
                ev.t_s >= prev,
                f"events out of order: t={ev.t_s}s after t={prev}s",
            )
        prev = ev.t_s
        _require(0 <= ev.t_s <= scenario.duration_s, f"event at t={ev.t_s}s outside run")
        if ev.kind is StimulusKind.INJECT_SWITCH_FAULT:
            _require(ev.switch in ("first", "second"), f"bad switch {ev.switch!r}")
            _require(ev.fault is not None, "inject_switch_fault needs a fault")
        if ev.kind is StimulusKind.OPERATOR_COMMAND:
            _require(ev.command in _COMMANDS, f"bad command {ev.command!r}")
    _require(scenario.isotope in ("ir192", "se75", "cs137", "co60"), f"bad isotope {scenario.isotope!r}")
    return scenario


def from_dict(data: dict) -> Scenario:
    try:
        events = tuple(
            Stimulus(
                t_s=float(e["t_s"]),
                kind=StimulusKind(e["kind"]),
                device_id=int(e["device_id"]),
                switch=e.get("switch"),
                fault=SwitchFault(e["fault"]) if "fault" in e else None,
                command=e.get("command"),
                operator=e.get("operator", "scenario"),
            )
            for e in data.get("events", [])
        )
        scenario = Scenario(
            name=data["name"],
            seed=int(data.get("seed", 0)),
            duration_s=float(data["duration_s"]),
            devices=tuple(
                ScenarioDevice(
                    device_id=int(d["device_id"]),
                    lat_e7=int(d["lat_e7"]),
                    lon_e7=int(d["lon_e7"]),
                    cell=d["cell"],
                    battery_mAh=float(d.get("battery_mAh", 19_000.0)),
                )
                for d in data["devices"]
            ),
            cells=tuple(
                ScenarioCell(name=c["name"], capacity=int(c.get("capacity", 50_000)))
                for c in data.get("cells", [{"name": "cell-1"}])
            ),
            channel=tuple(
                ChannelSegment(
                    device_id=int(s["device_id"]),
                    from_s=float(s.get("from_s", 0.0)),
                    path_loss_dB=float(s["path_loss_dB"]),
                )
                for s in data.get("channel", [])
            ),
            events=events,
            radio=RadioParams(**data.get("radio", {})),
            **{
                key: type(getattr(Scenario, key))(data[key])
                for key in (
                    "tick_interval_s", "heartbeat_period_s", "inactivity_timeout_s",
                    "fix_sigma_m", "fix_delay_s", "paging_delay_s", "downlink_rtt_s",
                    "offline_scan_period_s",
                )
                if key in data
            },
            isotope=data.get("isotope", "ir192"),
        )
    except ValidationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad scenario structure: {exc!r}") from exc
    return validate(scenario)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return from_dict(data)
