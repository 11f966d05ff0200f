"""Device-side hazard judgment and disposal: a pure event-fold core.

The judgment fuses the two keyed-switch levels into a verdict (the
four-row truth table), and the disposal sequence powers the siren, GPS
and radio in a fixed order so replays stay byte-stable. Everything here
is immutable and deterministic; the simulator and firmware-style
executors own side effects.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from enum import Enum, IntEnum

from .nmea import GeoFix
from .power import Component
from .radio import (
    FLAG_FIRST_LOW,
    FLAG_GAMMA_TRIGGERED,
    FLAG_LOCK_ENGAGED,
    FLAG_SECOND_LOW,
    CommandKind,
    DownlinkCommand,
    MsgType,
    UplinkFrame,
)
from .sensors import DetectorPosture, SourcePosition, SwitchLevel

log = logging.getLogger(__name__)


class RejectsUnorderedEvents(ValueError):
    pass


class HazardVerdict(IntEnum):
    """Severity-ordered verdict; substituting Low for High never lowers it."""

    SAFE = 0
    WARNING = 1
    ALARM = 2


# Truth table: (first switch, second switch) -> verdict.
# First Low = source not retracted; second Low = detector lifted.
# Source out while grounded warns locally (the engaged lock) but does
# not call home.
_VERDICTS = {
    (SwitchLevel.HIGH, SwitchLevel.HIGH): HazardVerdict.SAFE,
    (SwitchLevel.HIGH, SwitchLevel.LOW): HazardVerdict.SAFE,
    (SwitchLevel.LOW, SwitchLevel.HIGH): HazardVerdict.WARNING,
    (SwitchLevel.LOW, SwitchLevel.LOW): HazardVerdict.ALARM,
}


def judge_hazard(first: SwitchLevel, second: SwitchLevel) -> HazardVerdict:
    return _VERDICTS[(first, second)]


class Mode(Enum):
    DORMANT = "dormant"
    ACTIVE = "active"
    ALARMING = "alarming"


@dataclass(frozen=True)
class DeviceMode:
    state: Mode
    powered: frozenset[Component] = frozenset()

    def __post_init__(self):
        if self.state is Mode.DORMANT and self.powered:
            raise ValueError("dormant devices power nothing")
        if self.state is Mode.ALARMING and not _ALARM_POWERED <= self.powered:
            raise ValueError("alarming devices keep siren, GPS and radio powered")

    def to_dict(self) -> dict:
        return {
            "state": self.state.value,
            "powered": sorted(c.value for c in self.powered),
        }

    @staticmethod
    def from_dict(d: dict) -> "DeviceMode":
        return DeviceMode(Mode(d["state"]), frozenset(Component(c) for c in d["powered"]))


DORMANT = DeviceMode(Mode.DORMANT)
_ALARM_POWERED = frozenset({Component.SIREN_LIGHT, Component.GPS, Component.RADIO})
# power-off ordering is normative for replay stability
_POWER_OFF_ORDER = (Component.SIREN_LIGHT, Component.GPS, Component.RADIO)


class SwitchId(Enum):
    FIRST = "first"
    SECOND = "second"


class EventKind(Enum):
    GAMMA_CURRENT_DETECTED = "gamma_current_detected"
    SWITCH_CHANGED = "switch_changed"
    LOCK_ENGAGED = "lock_engaged"
    DOWNLINK_RECEIVED = "downlink_received"
    TIMER_TICK = "timer_tick"


@dataclass(frozen=True)
class DeviceEvent:
    t_ms: int
    kind: EventKind
    switch: SwitchId | None = None
    level: SwitchLevel | None = None
    command: DownlinkCommand | None = None

    @staticmethod
    def gamma(t_ms: int) -> "DeviceEvent":
        return DeviceEvent(t_ms, EventKind.GAMMA_CURRENT_DETECTED)

    @staticmethod
    def switch_changed(t_ms: int, switch: SwitchId, level: SwitchLevel) -> "DeviceEvent":
        return DeviceEvent(t_ms, EventKind.SWITCH_CHANGED, switch=switch, level=level)

    @staticmethod
    def lock_engaged(t_ms: int) -> "DeviceEvent":
        return DeviceEvent(t_ms, EventKind.LOCK_ENGAGED)

    @staticmethod
    def downlink(t_ms: int, command: DownlinkCommand) -> "DeviceEvent":
        return DeviceEvent(t_ms, EventKind.DOWNLINK_RECEIVED, command=command)

    @staticmethod
    def tick(t_ms: int) -> "DeviceEvent":
        return DeviceEvent(t_ms, EventKind.TIMER_TICK)


class ActionKind(Enum):
    POWER_ON = "power_on"
    POWER_OFF = "power_off"
    SOUND_ALARM = "sound_alarm"
    REQUEST_FIX = "request_fix"
    SEND_UPLINK = "send_uplink"
    SLEEP = "sleep"


@dataclass(frozen=True)
class DeviceAction:
    kind: ActionKind
    component: Component | None = None
    frame: UplinkFrame | None = None


def _power_on(c: Component) -> DeviceAction:
    return DeviceAction(ActionKind.POWER_ON, component=c)


def _power_off(c: Component) -> DeviceAction:
    return DeviceAction(ActionKind.POWER_OFF, component=c)


_SOUND_ALARM = DeviceAction(ActionKind.SOUND_ALARM)
_REQUEST_FIX = DeviceAction(ActionKind.REQUEST_FIX)
_SLEEP = DeviceAction(ActionKind.SLEEP)


def _send_uplink(frame: UplinkFrame) -> DeviceAction:
    return DeviceAction(ActionKind.SEND_UPLINK, frame=frame)


@dataclass(frozen=True)
class DeviceConfig:
    inactivity_timeout_ms: int = 300_000   # Active -> Dormant after this much quiet Safe time
    heartbeat_period_ms: int = 86_400_000  # daily keep-alive

    def __post_init__(self):
        if self.inactivity_timeout_ms <= 0 or self.heartbeat_period_ms <= 0:
            raise ValueError("timeouts must be positive")


DEFAULT_CONFIG = DeviceConfig()


@dataclass(frozen=True)
class DeviceSnapshot:
    """Full observable device state; serializes canonically for goldens.

    seq, the flag bits and the two bookkeeping clocks are protocol
    plumbing the state machine needs to emit well-formed frames.
    """

    device_id: int
    mode: DeviceMode = DORMANT
    first: SwitchLevel = SwitchLevel.HIGH
    second: SwitchLevel = SwitchLevel.HIGH
    braid: SourcePosition = SourcePosition.RETRACTED
    posture: DetectorPosture = DetectorPosture.ON_GROUND
    battery_mah_remaining: float = 19_000.0
    last_fix: GeoFix | None = None
    seq: int = 0
    lock_engaged: bool = False
    gamma_triggered: bool = False
    last_event_ms: int = 0
    last_heartbeat_ms: int = 0

    def __post_init__(self):
        if not 0 <= self.device_id <= 0xFFFFFFFF:
            raise ValueError("device_id must fit 32 bits")
        if self.battery_mah_remaining < 0:
            raise ValueError("battery cannot be negative")

    def to_canonical(self) -> str:
        d = {
            "device_id": self.device_id,
            "mode": self.mode.to_dict(),
            "first": self.first.value,
            "second": self.second.value,
            "braid": self.braid.value,
            "posture": self.posture.value,
            "battery_mah_remaining": self.battery_mah_remaining,
            "last_fix": self.last_fix.to_dict() if self.last_fix else None,
            "seq": self.seq,
            "lock_engaged": self.lock_engaged,
            "gamma_triggered": self.gamma_triggered,
            "last_event_ms": self.last_event_ms,
            "last_heartbeat_ms": self.last_heartbeat_ms,
        }
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_canonical(text: str) -> "DeviceSnapshot":
        d = json.loads(text)
        return DeviceSnapshot(
            device_id=d["device_id"],
            mode=DeviceMode.from_dict(d["mode"]),
            first=SwitchLevel(d["first"]),
            second=SwitchLevel(d["second"]),
            braid=SourcePosition(d["braid"]),
            posture=DetectorPosture(d["posture"]),
            battery_mah_remaining=d["battery_mah_remaining"],
            last_fix=GeoFix.from_dict(d["last_fix"]) if d["last_fix"] else None,
            seq=d["seq"],
            lock_engaged=d["lock_engaged"],
            gamma_triggered=d["gamma_triggered"],
            last_event_ms=d["last_event_ms"],
            last_heartbeat_ms=d["last_heartbeat_ms"],
        )


def _effective_levels(snapshot: DeviceSnapshot, event: DeviceEvent) -> tuple[SwitchLevel, SwitchLevel]:
    first, second = snapshot.first, snapshot.second
    if event.kind is EventKind.SWITCH_CHANGED:
        if event.switch is SwitchId.FIRST:
            first = event.level
        else:
            second = event.level
    return first, second


def build_frame(
    snapshot: DeviceSnapshot,
    msg_type: MsgType,
    seq: int,
    first: SwitchLevel | None = None,
    second: SwitchLevel | None = None,
) -> UplinkFrame:
    first = first if first is not None else snapshot.first
    second = second if second is not None else snapshot.second
    flags = 0
    if first is SwitchLevel.LOW:
        flags |= FLAG_FIRST_LOW
    if second is SwitchLevel.LOW:
        flags |= FLAG_SECOND_LOW
    if snapshot.lock_engaged:
        flags |= FLAG_LOCK_ENGAGED
    if snapshot.gamma_triggered:
        flags |= FLAG_GAMMA_TRIGGERED
    fix = snapshot.last_fix
    return UplinkFrame(
        device_id=snapshot.device_id,
        seq=seq,
        msg_type=msg_type,
        flags=flags,
        lat_e7=fix.lat_e7 if fix else 0,
        lon_e7=fix.lon_e7 if fix else 0,
        battery_dAh=min(0xFFFF, int(snapshot.battery_mah_remaining // 100)),
    )


def _alarm_entry(
    mode: DeviceMode, snapshot: DeviceSnapshot, first: SwitchLevel, second: SwitchLevel
) -> tuple[DeviceMode, list[DeviceAction]]:
    # disposal order is normative: local alarm first, then position, then uplink
    frame = build_frame(snapshot, MsgType.ALARM, snapshot.seq + 1, first, second)
    actions = [
        _power_on(Component.SIREN_LIGHT),
        _SOUND_ALARM,
        _power_on(Component.GPS),
        _REQUEST_FIX,
        _power_on(Component.RADIO),
        _send_uplink(frame),
    ]
    return DeviceMode(Mode.ALARMING, mode.powered | _ALARM_POWERED), actions


def _stand_down(mode: DeviceMode) -> tuple[DeviceMode, list[DeviceAction]]:
    actions = [_power_off(c) for c in _POWER_OFF_ORDER if c in mode.powered]
    return DeviceMode(Mode.ACTIVE, mode.powered - _ALARM_POWERED), actions


def _heartbeat_actions(
    snapshot: DeviceSnapshot, t_ms: int, config: DeviceConfig,
    first: SwitchLevel, second: SwitchLevel,
) -> list[DeviceAction]:
    if t_ms - snapshot.last_heartbeat_ms >= config.heartbeat_period_ms:
        frame = build_frame(snapshot, MsgType.HEARTBEAT, snapshot.seq + 1, first, second)
        return [_send_uplink(frame)]
    return []


def step(
    mode: DeviceMode,
    event: DeviceEvent,
    snapshot: DeviceSnapshot,
    config: DeviceConfig = DEFAULT_CONFIG,
) -> tuple[DeviceMode, list[DeviceAction]]:
    """One transition of the device state machine.

    Pure: the returned actions depend only on (mode, event, switch
    levels). The snapshot argument reflects state *before* the event;
    switch levels carried by the event itself take precedence.
    """
    first, second = _effective_levels(snapshot, event)
    verdict = judge_hazard(first, second)
    kind = event.kind

    if mode.state is Mode.DORMANT:
        if kind is EventKind.GAMMA_CURRENT_DETECTED:
            return _wake(mode, snapshot, first, second, verdict)
        if kind is EventKind.DOWNLINK_RECEIVED:
            if event.command.cmd is CommandKind.WAKE:
                return _wake(mode, snapshot, first, second, verdict)
            if event.command.cmd is CommandKind.UNKNOWN:
                log.debug("ignoring unknown downlink command byte %s", event.command.raw_cmd)
            return mode, []
        if kind is EventKind.TIMER_TICK:
            return mode, _heartbeat_actions(snapshot, event.t_ms, config, first, second)
        # switch edges and the lock are recorded by the fold; the MCU
        # itself sleeps until a gamma current or the network wakes it
        return mode, []

    if mode.state is Mode.ACTIVE:
        if kind is EventKind.SWITCH_CHANGED and verdict is HazardVerdict.ALARM:
            return _alarm_entry(mode, snapshot, first, second)
        if kind is EventKind.TIMER_TICK:
            actions = _heartbeat_actions(snapshot, event.t_ms, config, first, second)
            quiet_ms = event.t_ms - snapshot.last_event_ms
            if verdict is HazardVerdict.SAFE and quiet_ms >= config.inactivity_timeout_ms:
                actions += [_power_off(c) for c in _POWER_OFF_ORDER if c in mode.powered]
                actions.append(_SLEEP)
                return DORMANT, actions
            return mode, actions
        if kind is EventKind.DOWNLINK_RECEIVED:
            return _handle_command(mode, event, snapshot, first, second)
        return mode, []

    # Alarming
    if kind is EventKind.SWITCH_CHANGED and verdict is not HazardVerdict.ALARM:
        return _stand_down(mode)
    if kind is EventKind.TIMER_TICK:
        return mode, _heartbeat_actions(snapshot, event.t_ms, config, first, second)
    if kind is EventKind.DOWNLINK_RECEIVED:
        return _handle_command(mode, event, snapshot, first, second)
    return mode, []


def _wake(
    mode: DeviceMode, snapshot: DeviceSnapshot,
    first: SwitchLevel, second: SwitchLevel, verdict: HazardVerdict,
) -> tuple[DeviceMode, list[DeviceAction]]:
    # waking re-reads the switches: if they already sit at the alarm
    # combination, go straight to disposal
    if verdict is HazardVerdict.ALARM:
        return _alarm_entry(DeviceMode(Mode.ACTIVE), snapshot, first, second)
    return DeviceMode(Mode.ACTIVE), []


def _handle_command(
    mode: DeviceMode, event: DeviceEvent, snapshot: DeviceSnapshot,
    first: SwitchLevel, second: SwitchLevel,
) -> tuple[DeviceMode, list[DeviceAction]]:
    cmd = event.command.cmd
    if cmd is CommandKind.LOCATE:
        actions = []
        if Component.GPS not in mode.powered:
            actions.append(_power_on(Component.GPS))
        actions.append(_REQUEST_FIX)
        if mode.state is Mode.ALARMING:
            return mode, actions
        return DeviceMode(mode.state, mode.powered | {Component.GPS}), actions
    if cmd is CommandKind.SILENCE:
        if mode.state is Mode.ALARMING:
            return _stand_down(mode)
        return mode, []
    if cmd is CommandKind.PING:
        actions = []
        new_powered = mode.powered
        if Component.RADIO not in mode.powered:
            actions.append(_power_on(Component.RADIO))
            new_powered = mode.powered | {Component.RADIO}
        frame = build_frame(snapshot, MsgType.ACK, snapshot.seq + 1, first, second)
        actions.append(_send_uplink(frame))
        return DeviceMode(mode.state, new_powered), actions
    if cmd is CommandKind.UNKNOWN:
        log.debug("ignoring unknown downlink command byte %s", event.command.raw_cmd)
    return mode, []  # WAKE while awake is a no-op


def apply_event(
    snapshot: DeviceSnapshot,
    event: DeviceEvent,
    new_mode: DeviceMode,
    actions: list[DeviceAction],
) -> DeviceSnapshot:
    """Fold one processed event into the snapshot."""
    changes: dict = {"mode": new_mode}
    if event.kind is EventKind.SWITCH_CHANGED:
        if event.switch is SwitchId.FIRST:
            changes["first"] = event.level
            if event.level is SwitchLevel.HIGH:
                # source back in the tank: lock releases, gamma current stops
                changes["braid"] = SourcePosition.RETRACTED
                changes["lock_engaged"] = False
                changes["gamma_triggered"] = False
            else:
                changes["braid"] = SourcePosition.EXTENDED
        else:
            changes["second"] = event.level
            changes["posture"] = (
                DetectorPosture.ON_GROUND if event.level is SwitchLevel.HIGH
                else DetectorPosture.LIFTED
            )
    elif event.kind is EventKind.GAMMA_CURRENT_DETECTED:
        changes["gamma_triggered"] = True
        if snapshot.braid is SourcePosition.RETRACTED:
            changes["braid"] = SourcePosition.EXTENDED
    elif event.kind is EventKind.LOCK_ENGAGED:
        changes["lock_engaged"] = True
    if event.kind is not EventKind.TIMER_TICK:
        changes["last_event_ms"] = event.t_ms
    uplinks = sum(1 for a in actions if a.kind is ActionKind.SEND_UPLINK)
    if uplinks:
        changes["seq"] = snapshot.seq + uplinks
        if any(
            a.kind is ActionKind.SEND_UPLINK and a.frame.msg_type is MsgType.HEARTBEAT
            for a in actions
        ):
            changes["last_heartbeat_ms"] = event.t_ms
    return replace(snapshot, **changes)


def replay(
    events: list[DeviceEvent],
    initial: DeviceSnapshot,
    config: DeviceConfig = DEFAULT_CONFIG,
) -> tuple[DeviceSnapshot, list[DeviceAction]]:
    """Fold step over a time-ordered event list; fully deterministic."""
    snapshot = initial
    all_actions: list[DeviceAction] = []
    prev_t = None
    for event in events:
        if prev_t is not None and event.t_ms < prev_t:
            raise RejectsUnorderedEvents(f"event at {event.t_ms} ms after {prev_t} ms")
        prev_t = event.t_ms
        new_mode, actions = step(snapshot.mode, event, snapshot, config)
        snapshot = apply_event(snapshot, event, new_mode, actions)
        all_actions.extend(actions)
    return snapshot, all_actions
