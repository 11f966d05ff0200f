"""Cloud monitoring platform: registry, alarm lifecycle, offline detection.

Event-sourced by construction. Every operation validates against live
state, emits log entries, and then mutates state exclusively by applying
those entries; replaying the log from empty therefore reconstructs the
platform exactly. The append-only log is the authority, derived state is
a cache.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import IO

from ..radio import CommandKind, MsgType, UplinkFrame


class UnknownDevice(KeyError):
    pass


class UnknownAlarm(KeyError):
    pass


class NotOpen(ValueError):
    """Alarm is not in the state the requested transition needs."""


class CorruptEntry(ValueError):
    pass


class DeviceStatus(Enum):
    ONLINE = "online"
    OFFLINE = "offline"
    ALARMING = "alarming"


class AlarmState(Enum):
    OPEN = "open"
    ACKED = "acked"
    CLOSED = "closed"


class LogKind(Enum):
    FRAME_IN = "frame_in"
    ALARM_OPENED = "alarm_opened"
    ALARM_ACKED = "alarm_acked"
    ALARM_CLOSED = "alarm_closed"
    WENT_OFFLINE = "went_offline"
    CAME_ONLINE = "came_online"
    COMMAND_QUEUED = "command_queued"
    COMMAND_DELIVERED = "command_delivered"


@dataclass(frozen=True)
class EventLogEntry:
    offset: int
    timestamp_s: float
    kind: LogKind
    payload: dict

    def to_dict(self) -> dict:
        return {
            "offset": self.offset,
            "timestamp_s": self.timestamp_s,
            "kind": self.kind.value,
            "payload": self.payload,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json(line: str) -> "EventLogEntry":
        try:
            d = json.loads(line)
            return EventLogEntry(
                offset=d["offset"],
                timestamp_s=d["timestamp_s"],
                kind=LogKind(d["kind"]),
                payload=d["payload"],
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptEntry(f"unparseable log entry: {exc}") from exc


@dataclass
class DeviceRecord:
    device_id: int
    last_seen_s: float
    battery_dAh: int = 0
    seq_high: int = -1
    last_fix: dict | None = None       # {"lat_e7", "lon_e7", "at_s"}; wire carries no quality
    marked_offline: bool = False

    def to_dict(self, status: DeviceStatus) -> dict:
        return {
            "device_id": self.device_id,
            "status": status.value,
            "last_seen_s": self.last_seen_s,
            "battery_dAh": self.battery_dAh,
            "seq_high": self.seq_high,
            "last_fix": self.last_fix,
        }


@dataclass
class AlarmRecord:
    alarm_id: int
    device_id: int
    opened_at_s: float
    fix_at_open: dict | None
    state: AlarmState = AlarmState.OPEN
    acked_by: str | None = None

    def to_dict(self) -> dict:
        return {
            "alarm_id": self.alarm_id,
            "device_id": self.device_id,
            "opened_at_s": self.opened_at_s,
            "fix_at_open": self.fix_at_open,
            "state": self.state.value,
            "acked_by": self.acked_by,
        }


@dataclass(frozen=True)
class CommandTicket:
    ticket_id: int
    device_id: int
    cmd: str
    nonce: int
    operator: str
    queued_at_s: float

    def to_dict(self) -> dict:
        return {
            "ticket_id": self.ticket_id,
            "device_id": self.device_id,
            "cmd": self.cmd,
            "nonce": self.nonce,
            "operator": self.operator,
            "queued_at_s": self.queued_at_s,
        }


@dataclass(frozen=True)
class PlatformConfig:
    auto_register: bool = True
    heartbeat_period_s: float = 86_400.0
    missed_heartbeats_k: int = 3

    def __post_init__(self):
        if self.heartbeat_period_s <= 0:
            raise ValueError("heartbeat_period_s must be > 0")
        if self.missed_heartbeats_k < 1:
            raise ValueError("missed_heartbeats_k must be >= 1")


class MonitorPlatform:
    """Single-writer platform state; callers serialize mutations."""

    def __init__(self, config: PlatformConfig = PlatformConfig(), log_sink: IO[str] | None = None):
        self.config = config
        self.devices: dict[int, DeviceRecord] = {}
        self.alarms: dict[int, AlarmRecord] = {}
        self.open_alarm_by_device: dict[int, int] = {}
        self.queues: dict[int, list[CommandTicket]] = {}
        self.log: list[EventLogEntry] = []
        self._next_alarm_id = 1
        self._next_ticket_id = 1
        self._log_sink = log_sink

    # --- derived views ---

    @property
    def offset(self) -> int:
        return len(self.log)

    def status_of(self, device_id: int) -> DeviceStatus:
        rec = self.devices.get(device_id)
        if rec is None:
            raise UnknownDevice(device_id)
        if device_id in self.open_alarm_by_device:
            return DeviceStatus.ALARMING
        return DeviceStatus.OFFLINE if rec.marked_offline else DeviceStatus.ONLINE

    def device_dicts(self) -> list[dict]:
        return [
            rec.to_dict(self.status_of(device_id))
            for device_id, rec in sorted(self.devices.items())
        ]

    def alarm_dicts(self, state: str | None = None) -> list[dict]:
        records = sorted(self.alarms.values(), key=lambda a: a.alarm_id)
        if state:
            records = [a for a in records if a.state.value == state]
        return [a.to_dict() for a in records]

    def entries_since(self, since: int, device_id: int | None = None) -> list[EventLogEntry]:
        entries = self.log[max(0, since):]
        if device_id is not None:
            entries = [e for e in entries if e.payload.get("device_id") == device_id]
        return entries

    def canonical_state(self) -> str:
        """Byte-stable serialization of all queryable state."""
        state = {
            "devices": self.device_dicts(),
            "alarms": self.alarm_dicts(),
            "queues": {
                str(device_id): [t.to_dict() for t in queue]
                for device_id, queue in sorted(self.queues.items())
                if queue
            },
            "next_alarm_id": self._next_alarm_id,
            "next_ticket_id": self._next_ticket_id,
            "offset": self.offset,
        }
        return json.dumps(state, sort_keys=True, separators=(",", ":"))

    # --- event emission and application ---

    def _emit(self, timestamp_s: float, kind: LogKind, payload: dict) -> EventLogEntry:
        entry = EventLogEntry(self.offset, timestamp_s, kind, payload)
        self.apply(entry)
        if self._log_sink is not None:
            self._log_sink.write(entry.to_json() + "\n")
            self._log_sink.flush()
        return entry

    def apply(self, entry: EventLogEntry) -> None:
        """Apply one log entry; the sole mutation path (also used by replay)."""
        if entry.offset != self.offset:
            raise CorruptEntry(f"offset gap: expected {self.offset}, got {entry.offset}")
        self.log.append(entry)
        p = entry.payload
        kind = entry.kind
        if kind is LogKind.FRAME_IN:
            rec = self.devices.get(p["device_id"])
            if rec is None:
                rec = DeviceRecord(p["device_id"], last_seen_s=p["received_at_s"])
                self.devices[p["device_id"]] = rec
                self.queues[p["device_id"]] = []
            rec.last_seen_s = p["received_at_s"]
            if not p["stale"]:
                rec.seq_high = p["seq"]
                rec.battery_dAh = p["battery_dAh"]
                if p["msg_type"] in (MsgType.ALARM.name.lower(), MsgType.FIX_REPORT.name.lower()):
                    if (p["lat_e7"], p["lon_e7"]) != (0, 0):
                        rec.last_fix = {
                            "lat_e7": p["lat_e7"],
                            "lon_e7": p["lon_e7"],
                            "at_s": p["received_at_s"],
                        }
        elif kind is LogKind.CAME_ONLINE:
            self.devices[p["device_id"]].marked_offline = False
        elif kind is LogKind.WENT_OFFLINE:
            self.devices[p["device_id"]].marked_offline = True
        elif kind is LogKind.ALARM_OPENED:
            alarm = AlarmRecord(
                alarm_id=p["alarm_id"],
                device_id=p["device_id"],
                opened_at_s=entry.timestamp_s,
                fix_at_open=p["fix_at_open"],
            )
            self.alarms[alarm.alarm_id] = alarm
            self.open_alarm_by_device[alarm.device_id] = alarm.alarm_id
            self._next_alarm_id = alarm.alarm_id + 1
        elif kind is LogKind.ALARM_ACKED:
            alarm = self.alarms[p["alarm_id"]]
            alarm.state = AlarmState.ACKED
            alarm.acked_by = p["operator"]
            self.open_alarm_by_device.pop(alarm.device_id, None)
        elif kind is LogKind.ALARM_CLOSED:
            self.alarms[p["alarm_id"]].state = AlarmState.CLOSED
        elif kind is LogKind.COMMAND_QUEUED:
            ticket = CommandTicket(
                ticket_id=p["ticket_id"],
                device_id=p["device_id"],
                cmd=p["cmd"],
                nonce=p["nonce"],
                operator=p["operator"],
                queued_at_s=entry.timestamp_s,
            )
            self.queues.setdefault(ticket.device_id, []).append(ticket)
            self._next_ticket_id = ticket.ticket_id + 1
        elif kind is LogKind.COMMAND_DELIVERED:
            queue = self.queues.get(p["device_id"], [])
            self.queues[p["device_id"]] = [t for t in queue if t.ticket_id != p["ticket_id"]]

    # --- operations ---

    def ingest(self, frame: UplinkFrame, received_at_s: float) -> list[EventLogEntry]:
        """Take one CRC-validated uplink into the registry.

        Stale sequence numbers are recorded but never re-trigger alarms,
        so retransmissions cannot multiply alarm records.
        """
        rec = self.devices.get(frame.device_id)
        if rec is None and not self.config.auto_register:
            raise UnknownDevice(frame.device_id)
        registered = rec is None
        was_offline = rec is not None and rec.marked_offline
        stale = rec is not None and frame.seq <= rec.seq_high
        entries = [self._emit(received_at_s, LogKind.FRAME_IN, {
            "device_id": frame.device_id,
            "seq": frame.seq,
            "msg_type": frame.msg_type.name.lower(),
            "flags": frame.flags,
            "lat_e7": frame.lat_e7,
            "lon_e7": frame.lon_e7,
            "battery_dAh": frame.battery_dAh,
            "received_at_s": received_at_s,
            "stale": stale,
        })]
        if registered or was_offline:
            entries.append(self._emit(received_at_s, LogKind.CAME_ONLINE, {
                "device_id": frame.device_id,
                "provisioned": registered,
            }))
        if (
            frame.msg_type is MsgType.ALARM
            and not stale
            and frame.device_id not in self.open_alarm_by_device
        ):
            fix = None
            if (frame.lat_e7, frame.lon_e7) != (0, 0):
                fix = {"lat_e7": frame.lat_e7, "lon_e7": frame.lon_e7, "at_s": received_at_s}
            entries.append(self._emit(received_at_s, LogKind.ALARM_OPENED, {
                "device_id": frame.device_id,
                "alarm_id": self._next_alarm_id,
                "fix_at_open": fix,
            }))
        return entries

    def offline_scan(
        self,
        now_s: float,
        heartbeat_period_s: float | None = None,
        missed_k: int | None = None,
    ) -> list[EventLogEntry]:
        """Flag every quiet Online device; already-Offline devices are untouched."""
        period = heartbeat_period_s if heartbeat_period_s is not None else self.config.heartbeat_period_s
        k = missed_k if missed_k is not None else self.config.missed_heartbeats_k
        if period <= 0 or k < 1:
            raise ValueError("need period > 0 and k >= 1")
        entries = []
        for device_id, rec in sorted(self.devices.items()):
            if self.status_of(device_id) is not DeviceStatus.ONLINE:
                continue
            if now_s - rec.last_seen_s > k * period:
                entries.append(self._emit(now_s, LogKind.WENT_OFFLINE, {"device_id": device_id}))
        return entries

    def enqueue_command(
        self, device_id: int, cmd: CommandKind, operator: str, now_s: float
    ) -> CommandTicket:
        if device_id not in self.devices:
            raise UnknownDevice(device_id)
        if cmd is CommandKind.UNKNOWN:
            raise ValueError("cannot queue an unknown command kind")
        ticket_id = self._next_ticket_id
        self._emit(now_s, LogKind.COMMAND_QUEUED, {
            "device_id": device_id,
            "ticket_id": ticket_id,
            "cmd": cmd.name.lower(),
            "nonce": ticket_id & 0xFFFFFFFF,
            "operator": operator,
        })
        return self.queues[device_id][-1]

    def fetch_pending(self, device_id: int, now_s: float) -> list[CommandTicket]:
        """Drain the per-device FIFO to the network layer."""
        if device_id not in self.devices:
            raise UnknownDevice(device_id)
        pending = list(self.queues.get(device_id, []))
        for ticket in pending:
            self._emit(now_s, LogKind.COMMAND_DELIVERED, {
                "device_id": device_id,
                "ticket_id": ticket.ticket_id,
            })
        return pending

    def ack_alarm(
        self, alarm_id: int, operator: str, now_s: float, close: bool = False
    ) -> EventLogEntry:
        alarm = self.alarms.get(alarm_id)
        if alarm is None:
            raise UnknownAlarm(alarm_id)
        if close:
            if alarm.state is not AlarmState.ACKED:
                raise NotOpen(f"alarm {alarm_id} is {alarm.state.value}, close needs acked")
            return self._emit(now_s, LogKind.ALARM_CLOSED, {
                "device_id": alarm.device_id, "alarm_id": alarm_id, "operator": operator,
            })
        if alarm.state is not AlarmState.OPEN:
            raise NotOpen(f"alarm {alarm_id} is {alarm.state.value}, ack needs open")
        return self._emit(now_s, LogKind.ALARM_ACKED, {
            "device_id": alarm.device_id, "alarm_id": alarm_id, "operator": operator,
        })


def replay_log(
    entries: list[EventLogEntry], config: PlatformConfig = PlatformConfig()
) -> MonitorPlatform:
    """Rebuild a platform purely from its log; offsets must be gapless from 0."""
    platform = MonitorPlatform(config)
    for entry in entries:
        platform.apply(entry)
    return platform


def load_log(path: str | Path) -> list[EventLogEntry]:
    entries = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(EventLogEntry.from_json(line))
    return entries
