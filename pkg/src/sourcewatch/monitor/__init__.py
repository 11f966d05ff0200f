from .core import (
    AlarmRecord,
    AlarmState,
    CommandTicket,
    CorruptEntry,
    DeviceRecord,
    DeviceStatus,
    EventLogEntry,
    LogKind,
    MonitorPlatform,
    NotOpen,
    PlatformConfig,
    UnknownAlarm,
    UnknownDevice,
    replay_log,
)

__all__ = [
    "AlarmRecord",
    "AlarmState",
    "CommandTicket",
    "CorruptEntry",
    "DeviceRecord",
    "DeviceStatus",
    "EventLogEntry",
    "LogKind",
    "MonitorPlatform",
    "NotOpen",
    "PlatformConfig",
    "UnknownAlarm",
    "UnknownDevice",
    "replay_log",
]
