"""Run reports with byte-stable emitters (human, csv, json-lines)."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

from ..power import Component

_ENERGY_COLUMNS = tuple(c.value for c in Component)


@dataclass(frozen=True)
class DeviceReport:
    device_id: int
    shed_at_s: float | None
    local_alarm_at_s: float | None
    platform_alarm_at_s: float | None
    shed_to_local_alarm_s: float | None
    shed_to_platform_alarm_s: float | None
    frames_sent: int
    frames_delivered: int
    frames_failed: int
    energy_mAh: dict[str, float]
    energy_total_mAh: float
    final_status: str

    def to_dict(self) -> dict:
        return {
            "device_id": self.device_id,
            "shed_at_s": _num(self.shed_at_s),
            "local_alarm_at_s": _num(self.local_alarm_at_s),
            "platform_alarm_at_s": _num(self.platform_alarm_at_s),
            "shed_to_local_alarm_s": _num(self.shed_to_local_alarm_s),
            "shed_to_platform_alarm_s": _num(self.shed_to_platform_alarm_s),
            "frames_sent": self.frames_sent,
            "frames_delivered": self.frames_delivered,
            "frames_failed": self.frames_failed,
            "energy_mAh": {k: _energy(v) for k, v in sorted(self.energy_mAh.items())},
            "energy_total_mAh": _energy(self.energy_total_mAh),
            "final_status": self.final_status,
        }


@dataclass(frozen=True)
class SimReport:
    scenario_name: str
    seed: int
    duration_s: float
    devices: tuple[DeviceReport, ...]
    stimulus_counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "scenario_name": self.scenario_name,
            "seed": self.seed,
            "duration_s": _num(self.duration_s),
            "stimulus_counts": self.stimulus_counts,
            "devices": [d.to_dict() for d in self.devices],
        }


def _num(value: float | None) -> float | None:
    # fixed millisecond precision keeps emitted bytes identical across runs
    return None if value is None else round(value, 3)


def _energy(value: float) -> float:
    return round(value, 9)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.9f}".rstrip("0").rstrip(".")
    return str(value)


def emit_report(report: SimReport, format: str = "human") -> bytes:
    if format == "json-lines":
        header = dict(report.to_dict())
        devices = header.pop("devices")
        lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
        lines += [json.dumps(d, sort_keys=True, separators=(",", ":")) for d in devices]
        return ("\n".join(lines) + "\n").encode()
    if format == "csv":
        out = io.StringIO()
        columns = (
            "device_id", "shed_at_s", "local_alarm_at_s", "platform_alarm_at_s",
            "shed_to_local_alarm_s", "shed_to_platform_alarm_s",
            "frames_sent", "frames_delivered", "frames_failed",
        ) + tuple(f"energy_{c}_mAh" for c in _ENERGY_COLUMNS) + (
            "energy_total_mAh", "final_status",
        )
        out.write(",".join(columns) + "\r\n")
        for dev in report.devices:
            d = dev.to_dict()
            row = [
                _fmt(d["device_id"]), _fmt(d["shed_at_s"]), _fmt(d["local_alarm_at_s"]),
                _fmt(d["platform_alarm_at_s"]), _fmt(d["shed_to_local_alarm_s"]),
                _fmt(d["shed_to_platform_alarm_s"]), _fmt(d["frames_sent"]),
                _fmt(d["frames_delivered"]), _fmt(d["frames_failed"]),
            ]
            row += [_fmt(d["energy_mAh"][c]) for c in _ENERGY_COLUMNS]
            row += [_fmt(d["energy_total_mAh"]), d["final_status"]]
            out.write(",".join(row) + "\r\n")
        return out.getvalue().encode()
    if format == "human":
        out = io.StringIO()
        out.write(f"scenario {report.scenario_name!r} seed={report.seed} duration={_fmt(_num(report.duration_s))}s\n")
        out.write(f"stimuli: {report.stimulus_counts}\n")
        for dev in report.devices:
            d = dev.to_dict()
            out.write(
                f"device {d['device_id']}: status={d['final_status']} "
                f"frames {d['frames_delivered']}/{d['frames_sent']} delivered "
                f"({d['frames_failed']} failed)\n"
            )
            if d["shed_at_s"] is not None:
                local = d["shed_to_local_alarm_s"]
                plat = d["shed_to_platform_alarm_s"]
                out.write(
                    f"  shed at {_fmt(d['shed_at_s'])}s -> local alarm "
                    f"{'never' if local is None else _fmt(local) + 's later'}, platform alarm "
                    f"{'never' if plat is None else _fmt(plat) + 's later'}\n"
                )
            out.write(f"  energy {_fmt(d['energy_total_mAh'])} mAh: ")
            out.write(", ".join(f"{c}={_fmt(d['energy_mAh'][c])}" for c in _ENERGY_COLUMNS))
            out.write("\n")
        return out.getvalue().encode()
    raise ValueError(f"unknown report format {format!r}")
