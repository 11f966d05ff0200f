"""Discrete-event executor binding device, sensors, radio and platform.

A single global heap drives everything on a logical millisecond clock;
ties break FIFO by insertion order, which makes the whole run a pure
function of (scenario, seed). The platform side can be the in-process
object or an HTTP server; both paths must produce identical reports.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field, replace

from .. import hazard, nmea, power, radio, sensors
from ..hazard import ActionKind, DeviceConfig, DeviceEvent, DeviceSnapshot, Mode, SwitchId
from ..monitor.client import PlatformClient
from ..monitor.core import MonitorPlatform, PlatformConfig
from ..power import Component
from ..sensors import (
    DetectorPosture,
    Isotope,
    LockState,
    SourcePosition,
    SwitchFault,
    SwitchLevel,
)
from .report import DeviceReport, SimReport
from .scenario import Scenario, Stimulus, StimulusKind, validate


def _derived_seed(seed: int, device_id: int, stream: int, n: int) -> int:
    # fixed arithmetic mix; never hash() (randomized per process)
    return (seed * 2654435761 + device_id * 1000003 + stream * 65537 + n) % (2**63)


class InProcessGateway:
    """Direct function calls into a MonitorPlatform."""

    def __init__(self, platform: MonitorPlatform | None = None):
        self.platform = platform or MonitorPlatform(PlatformConfig())

    def ingest_frame(self, frame_hex: str, received_at_s: float) -> list[dict]:
        frame = radio.decode_frame(bytes.fromhex(frame_hex))
        return [e.to_dict() for e in self.platform.ingest(frame, received_at_s)]

    def enqueue(self, device_id: int, cmd: str, operator: str, now_s: float) -> dict:
        ticket = self.platform.enqueue_command(
            device_id, radio.CommandKind[cmd.upper()], operator, now_s
        )
        return ticket.to_dict()

    def fetch_pending(self, device_id: int, now_s: float) -> list[dict]:
        return [t.to_dict() for t in self.platform.fetch_pending(device_id, now_s)]

    def scan(self, now_s: float, heartbeat_period_s: float, missed_k: int) -> list[dict]:
        return [
            e.to_dict()
            for e in self.platform.offline_scan(now_s, heartbeat_period_s, missed_k)
        ]

    def device_status(self, device_id: int) -> str:
        if device_id not in self.platform.devices:
            return "unregistered"
        return self.platform.status_of(device_id).value


class HttpGateway:
    """Same contract as InProcessGateway, over the JSON API."""

    def __init__(self, base_url: str):
        self.client = PlatformClient(base_url)

    def ingest_frame(self, frame_hex: str, received_at_s: float) -> list[dict]:
        return self.client.ingest(frame_hex, received_at_s)["events"]

    def enqueue(self, device_id: int, cmd: str, operator: str, now_s: float) -> dict:
        return self.client.enqueue_command(device_id, cmd, operator, now_s)["ticket"]

    def fetch_pending(self, device_id: int, now_s: float) -> list[dict]:
        return self.client.fetch_pending(device_id, now_s)["commands"]

    def scan(self, now_s: float, heartbeat_period_s: float, missed_k: int) -> list[dict]:
        return self.client.post(
            "/scan",
            {"now_s": now_s, "heartbeat_period_s": heartbeat_period_s, "missed_k": missed_k},
        )["events"]

    def device_status(self, device_id: int) -> str:
        try:
            return self.client.device(device_id)["device"]["status"]
        except Exception:
            return "unregistered"


@dataclass
class _GroundTruth:
    """What is physically true at the device, independent of its beliefs."""

    braid: SourcePosition = SourcePosition.RETRACTED
    posture: DetectorPosture = DetectorPosture.ON_GROUND
    fault_first: SwitchFault = SwitchFault.NONE
    fault_second: SwitchFault = SwitchFault.NONE
    lock: LockState = LockState.OPEN
    gamma_on: bool = False
    level_first: SwitchLevel = SwitchLevel.HIGH
    level_second: SwitchLevel = SwitchLevel.HIGH


@dataclass
class _DeviceRuntime:
    snapshot: DeviceSnapshot
    truth: _GroundTruth
    cell: radio.CellState
    initial_battery_mAh: float
    lat_e7: int
    lon_e7: int
    ledger: power.EnergyLedger = field(default_factory=power.EnergyLedger)
    intervals: list[tuple[str, int, int]] = field(default_factory=list)  # (component, t0_ms, t1_ms)
    open_since_ms: dict[Component, int] = field(default_factory=dict)
    busy_ms: dict[Component, int] = field(default_factory=dict)
    frames_sent: int = 0
    frames_delivered: int = 0
    frames_failed: int = 0
    tx_count: int = 0
    fix_count: int = 0
    shed_at_s: float | None = None
    local_alarm_at_s: float | None = None
    platform_alarm_at_s: float | None = None


@dataclass
class SimResult:
    report: SimReport
    ledgers: dict[int, power.EnergyLedger]
    intervals: dict[int, list[tuple[str, int, int]]]
    platform_events: list[dict]


class _Engine:
    def __init__(self, scenario: Scenario, gateway, profile: power.PowerProfile):
        self.sc = scenario
        self.gw = gateway
        self.profile = profile
        self.queue: list = []
        self.counter = itertools.count()  # FIFO tie-break on equal timestamps
        self.now_ms = 0
        self.duration_ms = round(scenario.duration_s * 1000)
        self.platform_events: list[dict] = []
        self.stimulus_counts: dict[str, int] = {}
        self.device_config = DeviceConfig(
            inactivity_timeout_ms=round(scenario.inactivity_timeout_s * 1000),
            heartbeat_period_ms=round(scenario.heartbeat_period_s * 1000),
        )
        self.policy = radio.RetryPolicy(
            max_attempts=scenario.radio.max_attempts,
            backoff_base_s=scenario.radio.backoff_base_s,
            backoff_factor=scenario.radio.backoff_factor,
            airtime_ms=scenario.radio.airtime_ms,
        )
        gprs, nbiot = radio.tech_pair(scenario.radio.gprs_threshold_dB)
        self.tech = nbiot if scenario.radio.tech == "nbiot" else gprs
        self.cells = {c.name: radio.CellState(capacity=c.capacity) for c in scenario.cells}
        self.source = sensors.default_source(Isotope(scenario.isotope))
        self.sensor_cfg = sensors.GammaSensorConfig()
        self.devices: dict[int, _DeviceRuntime] = {}
        for dev in scenario.devices:
            cell = self.cells[dev.cell]
            radio.attach(cell, dev.device_id)
            self.devices[dev.device_id] = _DeviceRuntime(
                snapshot=DeviceSnapshot(
                    device_id=dev.device_id,
                    battery_mah_remaining=dev.battery_mAh,
                    # a heartbeat is already due at t=0: first contact
                    # announces the device to the platform
                    last_heartbeat_ms=-self.device_config.heartbeat_period_ms,
                ),
                truth=_GroundTruth(),
                cell=cell,
                initial_battery_mAh=dev.battery_mAh,
                lat_e7=dev.lat_e7,
                lon_e7=dev.lon_e7,
            )
        self.segments: dict[int, list] = {}
        for seg in scenario.channel:
            self.segments.setdefault(seg.device_id, []).append(seg)
        for segs in self.segments.values():
            segs.sort(key=lambda s: s.from_s)

    # --- queue plumbing ---

    def push(self, t_ms: int, item: tuple) -> None:
        heapq.heappush(self.queue, (t_ms, next(self.counter), item))

    def path_loss(self, device_id: int, t_ms: int) -> float:
        loss = 0.0
        for seg in self.segments.get(device_id, []):
            if seg.from_s * 1000 <= t_ms:
                loss = seg.path_loss_dB
            else:
                break
        return loss

    def channel_for(self, rt: _DeviceRuntime, t_ms: int) -> radio.Channel:
        budget = radio.LinkBudget(
            tx_power_dBm=self.sc.radio.tx_power_dBm,
            path_loss_dB=self.path_loss(rt.snapshot.device_id, t_ms),
            noise_floor_dBm=self.sc.radio.noise_floor_dBm,
        )
        return radio.Channel(budget, self.tech, self.sc.radio.residual_loss, rt.cell)

    # --- energy bookkeeping ---

    def _component_on(self, rt: _DeviceRuntime, component: Component, t_ms: int) -> None:
        rt.open_since_ms.setdefault(component, t_ms)

    def _component_off(self, rt: _DeviceRuntime, component: Component, t_ms: int) -> None:
        t0 = rt.open_since_ms.pop(component, None)
        if t0 is None:
            return
        if t_ms > t0:
            rt.intervals.append((component.value, t0, t_ms))
            rt.busy_ms[component] = rt.busy_ms.get(component, 0) + (t_ms - t0)
            rt.ledger = power.accrue(
                rt.ledger, component, "active", (t_ms - t0) / 1000.0, self.profile
            )

    def _radio_burst(self, rt: _DeviceRuntime, t_ms: int, airtime_ms: int) -> None:
        if airtime_ms <= 0:
            return
        rt.intervals.append((Component.RADIO.value, t_ms, t_ms + airtime_ms))
        rt.busy_ms[Component.RADIO] = rt.busy_ms.get(Component.RADIO, 0) + airtime_ms
        rt.ledger = power.accrue(
            rt.ledger, Component.RADIO, "active", airtime_ms / 1000.0, self.profile
        )

    def _refresh_battery(self, rt: _DeviceRuntime) -> None:
        remaining = max(0.0, rt.initial_battery_mAh - rt.ledger.total_mAh)
        if remaining < rt.snapshot.battery_mah_remaining:
            rt.snapshot = replace(rt.snapshot, battery_mah_remaining=remaining)

    # --- stimulus handling ---

    def handle_stimulus(self, st: Stimulus) -> None:
        t_ms = round(st.t_s * 1000)
        self.stimulus_counts[st.kind.value] = self.stimulus_counts.get(st.kind.value, 0) + 1
        rt = self.devices[st.device_id]
        truth = rt.truth
        kind = st.kind
        if kind is StimulusKind.OPERATOR_COMMAND:
            self.gw.enqueue(st.device_id, st.command, st.operator, st.t_s)
            if st.command == "wake":
                self.push(t_ms + round(self.sc.paging_delay_s * 1000), ("command_check", st.device_id))
            return
        if kind is StimulusKind.INJECT_SWITCH_FAULT:
            if st.switch == "first":
                truth.fault_first = st.fault
            else:
                truth.fault_second = st.fault
        elif kind is StimulusKind.EXTEND_BRAID:
            truth.braid = SourcePosition.EXTENDED
        elif kind is StimulusKind.SHED_SOURCE:
            truth.braid = SourcePosition.SHED
            if rt.shed_at_s is None:
                rt.shed_at_s = st.t_s
        elif kind is StimulusKind.RETRACT_BRAID:
            truth.braid = SourcePosition.RETRACTED
        elif kind is StimulusKind.LIFT_DETECTOR:
            truth.posture = DetectorPosture.LIFTED
        elif kind is StimulusKind.GROUND_DETECTOR:
            truth.posture = DetectorPosture.ON_GROUND
        self._settle_physics(rt, t_ms)

    def _settle_physics(self, rt: _DeviceRuntime, t_ms: int) -> None:
        """Re-derive sensor outputs from ground truth; emit edge events."""
        truth = rt.truth
        # gamma module: working source visible iff the braid is out of the tank
        if truth.braid is SourcePosition.RETRACTED:
            gamma_now = sensors.sensor_triggered(
                sensors.default_source(Isotope.DU_SHIELD, self.sensor_cfg),
                self.sensor_cfg.sense_distance_m,
                self.sensor_cfg,
            )
        else:
            gamma_now = sensors.sensor_triggered(
                self.source, self.sensor_cfg.sense_distance_m, self.sensor_cfg
            )
        if gamma_now and not truth.gamma_on:
            self.push(t_ms, ("device_event", rt.snapshot.device_id, DeviceEvent.gamma(t_ms)))
        truth.gamma_on = gamma_now
        # keyed switches through their servo circuits
        first = sensors.servo_read(truth.braid is SourcePosition.RETRACTED, truth.fault_first)
        second = sensors.servo_read(truth.posture is DetectorPosture.ON_GROUND, truth.fault_second)
        if first is not truth.level_first:
            truth.level_first = first
            self.push(t_ms, ("device_event", rt.snapshot.device_id,
                             DeviceEvent.switch_changed(t_ms, SwitchId.FIRST, first)))
        if second is not truth.level_second:
            truth.level_second = second
            self.push(t_ms, ("device_event", rt.snapshot.device_id,
                             DeviceEvent.switch_changed(t_ms, SwitchId.SECOND, second)))
        # braid lock mechanism tracks the braid
        new_lock = sensors.lock_transition(truth.lock, truth.braid)
        if new_lock is LockState.ENGAGED_BLOCKING and truth.lock is not LockState.ENGAGED_BLOCKING:
            self.push(t_ms, ("device_event", rt.snapshot.device_id, DeviceEvent.lock_engaged(t_ms)))
        truth.lock = new_lock

    # --- device event processing ---

    def handle_device_event(self, device_id: int, event: DeviceEvent) -> None:
        rt = self.devices[device_id]
        self._refresh_battery(rt)
        old_mode = rt.snapshot.mode
        new_mode, actions = hazard.step(old_mode, event, rt.snapshot, self.device_config)
        rt.snapshot = hazard.apply_event(rt.snapshot, event, new_mode, actions)
        t_ms = event.t_ms
        # MCU runs whenever the device is not dormant
        if old_mode.state is Mode.DORMANT and new_mode.state is not Mode.DORMANT:
            self._component_on(rt, Component.MCU, t_ms)
        elif old_mode.state is not Mode.DORMANT and new_mode.state is Mode.DORMANT:
            self._component_off(rt, Component.MCU, t_ms)
        for action in actions:
            self.execute(rt, action, t_ms)

    def execute(self, rt: _DeviceRuntime, action, t_ms: int) -> None:
        kind = action.kind
        if kind is ActionKind.POWER_ON:
            if action.component in (Component.GPS, Component.SIREN_LIGHT):
                self._component_on(rt, action.component, t_ms)
        elif kind is ActionKind.POWER_OFF:
            if action.component in (Component.GPS, Component.SIREN_LIGHT):
                self._component_off(rt, action.component, t_ms)
        elif kind is ActionKind.SOUND_ALARM:
            if rt.local_alarm_at_s is None:
                rt.local_alarm_at_s = t_ms / 1000.0
        elif kind is ActionKind.REQUEST_FIX:
            rt.fix_count += 1
            seed = _derived_seed(self.sc.seed, rt.snapshot.device_id, 1, rt.fix_count)
            fix, _line = nmea.simulate_fix(
                rt.lat_e7, rt.lon_e7, self.sc.fix_sigma_m, seed,
                utc_s_of_day=(t_ms / 1000.0) % 86_400.0,
            )
            self.push(t_ms + round(self.sc.fix_delay_s * 1000),
                      ("fix_ready", rt.snapshot.device_id, fix))
        elif kind is ActionKind.SEND_UPLINK:
            self.transmit_frame(rt, action.frame, t_ms)
        # SLEEP needs no executor work: the mode change already closed the MCU interval

    def transmit_frame(self, rt: _DeviceRuntime, frame: radio.UplinkFrame, t_ms: int) -> None:
        rt.tx_count += 1
        rt.frames_sent += 1
        seed = _derived_seed(self.sc.seed, rt.snapshot.device_id, 2, rt.tx_count)
        outcome = radio.transmit(frame, self.channel_for(rt, t_ms), self.policy, seed)
        self._radio_burst(rt, t_ms, outcome.attempts * self.policy.airtime_ms)
        if outcome.delivered:
            rt.frames_delivered += 1
            wire_hex = radio.encode_frame(frame).hex()
            self.push(t_ms + outcome.latency_ms,
                      ("uplink_delivery", rt.snapshot.device_id, wire_hex))
        else:
            rt.frames_failed += 1

    def handle_uplink_delivery(self, device_id: int, wire_hex: str, t_ms: int) -> None:
        rt = self.devices[device_id]
        events = self.gw.ingest_frame(wire_hex, t_ms / 1000.0)
        self.platform_events.extend(events)
        for entry in events:
            if entry["kind"] == "alarm_opened" and rt.platform_alarm_at_s is None:
                rt.platform_alarm_at_s = t_ms / 1000.0
        # the uplink was a contact window: queued downlink commands flow back
        self.push(t_ms + round(self.sc.downlink_rtt_s * 1000), ("command_check", device_id))

    def handle_command_check(self, device_id: int, t_ms: int) -> None:
        tickets = self.gw.fetch_pending(device_id, t_ms / 1000.0)
        for ticket in tickets:
            command = radio.DownlinkCommand(
                device_id=device_id,
                cmd=radio.CommandKind[ticket["cmd"].upper()],
                nonce=ticket["nonce"],
            )
            decoded = radio.decode_command(radio.encode_command(command))
            self.push(t_ms, ("device_event", device_id, DeviceEvent.downlink(t_ms, decoded)))

    def handle_tick(self, t_ms: int) -> None:
        for device_id in sorted(self.devices):
            self.push(t_ms, ("device_event", device_id, DeviceEvent.tick(t_ms)))
        if self.sc.offline_scan_period_s > 0:
            period_ms = round(self.sc.offline_scan_period_s * 1000)
            if t_ms % period_ms == 0:
                events = self.gw.scan(
                    t_ms / 1000.0, self.sc.heartbeat_period_s, 3
                )
                self.platform_events.extend(events)

    # --- main loop ---

    def run(self) -> SimResult:
        for st in self.sc.events:
            self.push(round(st.t_s * 1000), ("stimulus", st))
        tick_ms = round(self.sc.tick_interval_s * 1000)
        t = 0
        while t <= self.duration_ms:
            self.push(t, ("tick", t))
            t += tick_ms
        while self.queue:
            t_ms, _, item = heapq.heappop(self.queue)
            if t_ms > self.duration_ms:
                break
            self.now_ms = t_ms
            kind = item[0]
            if kind == "stimulus":
                self.handle_stimulus(item[1])
            elif kind == "device_event":
                self.handle_device_event(item[1], item[2])
            elif kind == "uplink_delivery":
                self.handle_uplink_delivery(item[1], item[2], t_ms)
            elif kind == "command_check":
                self.handle_command_check(item[1], t_ms)
            elif kind == "fix_ready":
                self.handle_fix_ready(item[1], item[2], t_ms)
            elif kind == "tick":
                self.handle_tick(item[1])
        self.finalize_energy()
        return self.build_result()

    def handle_fix_ready(self, device_id: int, fix: nmea.GeoFix, t_ms: int) -> None:
        rt = self.devices[device_id]
        rt.snapshot = replace(rt.snapshot, last_fix=fix)
        # position follows the alarm as its own report
        if rt.snapshot.mode.state is not Mode.DORMANT:
            self._refresh_battery(rt)
            frame = hazard.build_frame(rt.snapshot, radio.MsgType.FIX_REPORT, rt.snapshot.seq + 1)
            rt.snapshot = replace(rt.snapshot, seq=rt.snapshot.seq + 1)
            self.transmit_frame(rt, frame, t_ms)

    def finalize_energy(self) -> None:
        end = self.duration_ms
        for rt in self.devices.values():
            for component in list(rt.open_since_ms):
                self._component_off(rt, component, end)
            for component in Component:
                active_ms = rt.busy_ms.get(component, 0)
                sleep_s = max(0.0, (end - active_ms) / 1000.0)
                rt.ledger = power.accrue(rt.ledger, component, "sleep", sleep_s, self.profile)
            self._refresh_battery(rt)

    def build_result(self) -> SimResult:
        reports = []
        for device_id in sorted(self.devices):
            rt = self.devices[device_id]
            shed = rt.shed_at_s
            local = rt.local_alarm_at_s
            plat = rt.platform_alarm_at_s
            reports.append(DeviceReport(
                device_id=device_id,
                shed_at_s=shed,
                local_alarm_at_s=local,
                platform_alarm_at_s=plat,
                shed_to_local_alarm_s=(local - shed) if (shed is not None and local is not None) else None,
                shed_to_platform_alarm_s=(plat - shed) if (shed is not None and plat is not None) else None,
                frames_sent=rt.frames_sent,
                frames_delivered=rt.frames_delivered,
                frames_failed=rt.frames_failed,
                energy_mAh={c.value: rt.ledger.component_total(c) for c in Component},
                energy_total_mAh=rt.ledger.total_mAh,
                final_status=self.gw.device_status(device_id),
            ))
        report = SimReport(
            scenario_name=self.sc.name,
            seed=self.sc.seed,
            duration_s=self.sc.duration_s,
            devices=tuple(reports),
            stimulus_counts=dict(sorted(self.stimulus_counts.items())),
        )
        return SimResult(
            report=report,
            ledgers={d: rt.ledger for d, rt in self.devices.items()},
            intervals={d: rt.intervals for d, rt in self.devices.items()},
            platform_events=self.platform_events,
        )


def run(scenario: Scenario, gateway=None, profile: power.PowerProfile | None = None) -> SimResult:
    """Execute a validated scenario; identical inputs give identical results."""
    validate(scenario)
    return _Engine(
        scenario,
        gateway if gateway is not None else InProcessGateway(),
        profile or power.default_profile(),
    ).run()
