"""Live demo: platform server plus one wall-clock simulated device.

Brings up the HTTP API and a device thread that heartbeats, answers
pages, and (optionally) sheds its source after a delay, so the operator
console has something real to show. Wall-clock pacing lives only here;
the scenario simulator stays on its logical clock.
"""

from __future__ import annotations

import argparse
import threading
import time
from dataclasses import replace

from . import hazard, radio
from .hazard import DeviceConfig, DeviceEvent, DeviceSnapshot, Mode, SwitchId
from .monitor.client import PlatformClient
from .monitor.server import PlatformService, make_server
from .nmea import FixQuality, GeoFix
from .sensors import SwitchLevel


class DemoDevice:
    def __init__(
        self,
        client: PlatformClient,
        device_id: int,
        heartbeat_s: float,
        paging_s: float,
        shed_after_s: float | None,
        position: tuple[int, int] = (398800000, 1164100000),
    ):
        self.client = client
        self.config = DeviceConfig(
            inactivity_timeout_ms=round(30 * 1000),
            heartbeat_period_ms=round(heartbeat_s * 1000),
        )
        self.snapshot = DeviceSnapshot(
            device_id=device_id,
            last_heartbeat_ms=-self.config.heartbeat_period_ms,  # announce on boot
        )
        self.paging_s = paging_s
        self.shed_after_s = shed_after_s
        self.position = position
        self.started = time.monotonic()
        self.stop = threading.Event()
        self._shed_done = False
        self._last_page = 0.0

    def _now_ms(self) -> int:
        return round((time.monotonic() - self.started) * 1000)

    def _feed(self, event: DeviceEvent) -> None:
        was_dormant = self.snapshot.mode.state is Mode.DORMANT
        mode, actions = hazard.step(self.snapshot.mode, event, self.snapshot, self.config)
        self.snapshot = hazard.apply_event(self.snapshot, event, mode, actions)
        fix_requested = False
        for action in actions:
            if action.kind is hazard.ActionKind.SEND_UPLINK:
                self._send(action.frame)
            elif action.kind is hazard.ActionKind.REQUEST_FIX:
                fix_requested = True
                fix = GeoFix(self.position[0], self.position[1], FixQuality.GPS, 8, 9,
                             time.time() % 86_400)
                self.snapshot = replace(self.snapshot, last_fix=fix)
        if fix_requested:
            self._send_typed(radio.MsgType.FIX_REPORT, event.t_ms, heartbeat=False)
        if was_dormant and self.snapshot.mode.state is not Mode.DORMANT:
            # waking is a network contact: announce immediately
            self._send_typed(radio.MsgType.HEARTBEAT, event.t_ms, heartbeat=True)

    def _send_typed(self, msg_type: radio.MsgType, t_ms: int, heartbeat: bool) -> None:
        frame = hazard.build_frame(self.snapshot, msg_type, self.snapshot.seq + 1)
        changes = {"seq": self.snapshot.seq + 1}
        if heartbeat:
            changes["last_heartbeat_ms"] = t_ms
        self.snapshot = replace(self.snapshot, **changes)
        self._send(frame)

    def _send(self, frame: radio.UplinkFrame) -> None:
        try:
            self.client.ingest(radio.encode_frame(frame).hex(), time.time())
        except Exception:
            pass  # demo device shrugs at transient API errors

    def _poll_commands(self, t_ms: int) -> None:
        try:
            commands = self.client.fetch_pending(self.snapshot.device_id)["commands"]
        except Exception:
            return
        for ticket in commands:
            command = radio.DownlinkCommand(
                device_id=self.snapshot.device_id,
                cmd=radio.CommandKind[ticket["cmd"].upper()],
                nonce=ticket["nonce"],
            )
            self._feed(DeviceEvent.downlink(t_ms, command))

    def run(self) -> None:
        while not self.stop.wait(0.1):
            t_ms = self._now_ms()
            elapsed_s = t_ms / 1000.0
            if (
                self.shed_after_s is not None
                and not self._shed_done
                and elapsed_s >= self.shed_after_s
            ):
                self._shed_done = True
                self._feed(DeviceEvent.gamma(t_ms))
                self._feed(DeviceEvent.switch_changed(t_ms, SwitchId.FIRST, SwitchLevel.LOW))
                self._feed(DeviceEvent.lock_engaged(t_ms))
                self._feed(DeviceEvent.switch_changed(t_ms, SwitchId.SECOND, SwitchLevel.LOW))
            if elapsed_s - self._last_page >= self.paging_s:
                self._last_page = elapsed_s
                self._poll_commands(t_ms)
            self._feed(DeviceEvent.tick(t_ms))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Run a live platform + demo device")
    parser.add_argument("--bind", default="127.0.0.1:0")
    parser.add_argument("--device-id", type=int, default=1001)
    parser.add_argument("--heartbeat-s", type=float, default=5.0)
    parser.add_argument("--paging-s", type=float, default=1.0)
    parser.add_argument("--shed-after-s", type=float, default=None,
                        help="trigger a shed incident this many seconds in")
    parser.add_argument("--offline-after-s", type=float, default=None,
                        help="mark devices offline after this much silence (default 3 heartbeats)")
    parser.add_argument("--duration-s", type=float, default=0.0, help="0 runs until interrupted")
    args = parser.parse_args(argv)

    host, _, port_text = args.bind.partition(":")
    service = PlatformService.open_dir(None)
    server = make_server(service, host or "127.0.0.1", int(port_text or 0))
    base_url = f"http://{server.server_address[0]}:{server.server_address[1]}"
    print(f"listening on {base_url}", flush=True)

    threading.Thread(target=lambda: server.serve_forever(poll_interval=0.05), daemon=True).start()

    scan_period = args.offline_after_s or args.heartbeat_s * 3

    def scanner():
        client = PlatformClient(base_url)
        while not device.stop.wait(1.0):
            try:
                client.post("/scan", {
                    "now_s": time.time(),
                    "heartbeat_period_s": scan_period / 3.0,
                    "missed_k": 3,
                })
            except Exception:
                pass

    device = DemoDevice(
        PlatformClient(base_url),
        args.device_id,
        heartbeat_s=args.heartbeat_s,
        paging_s=args.paging_s,
        shed_after_s=args.shed_after_s,
    )
    threading.Thread(target=scanner, daemon=True).start()
    worker = threading.Thread(target=device.run, daemon=True)
    worker.start()
    try:
        if args.duration_s > 0:
            time.sleep(args.duration_s)
        else:
            while True:
                time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        device.stop.set()
        server.shutdown()
        server.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
