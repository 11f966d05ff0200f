"""HTTP JSON API over the monitoring platform.

Single-tenant desk tool: no auth, one process, a lock serializing all
mutations through the event log. Endpoints:

    GET  /devices
    GET  /devices/{id}
    GET  /devices/{id}/events?since=N
    GET  /events?since=N                    (global feed, used by the console)
    GET  /alarms?state=open|acked|closed
    POST /devices/{id}/commands             {"cmd": "wake", "operator": "..."}
    POST /devices/{id}/commands/fetch       (network gateway only)
    POST /alarms/{id}/ack                   {"operator": "...", "close": false}
    POST /ingest                            (network gateway only; hex frame)
    POST /scan                              (gateway/cron; offline detection)

Every response carries the current log offset so clients can catch up
incrementally. Mutating bodies may carry "now_s" to run on simulated
time; it defaults to the wall clock.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .. import radio
from .core import (
    CorruptEntry,
    MonitorPlatform,
    NotOpen,
    PlatformConfig,
    UnknownAlarm,
    UnknownDevice,
    load_log,
    replay_log,
)

DATA_DIR_ENV = "SOURCEWATCH_DATA_DIR"
LOG_FILENAME = "platform-log.jsonl"


class BadRequest(ValueError):
    pass


class PlatformService:
    """Thread-safe facade; the lock is the single-writer serialization point."""

    def __init__(self, platform: MonitorPlatform):
        self.platform = platform
        self.lock = threading.Lock()

    @staticmethod
    def open_dir(data_dir: str | Path | None, config: PlatformConfig = PlatformConfig()) -> "PlatformService":
        """Build a service, replaying and appending to the data dir's log."""
        if data_dir is None:
            return PlatformService(MonitorPlatform(config))
        data_dir = Path(data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)
        log_path = data_dir / LOG_FILENAME
        entries = load_log(log_path) if log_path.exists() else []
        platform = replay_log(entries, config)
        platform._log_sink = open(log_path, "a")
        return PlatformService(platform)

    def handle(self, method: str, path: str, query: dict, body: dict) -> tuple[int, dict]:
        with self.lock:
            return self._route(method, path, query, body)

    def _route(self, method: str, path: str, query: dict, body: dict) -> tuple[int, dict]:
        p = self.platform
        now = float(body.get("now_s", time.time())) if body else time.time()

        if method == "GET":
            if path == "/devices":
                return 200, {"offset": p.offset, "devices": p.device_dicts()}
            m = re.fullmatch(r"/devices/(\d+)", path)
            if m:
                device_id = int(m.group(1))
                if device_id not in p.devices:
                    raise UnknownDevice(device_id)
                return 200, {
                    "offset": p.offset,
                    "device": p.devices[device_id].to_dict(p.status_of(device_id)),
                }
            m = re.fullmatch(r"/devices/(\d+)/events", path)
            if m:
                since = int(query.get("since", "0"))
                entries = p.entries_since(since, device_id=int(m.group(1)))
                return 200, {"offset": p.offset, "events": [e.to_dict() for e in entries]}
            if path == "/events":
                since = int(query.get("since", "0"))
                entries = p.entries_since(since)
                return 200, {"offset": p.offset, "events": [e.to_dict() for e in entries]}
            if path == "/alarms":
                state = query.get("state")
                return 200, {"offset": p.offset, "alarms": p.alarm_dicts(state)}
            return 404, {"error": {"type": "NotFound", "message": path}}

        if method == "POST":
            if path == "/ingest":
                try:
                    frame = radio.decode_frame(bytes.fromhex(body["frame_hex"]))
                except KeyError:
                    raise BadRequest("body needs frame_hex") from None
                except (ValueError, radio.RadioError) as exc:
                    raise BadRequest(f"bad frame: {exc}") from None
                received = float(body.get("received_at_s", now))
                entries = p.ingest(frame, received)
                return 200, {"offset": p.offset, "events": [e.to_dict() for e in entries]}
            if path == "/scan":
                entries = p.offline_scan(
                    now,
                    body.get("heartbeat_period_s"),
                    body.get("missed_k"),
                )
                return 200, {"offset": p.offset, "events": [e.to_dict() for e in entries]}
            m = re.fullmatch(r"/devices/(\d+)/commands", path)
            if m:
                try:
                    cmd = radio.CommandKind[body["cmd"].upper()]
                except KeyError:
                    raise BadRequest(f"unknown cmd {body.get('cmd')!r}") from None
                ticket = p.enqueue_command(
                    int(m.group(1)), cmd, body.get("operator", "anonymous"), now
                )
                return 200, {"offset": p.offset, "ticket": ticket.to_dict()}
            m = re.fullmatch(r"/devices/(\d+)/commands/fetch", path)
            if m:
                tickets = p.fetch_pending(int(m.group(1)), now)
                return 200, {"offset": p.offset, "commands": [t.to_dict() for t in tickets]}
            m = re.fullmatch(r"/alarms/(\d+)/ack", path)
            if m:
                entry = p.ack_alarm(
                    int(m.group(1)),
                    body.get("operator", "anonymous"),
                    now,
                    close=bool(body.get("close", False)),
                )
                return 200, {"offset": p.offset, "event": entry.to_dict()}
            return 404, {"error": {"type": "NotFound", "message": path}}

        return 405, {"error": {"type": "MethodNotAllowed", "message": method}}


def _error_response(exc: Exception) -> tuple[int, dict]:
    code = {
        UnknownDevice: 404,
        UnknownAlarm: 404,
        NotOpen: 409,
        BadRequest: 400,
        CorruptEntry: 500,
    }.get(type(exc), 400)
    message = str(exc.args[0]) if exc.args else str(exc)
    return code, {"error": {"type": type(exc).__name__, "message": message}}


class _Handler(BaseHTTPRequestHandler):
    service: PlatformService  # set by make_server
    disable_nagle_algorithm = True

    def _respond(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def _dispatch(self, method: str) -> None:
        path, _, query_text = self.path.partition("?")
        query = {}
        for pair in query_text.split("&"):
            if "=" in pair:
                k, _, v = pair.partition("=")
                query[k] = v
        body = {}
        length = int(self.headers.get("Content-Length") or 0)
        if length:
            try:
                body = json.loads(self.rfile.read(length))
            except ValueError:
                self._respond(*_error_response(BadRequest("body is not JSON")))
                return
        try:
            status, payload = self.service.handle(method, path, query, body)
        except Exception as exc:  # typed errors become 4xx, the rest 400
            status, payload = _error_response(exc)
        self._respond(status, payload)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def log_message(self, fmt, *args):
        pass  # keep test output clean


def make_server(service: PlatformService, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def _scan_loop(service: PlatformService, interval_s: float, stop: threading.Event) -> None:
    while not stop.wait(interval_s):
        with service.lock:
            service.platform.offline_scan(time.time())


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Run the monitoring platform API server")
    parser.add_argument("--bind", default="127.0.0.1:8700", help="host:port (port 0 picks a free one)")
    parser.add_argument(
        "--data-dir",
        default=os.environ.get(DATA_DIR_ENV),
        help=f"directory for the append-only event log (or ${DATA_DIR_ENV})",
    )
    parser.add_argument(
        "--auto-scan-s", type=float, default=0.0,
        help="run offline detection every N wall seconds (0 disables)",
    )
    parser.add_argument("--heartbeat-period-s", type=float, default=86_400.0)
    parser.add_argument("--missed-k", type=int, default=3)
    args = parser.parse_args(argv)

    host, _, port_text = args.bind.partition(":")
    config = PlatformConfig(
        heartbeat_period_s=args.heartbeat_period_s,
        missed_heartbeats_k=args.missed_k,
    )
    service = PlatformService.open_dir(args.data_dir, config)
    server = make_server(service, host or "127.0.0.1", int(port_text or 0))
    print(f"listening on http://{server.server_address[0]}:{server.server_address[1]}", flush=True)

    stop = threading.Event()
    if args.auto_scan_s > 0:
        threading.Thread(
            target=_scan_loop, args=(service, args.auto_scan_s, stop), daemon=True
        ).start()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        stop.set()
        server.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
