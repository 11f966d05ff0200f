"""Minimal JSON client for the platform API (stdlib urllib only)."""

from __future__ import annotations

import json
import urllib.error
import urllib.request


class ApiError(Exception):
    def __init__(self, status: int, error_type: str, message: str):
        super().__init__(f"{status} {error_type}: {message}")
        self.status = status
        self.error_type = error_type
        self.message = message


class PlatformClient:
    def __init__(self, base_url: str, timeout_s: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s

    def _request(self, method: str, path: str, body: dict | None = None) -> dict:
        data = json.dumps(body).encode() if body is not None else None
        req = urllib.request.Request(
            self.base_url + path,
            data=data,
            method=method,
            headers={"Content-Type": "application/json"} if data else {},
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                return json.loads(resp.read())
        except urllib.error.HTTPError as exc:
            try:
                err = json.loads(exc.read())["error"]
            except Exception:
                raise ApiError(exc.code, "HttpError", str(exc)) from exc
            raise ApiError(exc.code, err.get("type", "?"), err.get("message", "")) from exc

    def get(self, path: str) -> dict:
        return self._request("GET", path)

    def post(self, path: str, body: dict) -> dict:
        return self._request("POST", path, body)

    # convenience wrappers mirroring the endpoints

    def devices(self) -> dict:
        return self.get("/devices")

    def device(self, device_id: int) -> dict:
        return self.get(f"/devices/{device_id}")

    def events(self, since: int = 0, device_id: int | None = None) -> dict:
        if device_id is None:
            return self.get(f"/events?since={since}")
        return self.get(f"/devices/{device_id}/events?since={since}")

    def alarms(self, state: str | None = None) -> dict:
        return self.get("/alarms" + (f"?state={state}" if state else ""))

    def ingest(self, frame_hex: str, received_at_s: float) -> dict:
        return self.post("/ingest", {"frame_hex": frame_hex, "received_at_s": received_at_s})

    def scan(self, now_s: float) -> dict:
        return self.post("/scan", {"now_s": now_s})

    def enqueue_command(self, device_id: int, cmd: str, operator: str, now_s: float | None = None) -> dict:
        body = {"cmd": cmd, "operator": operator}
        if now_s is not None:
            body["now_s"] = now_s
        return self.post(f"/devices/{device_id}/commands", body)

    def fetch_pending(self, device_id: int, now_s: float | None = None) -> dict:
        body = {"now_s": now_s} if now_s is not None else {}
        return self.post(f"/devices/{device_id}/commands/fetch", body)

    def ack_alarm(self, alarm_id: int, operator: str, close: bool = False, now_s: float | None = None) -> dict:
        body = {"operator": operator, "close": close}
        if now_s is not None:
            body["now_s"] = now_s
        return self.post(f"/alarms/{alarm_id}/ack", body)
