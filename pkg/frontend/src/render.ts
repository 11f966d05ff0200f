// Pure string rendering: state in, HTML out. No DOM access here, which
// keeps the whole view testable in plain node.

import { alarmList, deviceList, type FleetState } from './state.js';
import type { AlarmRow, DeviceRow, FixRecord } from './types.js';

function esc(text: string): string {
  return text
    .replaceAll('&', '&amp;')
    .replaceAll('<', '&lt;')
    .replaceAll('>', '&gt;')
    .replaceAll('"', '&quot;');
}

export function formatCoord(fix: FixRecord | null): string {
  if (!fix) return 'no fix';
  const lat = (fix.lat_e7 / 1e7).toFixed(5);
  const lon = (fix.lon_e7 / 1e7).toFixed(5);
  return `${lat}, ${lon}`;
}

export function formatAge(nowS: number, thenS: number): string {
  const age = Math.max(0, nowS - thenS);
  if (age < 90) return `${Math.round(age)}s ago`;
  if (age < 5400) return `${Math.round(age / 60)}m ago`;
  if (age < 129_600) return `${Math.round(age / 3600)}h ago`;
  return `${Math.round(age / 86_400)}d ago`;
}

export function statusBadge(status: DeviceRow['status']): string {
  return `<span class="badge badge-${status}" data-testid="status-${status}">${status}</span>`;
}

export function alarmBadge(state: AlarmRow['state']): string {
  return `<span class="badge alarm-${state}" data-testid="alarm-${state}">${state}</span>`;
}

function wakeButton(deviceId: number, armed: boolean): string {
  if (armed) {
    return (
      `<button class="btn danger" data-action="wake-confirm" data-device="${deviceId}"` +
      ` data-testid="wake-confirm-${deviceId}">confirm wake?</button>`
    );
  }
  return (
    `<button class="btn" data-action="wake-arm" data-device="${deviceId}"` +
    ` data-testid="wake-arm-${deviceId}">wake</button>`
  );
}

export interface RenderOptions {
  nowS: number;
  armedWake: number | null; // device id whose Wake awaits the second click
  inlineErrors: Map<string, string>; // keyed "alarm-3" / "device-7"
}

export function renderFleet(state: FleetState, options: RenderOptions): string {
  const rows = deviceList(state)
    .map((d) => {
      const pending = state.pendingCommands.get(d.device_id) ?? 0;
      const error = options.inlineErrors.get(`device-${d.device_id}`);
      return (
        `<tr data-testid="device-${d.device_id}">` +
        `<td>${d.device_id}</td>` +
        `<td>${statusBadge(d.status)}</td>` +
        `<td>${formatAge(options.nowS, d.last_seen_s)}</td>` +
        `<td>${(d.battery_dAh / 10).toFixed(1)} Ah</td>` +
        `<td>${formatCoord(d.last_fix)}</td>` +
        `<td>${pending ? `${pending} queued` : ''}</td>` +
        `<td>${wakeButton(d.device_id, options.armedWake === d.device_id)}` +
        `<button class="btn" data-action="locate" data-device="${d.device_id}">locate</button>` +
        `<button class="btn" data-action="silence" data-device="${d.device_id}">silence</button>` +
        (error ? `<div class="inline-error" data-testid="error-device-${d.device_id}">${esc(error)}</div>` : '') +
        `</td></tr>`
      );
    })
    .join('');
  return (
    '<table class="fleet"><thead><tr>' +
    '<th>device</th><th>status</th><th>last seen</th><th>battery</th>' +
    '<th>last fix (lat, lon)</th><th>downlink</th><th>actions</th>' +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderAlarms(state: FleetState, options: RenderOptions): string {
  const rows = alarmList(state)
    .map((a) => {
      const error = options.inlineErrors.get(`alarm-${a.alarm_id}`);
      const action =
        a.state === 'open'
          ? `<button class="btn" data-action="ack" data-alarm="${a.alarm_id}" data-testid="ack-${a.alarm_id}">ack</button>`
          : a.state === 'acked'
            ? `<button class="btn" data-action="close" data-alarm="${a.alarm_id}" data-testid="close-${a.alarm_id}">close</button>`
            : '';
      return (
        `<tr data-testid="alarm-row-${a.alarm_id}">` +
        `<td>#${a.alarm_id}</td>` +
        `<td>${a.device_id}</td>` +
        `<td>${formatAge(options.nowS, a.opened_at_s)}</td>` +
        `<td>${formatCoord(a.fix_at_open)}</td>` +
        `<td>${alarmBadge(a.state)}${a.acked_by ? ` by ${esc(a.acked_by)}` : ''}</td>` +
        `<td>${action}` +
        (error ? `<div class="inline-error" data-testid="error-alarm-${a.alarm_id}">${esc(error)}</div>` : '') +
        `</td></tr>`
      );
    })
    .join('');
  return (
    '<table class="alarms"><thead><tr>' +
    '<th>alarm</th><th>device</th><th>opened</th><th>fix at open</th><th>state</th><th></th>' +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderBanner(state: FleetState): string {
  if (state.connectionOk) return '';
  const detail = state.lastError ? `: ${esc(state.lastError)}` : '';
  return `<div class="banner" data-testid="connectivity-banner">platform unreachable${detail}</div>`;
}

export function renderApp(state: FleetState, options: RenderOptions): string {
  return (
    renderBanner(state) +
    `<section><h2>alarm queue</h2>${renderAlarms(state, options)}</section>` +
    `<section><h2>fleet</h2>${renderFleet(state, options)}</section>` +
    `<footer data-testid="offset">log offset ${state.offset}</footer>`
  );
}
