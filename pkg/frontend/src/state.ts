// Fleet view state: a pure fold of platform snapshots and log events.
//
// Rule one: rendered state always derives from API responses tagged
// with a log offset. A response carrying a smaller offset than what we
// already rendered marks the state stale, which forces a full resync;
// we never merge across an offset regression.

import type { AlarmRow, DeviceRow, DevicesResponse, AlarmsResponse, LogEvent } from './types.js';

export interface FleetState {
  offset: number;
  devices: Map<number, DeviceRow>;
  alarms: Map<number, AlarmRow>;
  pendingCommands: Map<number, number>; // device_id -> queued count
  needsResync: boolean;
  connectionOk: boolean;
  lastError: string | null;
}

export function emptyState(): FleetState {
  return {
    offset: 0,
    devices: new Map(),
    alarms: new Map(),
    pendingCommands: new Map(),
    needsResync: true,
    connectionOk: true,
    lastError: null,
  };
}

export function applySnapshot(
  state: FleetState,
  devices: DevicesResponse,
  alarms: AlarmsResponse,
): FleetState {
  const next = emptyState();
  // the two snapshot calls race the live log; trust the later offset and
  // let the event feed bring us from there to the present
  next.offset = Math.min(devices.offset, alarms.offset);
  next.needsResync = false;
  next.connectionOk = state.connectionOk;
  for (const row of devices.devices) next.devices.set(row.device_id, row);
  for (const row of alarms.alarms) next.alarms.set(row.alarm_id, row);
  return next;
}

function openAlarmFor(state: FleetState, deviceId: number): AlarmRow | undefined {
  for (const alarm of state.alarms.values()) {
    if (alarm.device_id === deviceId && alarm.state === 'open') return alarm;
  }
  return undefined;
}

function ensureDevice(state: FleetState, deviceId: number, seenAt: number): DeviceRow {
  let row = state.devices.get(deviceId);
  if (!row) {
    row = {
      device_id: deviceId,
      status: 'online',
      last_seen_s: seenAt,
      battery_dAh: 0,
      seq_high: -1,
      last_fix: null,
    };
    state.devices.set(deviceId, row);
  }
  return row;
}

function applyEvent(state: FleetState, event: LogEvent): void {
  const p = event.payload as Record<string, any>;
  const deviceId = p.device_id as number;
  switch (event.kind) {
    case 'frame_in': {
      const row = ensureDevice(state, deviceId, p.received_at_s);
      row.last_seen_s = p.received_at_s;
      if (!p.stale) {
        row.seq_high = p.seq;
        row.battery_dAh = p.battery_dAh;
        if (
          (p.msg_type === 'alarm' || p.msg_type === 'fix_report') &&
          (p.lat_e7 !== 0 || p.lon_e7 !== 0)
        ) {
          row.last_fix = { lat_e7: p.lat_e7, lon_e7: p.lon_e7, at_s: p.received_at_s };
        }
      }
      break;
    }
    case 'came_online': {
      const row = ensureDevice(state, deviceId, event.timestamp_s);
      row.status = openAlarmFor(state, deviceId) ? 'alarming' : 'online';
      break;
    }
    case 'went_offline': {
      const row = ensureDevice(state, deviceId, event.timestamp_s);
      row.status = openAlarmFor(state, deviceId) ? 'alarming' : 'offline';
      break;
    }
    case 'alarm_opened': {
      state.alarms.set(p.alarm_id, {
        alarm_id: p.alarm_id,
        device_id: deviceId,
        opened_at_s: event.timestamp_s,
        fix_at_open: p.fix_at_open ?? null,
        state: 'open',
        acked_by: null,
      });
      ensureDevice(state, deviceId, event.timestamp_s).status = 'alarming';
      break;
    }
    case 'alarm_acked': {
      const alarm = state.alarms.get(p.alarm_id);
      if (alarm) {
        alarm.state = 'acked';
        alarm.acked_by = p.operator ?? null;
      }
      const row = state.devices.get(deviceId);
      if (row && !openAlarmFor(state, deviceId)) {
        row.status = 'online';
      }
      break;
    }
    case 'alarm_closed': {
      const alarm = state.alarms.get(p.alarm_id);
      if (alarm) alarm.state = 'closed';
      break;
    }
    case 'command_queued': {
      state.pendingCommands.set(deviceId, (state.pendingCommands.get(deviceId) ?? 0) + 1);
      break;
    }
    case 'command_delivered': {
      const left = (state.pendingCommands.get(deviceId) ?? 1) - 1;
      if (left <= 0) state.pendingCommands.delete(deviceId);
      else state.pendingCommands.set(deviceId, left);
      break;
    }
    default:
      break; // unknown event kinds are ignored, never fatal
  }
}

export function applyEvents(state: FleetState, events: LogEvent[], newOffset: number): FleetState {
  if (newOffset < state.offset) {
    // offset regression: platform restarted or we are talking to a
    // different log; drop everything and resync rather than merge
    return { ...state, needsResync: true };
  }
  for (const event of events) {
    if (event.offset < state.offset) continue; // already rendered
    applyEvent(state, event);
  }
  state.offset = newOffset;
  return state;
}

export function deviceList(state: FleetState): DeviceRow[] {
  return [...state.devices.values()].sort((a, b) => a.device_id - b.device_id);
}

export function alarmList(state: FleetState): AlarmRow[] {
  return [...state.alarms.values()].sort((a, b) => b.alarm_id - a.alarm_id);
}
