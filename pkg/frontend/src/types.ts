// Shapes of the platform API responses the console consumes.
// The console performs no hazard logic of its own: everything rendered
// comes from these payloads.

export type DeviceStatus = 'online' | 'offline' | 'alarming';
export type AlarmState = 'open' | 'acked' | 'closed';

export interface FixRecord {
  lat_e7: number;
  lon_e7: number;
  at_s: number;
}

export interface DeviceRow {
  device_id: number;
  status: DeviceStatus;
  last_seen_s: number;
  battery_dAh: number;
  seq_high: number;
  last_fix: FixRecord | null;
}

export interface AlarmRow {
  alarm_id: number;
  device_id: number;
  opened_at_s: number;
  fix_at_open: FixRecord | null;
  state: AlarmState;
  acked_by: string | null;
}

export interface LogEvent {
  offset: number;
  timestamp_s: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface DevicesResponse {
  offset: number;
  devices: DeviceRow[];
}

export interface AlarmsResponse {
  offset: number;
  alarms: AlarmRow[];
}

export interface EventsResponse {
  offset: number;
  events: LogEvent[];
}

export interface ApiErrorBody {
  error: { type: string; message: string };
}
