// Thin fetch wrapper over the platform JSON API.
// `fetchFn` is injectable so tests can run against a scripted transport.

import type {
  AlarmsResponse,
  ApiErrorBody,
  DevicesResponse,
  EventsResponse,
} from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly errorType: string,
    message: string,
  ) {
    super(message);
  }
}

export class PlatformApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    const body = await resp.json();
    if (!resp.ok) {
      const err = (body as ApiErrorBody).error ?? { type: 'HttpError', message: `${resp.status}` };
      throw new ApiError(resp.status, err.type, err.message);
    }
    return body as T;
  }

  devices(): Promise<DevicesResponse> {
    return this.request('/devices');
  }

  alarms(): Promise<AlarmsResponse> {
    return this.request('/alarms');
  }

  events(since: number): Promise<EventsResponse> {
    return this.request(`/events?since=${since}`);
  }

  ackAlarm(alarmId: number, operator: string, close = false): Promise<unknown> {
    return this.request(`/alarms/${alarmId}/ack`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ operator, close }),
    });
  }

  sendCommand(deviceId: number, cmd: string, operator: string): Promise<unknown> {
    return this.request(`/devices/${deviceId}/commands`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ cmd, operator }),
    });
  }
}
