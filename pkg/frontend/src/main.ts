// Browser glue: mounts the console, wires the poll loop and the action
// buttons. Everything interesting lives in the pure modules; this file
// only touches the DOM.

import { ApiError, PlatformApi } from './api.js';
import { Poller } from './poll.js';
import { renderApp, type RenderOptions } from './render.js';
import { emptyState } from './state.js';

const POLL_INTERVAL_MS = 2000;
const OPERATOR = localStorage.getItem('operator') ?? 'operator';

function platformUrl(): string {
  const params = new URLSearchParams(location.search);
  return params.get('platform') ?? localStorage.getItem('platform') ?? 'http://127.0.0.1:8700';
}

const api = new PlatformApi(platformUrl());
const poller = new Poller(api, emptyState());
const options: RenderOptions = { nowS: Date.now() / 1000, armedWake: null, inlineErrors: new Map() };
const root = document.getElementById('app')!;

function redraw(): void {
  options.nowS = Date.now() / 1000;
  root.innerHTML = renderApp(poller.state, options);
}

async function pollAndRender(): Promise<void> {
  await poller.tick();
  redraw();
}

async function runAction(key: string, action: () => Promise<unknown>): Promise<void> {
  options.inlineErrors.delete(key);
  try {
    await action();
  } catch (err) {
    options.inlineErrors.set(key, err instanceof ApiError ? `${err.errorType}: ${err.message}` : String(err));
  }
  await pollAndRender();
}

document.addEventListener('click', (raw) => {
  const target = raw.target as HTMLElement;
  const action = target.dataset.action;
  if (!action) return;
  const deviceId = Number(target.dataset.device ?? 'NaN');
  const alarmId = Number(target.dataset.alarm ?? 'NaN');
  switch (action) {
    case 'wake-arm':
      options.armedWake = deviceId; // two-step confirm: arm first
      redraw();
      break;
    case 'wake-confirm':
      options.armedWake = null;
      void runAction(`device-${deviceId}`, () => api.sendCommand(deviceId, 'wake', OPERATOR));
      break;
    case 'locate':
      void runAction(`device-${deviceId}`, () => api.sendCommand(deviceId, 'locate', OPERATOR));
      break;
    case 'silence':
      void runAction(`device-${deviceId}`, () => api.sendCommand(deviceId, 'silence', OPERATOR));
      break;
    case 'ack':
      void runAction(`alarm-${alarmId}`, () => api.ackAlarm(alarmId, OPERATOR));
      break;
    case 'close':
      void runAction(`alarm-${alarmId}`, () => api.ackAlarm(alarmId, OPERATOR, true));
      break;
    default:
      break;
  }
});

void pollAndRender();
setInterval(() => void pollAndRender(), POLL_INTERVAL_MS);
