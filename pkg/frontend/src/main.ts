// Dashboard entry point: device picker, live gauges, notification
// timeline, pump override and threshold editor, all driven by the
// gateway HTTP API plus its event stream.

import { ApiError, GatewayClient } from './api.js';
import { formatClock, formatHumidity, formatMoisture, formatTemp, formatVolts, timeAgo } from './format.js';
import { createGauge } from './gauge.js';
import { ConnectionState, LiveFeed } from './live.js';
import {
  applyEntries,
  checkOverride,
  DashboardState,
  emptyState,
  markNotificationsRead,
  PendingOverride,
} from './state.js';
import { DeviceSummary, FLAG_CHARGING, FLAG_LOW_LATCH, FLAG_PUMP_ON, OverrideMode, TimelineEntry } from './types.js';
import { validateThresholds } from './validate.js';

const OVERRIDE_TIMEOUT_MS = 90_000;

const api = new GatewayClient('');
let state: DashboardState = emptyState();
let devices: DeviceSummary[] = [];
let selectedDevice: number | null = null;
let pendingOverride: PendingOverride | null = null;

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (found === null) throw new Error(`missing #${id}`);
  return found as T;
}

const banner = element<HTMLDivElement>('banner');
const devicePicker = element<HTMLSelectElement>('device-picker');
const deviceMeta = element<HTMLDivElement>('device-meta');
const gaugeRow = element<HTMLDivElement>('gauges');
const statusChips = element<HTMLDivElement>('status-chips');
const timelineList = element<HTMLUListElement>('timeline');
const badge = element<HTMLSpanElement>('badge');
const timelineHeader = element<HTMLDivElement>('timeline-header');
const overrideButtons = Array.from(
  document.querySelectorAll<HTMLButtonElement>('#override-buttons button'),
);
const overrideStatus = element<HTMLSpanElement>('override-status');
const thresholdForm = element<HTMLFormElement>('threshold-form');
const lowInput = element<HTMLInputElement>('low-input');
const highInput = element<HTMLInputElement>('high-input');
const formError = element<HTMLDivElement>('form-error');

const moistureGauge = createGauge('Soil moisture', 0, 100, (v) => formatMoisture(v * 100));
const tempGauge = createGauge('Temperature', 0, 50, (v) => formatTemp(v * 100));
const humidityGauge = createGauge('Humidity', 20, 90, (v) => formatHumidity(v * 100));
gaugeRow.append(moistureGauge.element, tempGauge.element, humidityGauge.element);

function setConnection(connection: ConnectionState): void {
  banner.dataset['state'] = connection;
  banner.textContent = connection === 'live'
    ? ''
    : connection === 'polling'
      ? 'live stream lost; polling the gateway'
      : 'gateway unreachable; retrying';
}

function onEntries(entries: TimelineEntry[]): void {
  state = applyEntries(state, entries);
  if (pendingOverride !== null) {
    for (const entry of entries) {
      const outcome = checkOverride(pendingOverride, entry, Date.now(), OVERRIDE_TIMEOUT_MS);
      if (outcome === 'confirmed') {
        pendingOverride = null;
        overrideStatus.textContent = 'confirmed';
        overrideStatus.className = 'ok';
        break;
      }
      if (outcome === 'mismatch') {
        pendingOverride = null;
        overrideStatus.textContent = 'device did not confirm the override';
        overrideStatus.className = 'warn';
        break;
      }
    }
  }
  render();
}

function render(): void {
  badge.textContent = state.unreadNotifications > 0 ? String(state.unreadNotifications) : '';
  badge.hidden = state.unreadNotifications === 0;

  const reading = selectedDevice !== null ? state.latest.get(selectedDevice) : undefined;
  if (reading !== undefined) {
    moistureGauge.update(reading.moisture_cpct / 100);
    tempGauge.update(reading.temp_cdegc / 100);
    humidityGauge.update(reading.rh_cpct / 100);
    const pump = (reading.flags & FLAG_PUMP_ON) !== 0;
    const charging = (reading.flags & FLAG_CHARGING) !== 0;
    const latch = (reading.flags & FLAG_LOW_LATCH) !== 0;
    statusChips.innerHTML = '';
    statusChips.append(
      chip(pump ? 'PUMP ON' : 'PUMP OFF', pump ? 'on' : 'off'),
      chip(`battery ${formatVolts(reading.battery_mv)}`, charging ? 'on' : ''),
      chip(charging ? 'charging' : `solar ${formatVolts(reading.solar_mv)}`, ''),
      ...(latch ? [chip('LOW MOISTURE', 'warn')] : []),
    );
    deviceMeta.textContent = `seq ${reading.seq} · ${timeAgo(reading.ts, Date.now())}`;
  } else {
    moistureGauge.update(null);
    tempGauge.update(null);
    humidityGauge.update(null);
    statusChips.innerHTML = '';
    deviceMeta.textContent = 'no telemetry yet';
  }

  timelineList.innerHTML = '';
  for (const entry of state.entries.slice(0, 50)) {
    if (selectedDevice !== null && entry.device !== selectedDevice) continue;
    const item = document.createElement('li');
    item.className = `entry entry-${entry.kind}`;
    item.textContent = `${formatClock(entry.ts)}  ${describe(entry)}`;
    timelineList.append(item);
  }
}

function chip(text: string, variant: string): HTMLSpanElement {
  const span = document.createElement('span');
  span.className = `chip ${variant}`;
  span.textContent = text;
  return span;
}

function describe(entry: TimelineEntry): string {
  const body = entry.body;
  switch (entry.kind) {
    case 'telemetry':
      return `telemetry: moisture ${formatMoisture(body['moisture_cpct'] as number)}, `
        + `temp ${formatTemp(body['temp_cdegc'] as number)}, `
        + `pump ${((body['flags'] as number) & FLAG_PUMP_ON) !== 0 ? 'on' : 'off'}`;
    case 'notification':
      return `low moisture alert at ${formatMoisture(body['moisture_cpct'] as number)}`;
    case 'command':
      return body['cmd'] === 1
        ? `thresholds set to ${formatMoisture(body['low_cpct'] as number)} / `
          + `${formatMoisture(body['high_cpct'] as number)} (${body['status']})`
        : `pump override ${['AUTO', 'FORCE_ON', 'FORCE_OFF'][body['mode'] as number]} (${body['status']})`;
  }
}

async function selectDevice(deviceId: number): Promise<void> {
  selectedDevice = deviceId;
  state = emptyState();
  pendingOverride = null;
  overrideStatus.textContent = '';
  const config = await api.config(deviceId);
  lowInput.value = String(config.low_threshold / 100);
  highInput.value = String(config.high_threshold / 100);
  moistureGauge.setMarker(config.low_threshold / 100);
  markOverrideButtons(config.override);
  const backlog = await api.timeline(deviceId, 0);
  onEntries(backlog);
}

function markOverrideButtons(mode: OverrideMode): void {
  for (const button of overrideButtons) {
    button.classList.toggle('active', button.dataset['mode'] === mode);
  }
}

async function refreshDevices(): Promise<void> {
  devices = await api.devices();
  devicePicker.innerHTML = '';
  for (const device of devices) {
    const option = document.createElement('option');
    option.value = String(device.device_id);
    option.textContent = `device ${device.device_id}${device.online ? '' : ' (offline)'}`;
    devicePicker.append(option);
  }
  if (selectedDevice === null && devices.length > 0) {
    const first = devices[0]!;
    devicePicker.value = String(first.device_id);
    await selectDevice(first.device_id);
  }
}

devicePicker.addEventListener('change', () => {
  void selectDevice(Number(devicePicker.value));
});

timelineHeader.addEventListener('click', () => {
  state = markNotificationsRead(state);
  render();
});

for (const button of overrideButtons) {
  button.addEventListener('click', () => {
    const mode = button.dataset['mode'] as OverrideMode;
    if (selectedDevice === null || pendingOverride !== null) return;
    pendingOverride = { deviceId: selectedDevice, mode, sentAtMs: Date.now() };
    overrideStatus.textContent = 'pending…';
    overrideStatus.className = '';
    api.sendOverride(selectedDevice, mode).then(() => {
      markOverrideButtons(mode);
      if (mode === 'AUTO') {
        // nothing to confirm via flags; cleared on next telemetry
      }
    }).catch((error: unknown) => {
      pendingOverride = null;
      overrideStatus.textContent = error instanceof ApiError
        ? `rejected: ${error.message}`
        : 'request failed';
      overrideStatus.className = 'warn';
    });
  });
}

thresholdForm.addEventListener('submit', (event) => {
  event.preventDefault();
  if (selectedDevice === null) return;
  const low = Math.round(Number(lowInput.value) * 100);
  const high = Math.round(Number(highInput.value) * 100);
  const problem = validateThresholds(low, high);
  if (problem !== null) {
    formError.textContent = problem;
    return;
  }
  formError.textContent = '';
  api.putThresholds(selectedDevice, low, high).then((result) => {
    moistureGauge.setMarker(result.config.low_threshold / 100);
    formError.textContent = `saved (${result.status})`;
  }).catch((error: unknown) => {
    formError.textContent = error instanceof ApiError
      ? `rejected: ${error.message}`
      : 'request failed';
  });
});

const feed = new LiveFeed(
  () => state.lastSeq,
  onEntries,
  setConnection,
  {
    fetchSince: async (since) => selectedDevice === null
      ? []
      : api.timeline(selectedDevice, since),
  },
);

void refreshDevices().then(() => feed.start());
setInterval(() => { void refreshDevices(); }, 15_000);
setInterval(render, 5_000); // keep "time ago" fresh
