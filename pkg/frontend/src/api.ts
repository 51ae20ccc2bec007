// Thin typed client for the gateway HTTP API.

import { DeviceConfig, DeviceSummary, LatestTelemetry, OverrideMode, TimelineEntry } from './types.js';

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (typeof body.detail === 'string') detail = body.detail;
    } catch {
      /* keep statusText */
    }
    throw new ApiError(response.status, detail);
  }
  return response.json() as Promise<T>;
}

export class GatewayClient {
  constructor(private readonly base: string = '') {}

  devices(): Promise<DeviceSummary[]> {
    return request(`${this.base}/devices`);
  }

  latest(deviceId: number): Promise<LatestTelemetry> {
    return request(`${this.base}/devices/${deviceId}/latest`);
  }

  config(deviceId: number): Promise<DeviceConfig> {
    return request(`${this.base}/devices/${deviceId}/config`);
  }

  async timeline(deviceId: number, since: number, kinds?: string[]): Promise<TimelineEntry[]> {
    const params = new URLSearchParams({ since: String(since) });
    if (kinds !== undefined && kinds.length > 0) params.set('kinds', kinds.join(','));
    const body = await request<{ entries: TimelineEntry[] }>(
      `${this.base}/devices/${deviceId}/timeline?${params}`,
    );
    return body.entries;
  }

  putThresholds(deviceId: number, lowCpct: number, highCpct: number): Promise<{ status: string; config: DeviceConfig }> {
    return request(`${this.base}/devices/${deviceId}/config`, {
      method: 'PUT',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ low_cpct: lowCpct, high_cpct: highCpct }),
    });
  }

  sendOverride(deviceId: number, mode: OverrideMode): Promise<{ status: string }> {
    return request(`${this.base}/devices/${deviceId}/command`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ cmd: 'pump_override', mode }),
    });
  }
}
