// Shapes of the gateway API responses the dashboard consumes.

export type EntryKind = 'telemetry' | 'notification' | 'command';
export type OverrideMode = 'AUTO' | 'FORCE_ON' | 'FORCE_OFF';

export interface TimelineEntry {
  seq: number;
  ts: number;
  kind: EntryKind;
  device: number;
  body: Record<string, unknown>;
}

export interface TelemetryBody {
  seq: number;
  moisture_cpct: number;
  temp_cdegc: number;
  rh_cpct: number;
  battery_mv: number;
  solar_mv: number;
  flags: number;
}

export interface DeviceConfig {
  low_threshold: number;
  high_threshold: number;
  sample_interval_s: number;
  override: OverrideMode;
}

export interface DeviceSummary {
  device_id: number;
  first_seen_ms: number;
  online: boolean;
  last_seq: number;
  last_telemetry_ts: number | null;
  config: DeviceConfig;
}

export interface LatestTelemetry extends TelemetryBody {
  device_id: number;
  ts: number;
  pump_on: boolean;
  charging: boolean;
  low_latch: boolean;
}

export const FLAG_PUMP_ON = 0x1;
export const FLAG_CHARGING = 0x2;
export const FLAG_LOW_LATCH = 0x4;

export function isTelemetryBody(body: Record<string, unknown>): body is Record<string, unknown> & TelemetryBody {
  return typeof body['moisture_cpct'] === 'number' && typeof body['flags'] === 'number';
}
