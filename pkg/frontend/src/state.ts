// Pure dashboard state: everything shown is reconstructible from the
// timeline entries the gateway handed us, in gateway sequence order,
// regardless of how pushes and polls interleave.

import { FLAG_PUMP_ON, isTelemetryBody, TelemetryBody, TimelineEntry } from './types.js';

export interface DeviceReading extends TelemetryBody {
  entrySeq: number;
  ts: number;
}

export interface DashboardState {
  entries: TimelineEntry[]; // newest first, strictly decreasing seq
  lastSeq: number;
  unreadNotifications: number;
  latest: Map<number, DeviceReading>;
}

export function emptyState(): DashboardState {
  return { entries: [], lastSeq: 0, unreadNotifications: 0, latest: new Map() };
}

const MAX_ENTRIES = 500;

/** Merge incoming entries (any order, duplicates allowed) into the state. */
export function applyEntries(state: DashboardState, incoming: TimelineEntry[]): DashboardState {
  const seen = new Set(state.entries.map((e) => e.seq));
  const fresh = incoming.filter((e) => !seen.has(e.seq));
  if (fresh.length === 0) return state;

  const entries = [...state.entries, ...fresh]
    .sort((a, b) => b.seq - a.seq)
    .slice(0, MAX_ENTRIES);

  const latest = new Map(state.latest);
  for (const entry of fresh) {
    if (entry.kind !== 'telemetry' || !isTelemetryBody(entry.body)) continue;
    const current = latest.get(entry.device);
    if (current === undefined || entry.seq > current.entrySeq) {
      latest.set(entry.device, { ...entry.body, entrySeq: entry.seq, ts: entry.ts });
    }
  }

  const unread = fresh.filter((e) => e.kind === 'notification').length;
  return {
    entries,
    lastSeq: Math.max(state.lastSeq, ...fresh.map((e) => e.seq)),
    unreadNotifications: state.unreadNotifications + unread,
    latest,
  };
}

export function markNotificationsRead(state: DashboardState): DashboardState {
  if (state.unreadNotifications === 0) return state;
  return { ...state, unreadNotifications: 0 };
}

// --- pump override round trip -------------------------------------------

export interface PendingOverride {
  deviceId: number;
  mode: 'AUTO' | 'FORCE_ON' | 'FORCE_OFF';
  sentAtMs: number;
}

export type OverrideOutcome = 'confirmed' | 'pending' | 'mismatch';

/**
 * Judge a pending override against one incoming entry. Telemetry from the
 * device confirms when its pump flag matches the requested mode (AUTO is
 * confirmed by any telemetry). A non-matching flag after timeoutMs means
 * the device did not follow: surface a warning.
 */
export function checkOverride(
  pending: PendingOverride,
  entry: TimelineEntry,
  nowMs: number,
  timeoutMs: number,
): OverrideOutcome {
  if (entry.kind !== 'telemetry' || entry.device !== pending.deviceId
      || !isTelemetryBody(entry.body)) {
    return 'pending';
  }
  const pumpOn = (entry.body.flags & FLAG_PUMP_ON) !== 0;
  const matches =
    pending.mode === 'AUTO'
    || (pending.mode === 'FORCE_ON' && pumpOn)
    || (pending.mode === 'FORCE_OFF' && !pumpOn);
  if (matches) return 'confirmed';
  return nowMs - pending.sentAtMs > timeoutMs ? 'mismatch' : 'pending';
}
