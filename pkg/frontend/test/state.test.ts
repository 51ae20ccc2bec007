import { describe, expect, it } from 'vitest';

import {
  applyEntries,
  checkOverride,
  emptyState,
  markNotificationsRead,
} from '../src/state.js';
import { TimelineEntry } from '../src/types.js';

function telemetry(seq: number, device = 1, flags = 0, moisture = 4000): TimelineEntry {
  return {
    seq,
    ts: seq * 1000,
    kind: 'telemetry',
    device,
    body: {
      seq,
      moisture_cpct: moisture,
      temp_cdegc: 2800,
      rh_cpct: 6500,
      battery_mv: 3700,
      solar_mv: 0,
      flags,
    },
  };
}

function notification(seq: number, device = 1): TimelineEntry {
  return { seq, ts: seq * 1000, kind: 'notification', device,
           body: { kind: 'LOW_MOISTURE', moisture_cpct: 2500 } };
}

describe('applyEntries', () => {
  it('keeps gateway sequence order for any interleaving of pushes and polls', () => {
    const all = [1, 2, 3, 4, 5, 6, 7, 8].map((n) => telemetry(n));
    // a poll backfill arriving after later pushes, plus duplicates
    let state = emptyState();
    state = applyEntries(state, [all[4]!, all[5]!]);
    state = applyEntries(state, [all[0]!, all[1]!, all[2]!, all[3]!, all[4]!]);
    state = applyEntries(state, [all[7]!]);
    state = applyEntries(state, [all[6]!, all[7]!]);
    expect(state.entries.map((e) => e.seq)).toEqual([8, 7, 6, 5, 4, 3, 2, 1]);
    expect(state.lastSeq).toBe(8);
  });

  it('drops duplicates without double counting notifications', () => {
    let state = emptyState();
    state = applyEntries(state, [notification(2)]);
    state = applyEntries(state, [notification(2)]);
    expect(state.entries).toHaveLength(1);
    expect(state.unreadNotifications).toBe(1);
  });

  it('latest per device is the newest telemetry, no smoothing', () => {
    let state = emptyState();
    state = applyEntries(state, [telemetry(3, 1, 0, 3100)]);
    state = applyEntries(state, [telemetry(1, 1, 0, 4500), telemetry(2, 2, 1, 2000)]);
    expect(state.latest.get(1)?.moisture_cpct).toBe(3100);
    expect(state.latest.get(2)?.moisture_cpct).toBe(2000);
  });

  it('badge counts notifications and resets on view', () => {
    let state = emptyState();
    state = applyEntries(state, [telemetry(1), notification(2), notification(3)]);
    expect(state.unreadNotifications).toBe(2);
    state = markNotificationsRead(state);
    expect(state.unreadNotifications).toBe(0);
    state = applyEntries(state, [notification(4)]);
    expect(state.unreadNotifications).toBe(1);
  });
});

describe('checkOverride', () => {
  const pending = { deviceId: 1, mode: 'FORCE_ON' as const, sentAtMs: 0 };

  it('confirms when telemetry shows the requested pump state', () => {
    expect(checkOverride(pending, telemetry(5, 1, 1), 1000, 90_000)).toBe('confirmed');
  });

  it('stays pending before timeout when flags do not match', () => {
    expect(checkOverride(pending, telemetry(5, 1, 0), 1000, 90_000)).toBe('pending');
  });

  it('reports mismatch after the timeout', () => {
    expect(checkOverride(pending, telemetry(5, 1, 0), 100_000, 90_000)).toBe('mismatch');
  });

  it('ignores other devices and non-telemetry entries', () => {
    expect(checkOverride(pending, telemetry(5, 2, 1), 1000, 90_000)).toBe('pending');
    expect(checkOverride(pending, notification(6), 1000, 90_000)).toBe('pending');
  });

  it('AUTO is confirmed by any telemetry from the device', () => {
    const auto = { deviceId: 1, mode: 'AUTO' as const, sentAtMs: 0 };
    expect(checkOverride(auto, telemetry(5, 1, 0), 1000, 90_000)).toBe('confirmed');
    expect(checkOverride(auto, telemetry(5, 1, 1), 1000, 90_000)).toBe('confirmed');
  });
});
