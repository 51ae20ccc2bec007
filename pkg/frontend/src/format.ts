// Display formatting for wire units (centi-percent, centi-degC, mV).

export function formatMoisture(cpct: number): string {
  return `${(cpct / 100).toFixed(1)}%`;
}

export function formatTemp(cdegc: number): string {
  return `${Math.round(cdegc / 100)}°C`;
}

export function formatHumidity(cpct: number): string {
  return `${Math.round(cpct / 100)}%`;
}

export function formatVolts(mv: number): string {
  return `${(mv / 1000).toFixed(2)} V`;
}

export function formatClock(tsMs: number): string {
  return new Date(tsMs).toLocaleTimeString();
}

export function timeAgo(tsMs: number, nowMs: number): string {
  const seconds = Math.max(0, Math.round((nowMs - tsMs) / 1000));
  if (seconds < 60) return `${seconds}s ago`;
  if (seconds < 3600) return `${Math.floor(seconds / 60)}m ago`;
  if (seconds < 86400) return `${Math.floor(seconds / 3600)}h ago`;
  return `${Math.floor(seconds / 86400)}d ago`;
}
