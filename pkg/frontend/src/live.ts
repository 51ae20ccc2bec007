// Live timeline subscription: server-sent events first, polling the
// timeline endpoint with exponential backoff when the stream drops,
// and periodic attempts to get back on the stream.

import { TimelineEntry } from './types.js';

export type ConnectionState = 'live' | 'polling' | 'offline';

export interface EventSourceLike {
  onopen: ((ev: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  close(): void;
}

export interface LiveFeedOptions {
  openEventSource?: (url: string) => EventSourceLike;
  fetchSince?: (since: number) => Promise<TimelineEntry[]>;
  pollIntervalMs?: number;
  maxBackoffMs?: number;
  sseRetryMs?: number;
}

export class LiveFeed {
  private source: EventSourceLike | null = null;
  private live = false; // stream confirmed open; polls pause only then
  private pollTimer: ReturnType<typeof setTimeout> | null = null;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private backoffMs: number;
  private stopped = false;

  private readonly openEventSource: (url: string) => EventSourceLike;
  private readonly fetchSince: (since: number) => Promise<TimelineEntry[]>;
  private readonly pollIntervalMs: number;
  private readonly maxBackoffMs: number;
  private readonly sseRetryMs: number;

  constructor(
    private readonly getSince: () => number,
    private readonly onEntries: (entries: TimelineEntry[]) => void,
    private readonly onState: (state: ConnectionState) => void,
    options: LiveFeedOptions = {},
  ) {
    this.openEventSource = options.openEventSource
      ?? ((url) => new EventSource(url) as unknown as EventSourceLike);
    this.fetchSince = options.fetchSince ?? (async () => []);
    this.pollIntervalMs = options.pollIntervalMs ?? 2000;
    this.maxBackoffMs = options.maxBackoffMs ?? 30_000;
    this.sseRetryMs = options.sseRetryMs ?? 10_000;
    this.backoffMs = this.pollIntervalMs;
  }

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    this.source?.close();
    this.source = null;
    if (this.pollTimer !== null) clearTimeout(this.pollTimer);
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.pollTimer = null;
    this.retryTimer = null;
  }

  private connect(): void {
    if (this.stopped) return;
    const source = this.openEventSource('/events');
    this.source = source;
    source.onopen = () => {
      this.live = true;
      this.stopPolling();
      this.backoffMs = this.pollIntervalMs;
      this.onState('live');
    };
    source.onmessage = (event) => {
      this.live = true;
      this.onState('live');
      try {
        this.onEntries([JSON.parse(event.data) as TimelineEntry]);
      } catch {
        /* skip unparseable frames */
      }
    };
    source.onerror = () => {
      source.close();
      this.live = false;
      if (this.source === source) this.source = null;
      this.beginPolling();
      this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped || this.retryTimer !== null) return;
    this.retryTimer = setTimeout(() => {
      this.retryTimer = null;
      this.connect();
    }, this.sseRetryMs);
  }

  private beginPolling(): void {
    if (this.stopped || this.pollTimer !== null) return;
    this.onState('polling');
    const poll = async () => {
      this.pollTimer = null;
      if (this.stopped || this.live) return;
      try {
        const entries = await this.fetchSince(this.getSince());
        if (entries.length > 0) this.onEntries(entries);
        this.backoffMs = this.pollIntervalMs;
        if (!this.live) this.onState('polling');
      } catch {
        this.backoffMs = Math.min(this.backoffMs * 2, this.maxBackoffMs);
        this.onState('offline');
      }
      if (!this.stopped && !this.live) {
        this.pollTimer = setTimeout(poll, this.backoffMs);
      }
    };
    this.pollTimer = setTimeout(poll, this.pollIntervalMs);
  }

  private stopPolling(): void {
    if (this.pollTimer !== null) {
      clearTimeout(this.pollTimer);
      this.pollTimer = null;
    }
  }
}
