// HTTP client for the service API, plus the live feed: server-sent events
// when the environment has EventSource, straight polling when it does not
// (and as the automatic fallback while a dropped stream reconnects).

import type { FeedEvent, FeedStatus, PatientWire, SmsEntry, Vitals } from './model.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function asJson(response: Response): Promise<any> {
  const text = await response.text();
  let data: any = null;
  try {
    data = text ? JSON.parse(text) : null;
  } catch {
    /* non-JSON error body; fall through with the raw text */
  }
  if (!response.ok) {
    throw new ApiError(response.status, data?.error ?? text ?? `HTTP ${response.status}`);
  }
  return data;
}

export class ApiClient {
  constructor(readonly base: string = '') {}

  private url(path: string): string {
    return this.base + path;
  }

  async health(): Promise<{ status: string; virtual_now: number; beds: number }> {
    return asJson(await fetch(this.url('/health')));
  }

  async listPatients(): Promise<PatientWire[]> {
    const data = await asJson(await fetch(this.url('/patients')));
    return data.patients;
  }

  async getVitals(bedNo: number): Promise<Vitals | null> {
    const data = await asJson(await fetch(this.url(`/vitals/${bedNo}`)));
    return data.vitals;
  }

  async listSms(since?: number): Promise<{ entries: SmsEntry[]; next_since: number }> {
    const query = since === undefined ? '' : `?since=${since}`;
    return asJson(await fetch(this.url(`/sms${query}`)));
  }

  async upsertPatient(patient: PatientWire): Promise<PatientWire> {
    const data = await asJson(
      await fetch(this.url('/patients'), {
        method: 'PUT',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(patient),
      }),
    );
    return data.patient;
  }

  async inject(bedNo: number, tempC: number, bpm: number): Promise<{ virtual_now: number }> {
    return asJson(
      await fetch(this.url('/inject'), {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ bed_no: bedNo, temp_c: tempC, bpm }),
      }),
    );
  }
}

export interface LiveFeedOptions {
  onEvent: (event: FeedEvent) => void;
  onStatus?: (status: FeedStatus) => void;
  pollIntervalMs?: number;
  maxBackoffMs?: number;
}

const EVENT_KINDS = ['snapshot', 'vitals', 'sms', 'patient'] as const;

export class LiveFeed {
  private source: EventSource | null = null;
  private pollTimer: ReturnType<typeof setTimeout> | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private backoffMs = 500;
  private smsCursor = 0;
  private running = false;
  private status: FeedStatus = 'connecting';

  constructor(
    private readonly client: ApiClient,
    private readonly options: LiveFeedOptions,
  ) {}

  start(): void {
    if (this.running) return;
    this.running = true;
    if (typeof EventSource === 'undefined') {
      this.setStatus('polling');
      this.schedulePoll(0);
    } else {
      this.connect();
    }
  }

  stop(): void {
    this.running = false;
    this.source?.close();
    this.source = null;
    if (this.pollTimer !== null) clearTimeout(this.pollTimer);
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.pollTimer = null;
    this.reconnectTimer = null;
  }

  get currentStatus(): FeedStatus {
    return this.status;
  }

  private setStatus(status: FeedStatus): void {
    if (status !== this.status) {
      this.status = status;
      this.options.onStatus?.(status);
    }
  }

  private connect(): void {
    const source = new EventSource(this.client.base + '/events');
    this.source = source;
    for (const kind of EVENT_KINDS) {
      source.addEventListener(kind, (raw) => {
        this.backoffMs = 500; // healthy traffic resets the retry clock
        this.setStatus('live');
        this.dispatch(JSON.parse((raw as MessageEvent).data));
      });
    }
    source.onopen = () => this.setStatus('live');
    source.onerror = () => {
      source.close();
      if (this.source === source) this.source = null;
      if (!this.running) return;
      this.setStatus('reconnecting');
      // keep data moving over plain GETs while the stream is down
      this.pollOnce().catch(() => {});
      this.reconnectTimer = setTimeout(() => this.connect(), this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, this.options.maxBackoffMs ?? 10_000);
    };
  }

  private dispatch(event: FeedEvent): void {
    if (event.type === 'snapshot') {
      this.smsCursor = event.sms.length ? event.sms[event.sms.length - 1].seq : this.smsCursor;
    } else if (event.type === 'sms') {
      this.smsCursor = Math.max(this.smsCursor, event.seq);
    }
    this.options.onEvent(event);
  }

  private schedulePoll(delayMs: number): void {
    if (!this.running) return;
    this.pollTimer = setTimeout(() => {
      this.pollOnce()
        .catch(() => this.setStatus('reconnecting'))
        .finally(() => this.schedulePoll(this.options.pollIntervalMs ?? 500));
    }, delayMs);
  }

  /** One polling sweep, synthesizing the same events the stream would emit. */
  async pollOnce(): Promise<void> {
    const patients = await this.client.listPatients();
    for (const patient of patients) {
      this.dispatch({ type: 'patient', ...patient });
    }
    for (const patient of patients) {
      const vitals = await this.client.getVitals(patient.bed_no);
      if (vitals !== null) {
        this.dispatch({ type: 'vitals', ...vitals });
      }
    }
    const { entries } = await this.client.listSms(this.smsCursor);
    for (const entry of entries) {
      this.dispatch({ type: 'sms', ...entry });
    }
    if (typeof EventSource === 'undefined') {
      this.setStatus('polling'); // no stream to wait for: polling is the live view
    }
  }
}
