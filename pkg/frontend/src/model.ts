// View-model for the operator console: wire types, the client-side
// classification (kept in lockstep with the server's), and a small
// reducer that folds snapshot/vitals/sms/patient events into UI state.
// Everything here is pure so it can be tested without a DOM.

export type Classification = 'normal' | 'alert';

export interface Limits {
  low: number;
  high: number;
}

export interface Patient {
  name: string;
  bed_no: number;
  doctor_msisdn: string;
  temp_limits: Limits;
  hr_limits: Limits;
}

/** Patient as it travels over the API: limits are [low, high] pairs. */
export interface PatientWire {
  name: string;
  bed_no: number;
  doctor_msisdn: string;
  temp_limits: [number, number];
  hr_limits: [number, number];
}

export interface Vitals {
  bed_no: number;
  temp_f: number;
  hr: number;
  at: number; // virtual seconds
  classification: Classification;
}

export interface SmsEntry {
  seq: number;
  at: number;
  wall: string;
  kind: 'routine' | 'alert';
  bed_no: number;
  doctor_msisdn: string;
  body: string;
  pdu_hex: string;
  status: 'sent' | 'failed';
  message_ref: number | null;
  reason: string | null;
}

export type FeedStatus = 'connecting' | 'live' | 'polling' | 'reconnecting';

export function patientFromWire(w: PatientWire): Patient {
  return {
    name: w.name,
    bed_no: w.bed_no,
    doctor_msisdn: w.doctor_msisdn,
    temp_limits: { low: w.temp_limits[0], high: w.temp_limits[1] },
    hr_limits: { low: w.hr_limits[0], high: w.hr_limits[1] },
  };
}

export function patientToWire(p: Patient): PatientWire {
  return {
    name: p.name,
    bed_no: p.bed_no,
    doctor_msisdn: p.doctor_msisdn,
    temp_limits: [p.temp_limits.low, p.temp_limits.high],
    hr_limits: [p.hr_limits.low, p.hr_limits.high],
  };
}

// Bounds are inclusive on both ends, exactly like the server: a reading
// sitting on a limit is still in range.
export function classify(sample: { temp_f: number; hr: number }, patient: Patient): Classification {
  const tempOk = patient.temp_limits.low <= sample.temp_f && sample.temp_f <= patient.temp_limits.high;
  const hrOk = patient.hr_limits.low <= sample.hr && sample.hr <= patient.hr_limits.high;
  return tempOk && hrOk ? 'normal' : 'alert';
}

export function celsiusToFahrenheit(c: number): number {
  return (c * 9) / 5 + 32;
}

export function fahrenheitToCelsius(f: number): number {
  return ((f - 32) * 5) / 9;
}

/** Client-side gate for limit edits; returns a message or null when valid. */
export function validateLimits(low: number, high: number): string | null {
  if (!Number.isFinite(low) || !Number.isFinite(high)) {
    return 'limits must be numbers';
  }
  if (low >= high) {
    return `low limit must be below high (got ${low} ≥ ${high})`;
  }
  return null;
}

// ---------------------------------------------------------------------------
// State + reducer

const SMS_LOG_CAP = 200;

export interface ConsoleState {
  /** Last server-confirmed patient per bed. */
  patients: Map<number, Patient>;
  /** Optimistic edits awaiting server confirmation, keyed by bed. */
  pendingEdits: Map<number, Patient>;
  vitals: Map<number, Vitals>;
  /** Journal rows, ascending seq, deduplicated, capped. */
  sms: SmsEntry[];
  feed: FeedStatus;
  virtualNow: number;
}

export function initialState(): ConsoleState {
  return {
    patients: new Map(),
    pendingEdits: new Map(),
    vitals: new Map(),
    sms: [],
    feed: 'connecting',
    virtualNow: 0,
  };
}

export interface SnapshotEvent {
  type: 'snapshot';
  virtual_now: number;
  patients: PatientWire[];
  vitals: Vitals[];
  sms: SmsEntry[];
}

export type VitalsEvent = Vitals & { type: 'vitals' };
export type SmsEvent = SmsEntry & { type: 'sms' };
export type PatientEvent = PatientWire & { type: 'patient' };
export type FeedEvent = SnapshotEvent | VitalsEvent | SmsEvent | PatientEvent;

/** Fold one server event into the state. Mutates and returns `state`. */
export function applyEvent(state: ConsoleState, event: FeedEvent): ConsoleState {
  switch (event.type) {
    case 'snapshot': {
      state.patients = new Map(event.patients.map((w) => [w.bed_no, patientFromWire(w)]));
      state.vitals = new Map(event.vitals.map((v) => [v.bed_no, v]));
      state.sms = [];
      for (const entry of event.sms) {
        appendSms(state, entry);
      }
      state.virtualNow = event.virtual_now;
      break;
    }
    case 'vitals': {
      state.vitals.set(event.bed_no, stripType(event));
      state.virtualNow = Math.max(state.virtualNow, event.at);
      break;
    }
    case 'sms': {
      appendSms(state, stripType(event));
      state.virtualNow = Math.max(state.virtualNow, event.at);
      break;
    }
    case 'patient': {
      state.patients.set(event.bed_no, patientFromWire(event));
      state.pendingEdits.delete(event.bed_no);
      break;
    }
  }
  return state;
}

function stripType<T extends { type: string }>(event: T): Omit<T, 'type'> {
  const { type: _ignored, ...rest } = event;
  return rest;
}

function appendSms(state: ConsoleState, entry: SmsEntry): void {
  if (state.sms.some((e) => e.seq === entry.seq)) {
    return; // polling + stream can both deliver the same row
  }
  state.sms.push(entry);
  state.sms.sort((a, b) => a.seq - b.seq);
  if (state.sms.length > SMS_LOG_CAP) {
    state.sms.splice(0, state.sms.length - SMS_LOG_CAP);
  }
}

// Optimistic edit flow: the edit shows immediately as pending; the PUT
// response (or a patient event) confirms it, an error reverts it. Rendered
// limits therefore always end at the last server-confirmed values.

export function beginEdit(state: ConsoleState, edited: Patient): void {
  state.pendingEdits.set(edited.bed_no, edited);
}

export function confirmEdit(state: ConsoleState, confirmed: PatientWire): void {
  applyEvent(state, { type: 'patient', ...confirmed });
}

export function revertEdit(state: ConsoleState, bedNo: number): void {
  state.pendingEdits.delete(bedNo);
}

/** What the patients table should show for a bed right now. */
export function displayedPatient(state: ConsoleState, bedNo: number): Patient | undefined {
  return state.pendingEdits.get(bedNo) ?? state.patients.get(bedNo);
}

export function bedNumbers(state: ConsoleState): number[] {
  return [...state.patients.keys()].sort((a, b) => a - b);
}
