// Render functions: console state in, HTML strings out. Keeping these pure
// (no document access) lets the tests assert on exactly what the operator
// sees, and main.ts stays a thin mounting layer.

import {
  bedNumbers,
  celsiusToFahrenheit,
  displayedPatient,
  type ConsoleState,
  type FeedStatus,
  type SmsEntry,
  type Vitals,
} from './model.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function minutes(virtualSeconds: number): string {
  return (virtualSeconds / 60).toFixed(1);
}

export function renderBanner(status: FeedStatus): string {
  switch (status) {
    case 'live':
      return '';
    case 'polling':
      return `<div class="banner banner-polling">Event stream unavailable — refreshing by polling.</div>`;
    case 'reconnecting':
      return `<div class="banner banner-down">Connection lost — reconnecting…</div>`;
    case 'connecting':
      return `<div class="banner banner-down">Connecting…</div>`;
  }
}

export function renderEmptyState(): string {
  return `<div class="empty-state">No beds are being monitored. Add a patient over the API to begin.</div>`;
}

export function renderPatientsTable(state: ConsoleState): string {
  const beds = bedNumbers(state);
  if (beds.length === 0) {
    return renderEmptyState();
  }
  const rows = beds
    .map((bed) => {
      const p = displayedPatient(state, bed)!;
      const pending = state.pendingEdits.has(bed) ? ' row-pending' : '';
      return `
  <tr class="patient-row${pending}" data-bed="${bed}">
    <td>${bed}</td>
    <td>${escapeHtml(p.name)}</td>
    <td>${escapeHtml(p.doctor_msisdn)}</td>
    <td><input name="temp_low" type="number" step="0.1" value="${p.temp_limits.low}"> –
        <input name="temp_high" type="number" step="0.1" value="${p.temp_limits.high}"></td>
    <td><input name="hr_low" type="number" step="1" value="${p.hr_limits.low}"> –
        <input name="hr_high" type="number" step="1" value="${p.hr_limits.high}"></td>
    <td><button class="save-limits" data-bed="${bed}">Save</button>
        <span class="edit-error" data-bed="${bed}"></span></td>
  </tr>`;
    })
    .join('');
  return `<table class="patients">
  <thead><tr><th>Bed</th><th>Patient</th><th>Doctor SMS</th><th>Temp limits (°F)</th><th>HR limits (bpm)</th><th></th></tr></thead>
  <tbody>${rows}
  </tbody>
</table>`;
}

export function renderVitals(state: ConsoleState): string {
  const beds = bedNumbers(state);
  if (beds.length === 0) {
    return renderEmptyState();
  }
  const cards = beds
    .map((bed) => {
      const patient = state.patients.get(bed);
      const vitals = state.vitals.get(bed);
      if (!vitals) {
        return `<div class="vitals-card" data-bed="${bed}">
  <h3>Bed ${bed}${patient ? ' · ' + escapeHtml(patient.name) : ''}</h3>
  <p class="no-sample">no sample yet</p>
</div>`;
      }
      return renderVitalsCard(bed, patient?.name ?? '', vitals);
    })
    .join('\n');
  return cards;
}

export function renderVitalsCard(bed: number, name: string, vitals: Vitals): string {
  const outOfRange = vitals.classification === 'alert';
  const flagClass = outOfRange ? 'flag-out' : 'flag-in';
  const flagText = outOfRange ? 'OUT OF RANGE' : 'in range';
  return `<div class="vitals-card ${outOfRange ? 'vitals-alert' : ''}" data-bed="${bed}">
  <h3>Bed ${bed}${name ? ' · ' + escapeHtml(name) : ''}</h3>
  <p class="reading">${vitals.temp_f.toFixed(2)} °F &nbsp; ${vitals.hr} bpm</p>
  <p><span class="flag ${flagClass}" data-bed="${bed}">${flagText}</span>
     <span class="sample-at">at ${minutes(vitals.at)} min</span></p>
</div>`;
}

export function renderSmsLog(entries: SmsEntry[]): string {
  if (entries.length === 0) {
    return `<div class="empty-state">No messages sent yet.</div>`;
  }
  const rows = [...entries]
    .reverse() // newest on top
    .map((e) => {
      const cls = e.kind === 'alert' ? 'sms-row alert-row' : 'sms-row';
      const outcome =
        e.status === 'sent' ? `ref ${e.message_ref}` : `FAILED: ${escapeHtml(e.reason ?? '?')}`;
      return `<tr class="${cls}" data-seq="${e.seq}">
  <td>${minutes(e.at)} min</td>
  <td><span class="kind kind-${e.kind}">${e.kind}</span></td>
  <td>${e.bed_no}</td>
  <td class="sms-body">${escapeHtml(e.body)}</td>
  <td class="sms-status">${outcome}</td>
</tr>`;
    })
    .join('\n');
  return `<table class="sms-log">
  <thead><tr><th>Time</th><th>Kind</th><th>Bed</th><th>Message</th><th>Delivery</th></tr></thead>
  <tbody>${rows}</tbody>
</table>`;
}

export function renderInjectControls(state: ConsoleState): string {
  const beds = bedNumbers(state);
  if (beds.length === 0) {
    return '';
  }
  return beds
    .map((bed) => {
      const name = state.patients.get(bed)?.name ?? '';
      return `<fieldset class="inject" data-bed="${bed}">
  <legend>Bed ${bed}${name ? ' · ' + escapeHtml(name) : ''}</legend>
  <label>Temp
    <input name="temp_c" type="range" min="30" max="43" step="0.1" value="36.3">
    <span class="temp-readout">36.3 °C = ${celsiusToFahrenheit(36.3).toFixed(2)} °F</span>
  </label>
  <label>Heart rate
    <input name="bpm" type="range" min="0" max="200" step="1" value="74">
    <span class="bpm-readout">74 bpm</span>
  </label>
  <button class="inject-button" data-bed="${bed}">Inject</button>
</fieldset>`;
    })
    .join('\n');
}

export function tempReadout(tempC: number): string {
  return `${tempC.toFixed(1)} °C = ${celsiusToFahrenheit(tempC).toFixed(2)} °F`;
}
