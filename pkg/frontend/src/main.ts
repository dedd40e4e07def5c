// Console bootstrap: mounts the rendered sections, wires the live feed and
// the two mutating flows (limit edits, sample injection) to the API.

import { ApiClient, ApiError, LiveFeed } from './api.js';
import {
  applyEvent,
  beginEdit,
  confirmEdit,
  displayedPatient,
  initialState,
  patientToWire,
  revertEdit,
  validateLimits,
  type ConsoleState,
  type FeedStatus,
} from './model.js';
import {
  renderBanner,
  renderInjectControls,
  renderPatientsTable,
  renderSmsLog,
  renderVitals,
  tempReadout,
} from './view.js';

const client = new ApiClient('');
const state: ConsoleState = initialState();

const sections = {
  banner: document.getElementById('banner')!,
  patients: document.getElementById('patients')!,
  vitals: document.getElementById('vitals')!,
  sms: document.getElementById('sms')!,
  inject: document.getElementById('inject')!,
};
const rendered: Partial<Record<keyof typeof sections, string>> = {};

function mount(section: keyof typeof sections, html: string): void {
  // skip identical re-renders so in-progress form edits keep their focus
  if (rendered[section] !== html) {
    rendered[section] = html;
    sections[section].innerHTML = html;
  }
}

function render(): void {
  mount('banner', renderBanner(state.feed));
  mount('patients', renderPatientsTable(state));
  mount('vitals', renderVitals(state));
  mount('sms', renderSmsLog(state.sms));
  mount('inject', renderInjectControls(state));
}

function toast(message: string): void {
  const node = document.createElement('div');
  node.className = 'toast';
  node.textContent = message;
  document.getElementById('toasts')!.appendChild(node);
  setTimeout(() => node.remove(), 4000);
}

const feed = new LiveFeed(client, {
  onEvent: (event) => {
    applyEvent(state, event);
    render();
  },
  onStatus: (status: FeedStatus) => {
    state.feed = status;
    render();
  },
});

// -- limit editing -----------------------------------------------------------

function readNumber(row: Element, name: string): number {
  return Number((row.querySelector(`input[name="${name}"]`) as HTMLInputElement).value);
}

async function saveLimits(bedNo: number, row: Element, errorSpan: HTMLElement): Promise<void> {
  const current = displayedPatient(state, bedNo);
  if (!current) return;
  const tempLow = readNumber(row, 'temp_low');
  const tempHigh = readNumber(row, 'temp_high');
  const hrLow = readNumber(row, 'hr_low');
  const hrHigh = readNumber(row, 'hr_high');
  const problem =
    validateLimits(tempLow, tempHigh) ?? validateLimits(hrLow, hrHigh);
  if (problem !== null) {
    errorSpan.textContent = problem;
    return;
  }
  errorSpan.textContent = '';
  const edited = {
    ...current,
    temp_limits: { low: tempLow, high: tempHigh },
    hr_limits: { low: hrLow, high: hrHigh },
  };
  beginEdit(state, edited);
  render();
  try {
    const confirmed = await client.upsertPatient(patientToWire(edited));
    confirmEdit(state, confirmed);
  } catch (err) {
    revertEdit(state, bedNo);
    if (err instanceof ApiError) {
      toast(`limit update rejected: ${err.message}`);
    } else {
      toast('limit update failed: service unreachable');
    }
  }
  render();
}

sections.patients.addEventListener('click', (ev) => {
  const button = (ev.target as Element).closest('button.save-limits');
  if (!button) return;
  const bedNo = Number(button.getAttribute('data-bed'));
  const row = button.closest('tr')!;
  const errorSpan = row.querySelector('.edit-error') as HTMLElement;
  void saveLimits(bedNo, row, errorSpan);
});

// -- injection ---------------------------------------------------------------

sections.inject.addEventListener('input', (ev) => {
  const input = ev.target as HTMLInputElement;
  const fieldset = input.closest('fieldset.inject');
  if (!fieldset) return;
  if (input.name === 'temp_c') {
    fieldset.querySelector('.temp-readout')!.textContent = tempReadout(Number(input.value));
  } else if (input.name === 'bpm') {
    fieldset.querySelector('.bpm-readout')!.textContent = `${input.value} bpm`;
  }
});

sections.inject.addEventListener('click', (ev) => {
  const button = (ev.target as Element).closest('button.inject-button');
  if (!button) return;
  const fieldset = button.closest('fieldset')!;
  const bedNo = Number(button.getAttribute('data-bed'));
  const tempC = Number((fieldset.querySelector('input[name="temp_c"]') as HTMLInputElement).value);
  const bpm = Number((fieldset.querySelector('input[name="bpm"]') as HTMLInputElement).value);
  client.inject(bedNo, tempC, bpm).catch((err) => {
    toast(err instanceof ApiError ? `injection rejected: ${err.message}` : 'injection failed: service unreachable');
  });
});

render();
feed.start();
