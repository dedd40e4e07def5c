"""Per-patient vitals classification and SMS send scheduling.

The scheduler runs on seconds of virtual time. Two message kinds exist:

* Routine — patient in range; sent at startup and then on a 15-minute
  grid, except that a routine falling within 5 minutes of *any* earlier
  send is skipped outright (next chance at the following grid point).
* Alert — patient out of range; sent the moment the condition is entered
  and again every 60 s while it persists. Alerts are never suppressed.

Values equal to a configured limit are in range: the limits bound the
acceptable band inclusively.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional

from .adc_bus import AcquisitionDriver, EocTimeout, code_to_heart_rate, code_to_temperature
from .pdu_codec import MessageTooLongError, ensure_gsm7_text, ensure_msisdn

ROUTINE_PERIOD_S = 15 * 60
SUPPRESS_WINDOW_S = 5 * 60
ALERT_REPEAT_S = 60
TEMP_CHANNEL_OFFSET = 0
HR_CHANNEL_OFFSET = 1

ROUTINE_TEMPLATE = (
    "***The patient {name} of bed no.: {bed} has temperature {temp} "
    "deg Fahrenheit & Heart rate {hr}***"
)
ALERT_TEMPLATE = (
    "ALERT, the patient {name} of bed no.: {bed} has temperature {temp} "
    "deg Fahrenheit & Heart rate {hr}"
)


class Classification(enum.Enum):
    NORMAL = "normal"
    ALERT = "alert"


class SendKind(enum.Enum):
    ROUTINE = "routine"
    ALERT = "alert"


@dataclass(frozen=True)
class Limits:
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"limits must satisfy low < high, got [{self.low}, {self.high}]")

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high


@dataclass(frozen=True)
class Patient:
    name: str
    bed_no: int
    doctor_msisdn: str
    temp_limits: Limits
    hr_limits: Limits

    def __post_init__(self):
        if not self.name:
            raise ValueError("patient name must be non-empty")
        if self.bed_no < 1:
            raise ValueError(f"bed_no must be >= 1, got {self.bed_no}")
        ensure_msisdn(self.doctor_msisdn)

    @property
    def bed_index(self) -> int:
        return self.bed_no - 1


@dataclass(frozen=True)
class VitalsSample:
    bed_no: int
    temp_f: float
    hr: int
    at: float  # virtual seconds


@dataclass(frozen=True)
class AlertState:
    last_routine_at: Optional[float] = None
    last_alert_at: Optional[float] = None
    last_any_send_at: Optional[float] = None
    in_alert: bool = False


@dataclass(frozen=True)
class SendRequest:
    kind: SendKind
    patient: Patient
    sample: VitalsSample
    text: str
    at: float
    # scheduler state as it stood before this send's timestamps were
    # recorded; restoring it is how a failed send gets retried
    prior_state: AlertState


def classify(sample: VitalsSample, patient: Patient) -> Classification:
    if sample.bed_no != patient.bed_no:
        raise ValueError(f"sample for bed {sample.bed_no} classified against bed {patient.bed_no}")
    in_range = patient.temp_limits.contains(sample.temp_f) and patient.hr_limits.contains(sample.hr)
    return Classification.NORMAL if in_range else Classification.ALERT


def render_message(kind: SendKind, patient: Patient, sample: VitalsSample) -> str:
    template = ROUTINE_TEMPLATE if kind is SendKind.ROUTINE else ALERT_TEMPLATE
    text = template.format(
        name=patient.name,
        bed=patient.bed_no,
        temp=f"{sample.temp_f:.2f}",
        hr=sample.hr,
    )
    try:
        ensure_gsm7_text(text)
    except MessageTooLongError:
        raise MessageTooLongError(
            f"rendered message is {len(text)} chars (limit 160); shorten the patient name"
        ) from None
    return text


def tick(
    now: float, sample: VitalsSample, patient: Patient, state: AlertState
) -> tuple[AlertState, Optional[SendRequest]]:
    """Advance one patient's scheduler state for one fresh sample."""

    def request(kind: SendKind, prior: AlertState) -> SendRequest:
        return SendRequest(
            kind=kind,
            patient=patient,
            sample=sample,
            text=render_message(kind, patient, sample),
            at=now,
            prior_state=prior,
        )

    if classify(sample, patient) is Classification.ALERT:
        due = (
            state.last_alert_at is None
            or not state.in_alert  # newly entered: always announce
            or now - state.last_alert_at >= ALERT_REPEAT_S
        )
        current = replace(state, in_alert=True)
        if not due:
            return current, None
        sent = replace(current, last_alert_at=now, last_any_send_at=now)
        return sent, request(SendKind.ALERT, current)

    current = replace(state, in_alert=False)
    routine_due = current.last_routine_at is None or now - current.last_routine_at >= ROUTINE_PERIOD_S
    if not routine_due:
        return current, None
    suppressed = (
        current.last_any_send_at is not None and now - current.last_any_send_at < SUPPRESS_WINDOW_S
    )
    if suppressed:
        # skip, don't queue: move the grid anchor to the latest elapsed
        # 15-minute boundary (capped at the last send so the bookkeeping
        # never claims a send that didn't happen)
        if current.last_routine_at is None:
            anchor = current.last_any_send_at
        else:
            periods = math.floor((now - current.last_routine_at) / ROUTINE_PERIOD_S)
            anchor = min(
                current.last_routine_at + periods * ROUTINE_PERIOD_S,
                current.last_any_send_at,
            )
        return replace(current, last_routine_at=anchor), None
    sent = replace(current, last_routine_at=now, last_any_send_at=now)
    return sent, request(SendKind.ROUTINE, current)


@dataclass(frozen=True)
class ScanFault:
    bed_no: int
    at: float
    reason: str


class BedConflictError(ValueError):
    """A different patient already occupies the bed."""


def _max_beds() -> int:
    from .sensor_sim import MAX_BEDS

    return MAX_BEDS


class VirtualClock:
    """Seconds counter the scheduler and tests advance explicitly."""

    def __init__(self, start_s: float = 0.0):
        self._now = float(start_s)

    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("virtual time only moves forward")
        self._now += seconds


class MonitorEngine:
    """Owns patients, their scheduler state, and the acquisition scan.

    Bed numbers map to converter channels directly: bed n uses channels
    2(n-1) and 2(n-1)+1, so beds 1-4 are addressable.
    """

    def __init__(self, driver: AcquisitionDriver):
        self.driver = driver
        self.patients: dict[int, Patient] = {}
        self.states: dict[int, AlertState] = {}
        self.last_samples: dict[int, VitalsSample] = {}
        self.last_faults: list[ScanFault] = []

    def upsert_patient(self, patient: Patient) -> Patient:
        if patient.bed_no > _max_beds():
            raise ValueError(f"bed_no {patient.bed_no} exceeds the {_max_beds()}-bed channel budget")
        existing = self.patients.get(patient.bed_no)
        if existing is not None and existing.name != patient.name:
            raise BedConflictError(
                f"bed {patient.bed_no} is occupied by {existing.name!r}; discharge before assigning {patient.name!r}"
            )
        self.patients[patient.bed_no] = patient
        self.states.setdefault(patient.bed_no, AlertState())
        return patient

    def remove_patient(self, bed_no: int) -> None:
        self.patients.pop(bed_no, None)
        self.states.pop(bed_no, None)
        self.last_samples.pop(bed_no, None)

    def acquire_sample(self, patient: Patient, now: float) -> VitalsSample:
        base = 2 * patient.bed_index
        temp_code = self.driver.acquire(base + TEMP_CHANNEL_OFFSET)
        hr_code = self.driver.acquire(base + HR_CHANNEL_OFFSET)
        return VitalsSample(
            bed_no=patient.bed_no,
            temp_f=code_to_temperature(temp_code, self.driver.vref),
            hr=code_to_heart_rate(hr_code),
            at=now,
        )

    def scan_cycle(self, now: float) -> list[SendRequest]:
        """One pass over all beds in bed order; a wedged bed is recorded as
        a fault and skipped without disturbing the others."""
        requests: list[SendRequest] = []
        faults: list[ScanFault] = []
        for bed_no in sorted(self.patients):
            patient = self.patients[bed_no]
            try:
                sample = self.acquire_sample(patient, now)
            except EocTimeout as exc:
                faults.append(ScanFault(bed_no=bed_no, at=now, reason=str(exc)))
                continue
            self.last_samples[bed_no] = sample
            new_state, send = tick(now, sample, patient, self.states[bed_no])
            self.states[bed_no] = new_state
            if send is not None:
                requests.append(send)
        self.last_faults = faults
        return requests

    def rollback_send(self, request: SendRequest) -> None:
        """Undo a send's timestamp bookkeeping after delivery failed, so
        the next cycle retries. Condition tracking (in_alert) keeps its
        current value — the patient's state didn't un-happen."""
        bed_no = request.patient.bed_no
        state = self.states.get(bed_no)
        if state is None:
            return
        self.states[bed_no] = replace(request.prior_state, in_alert=state.in_alert)
