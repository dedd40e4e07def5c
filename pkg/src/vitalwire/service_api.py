"""Long-running monitoring service: config, persistence, runtime wiring.

The service owns three logical tasks:

* a scan loop advancing virtual time, refreshing the analog channels,
  acquiring every bed and running the send scheduler;
* a modem dispatch task draining an ordered queue of send requests,
  encoding each into an SMS frame and driving the modem session;
* the HTTP API (see httpd), which only ever reads snapshots or posts
  operator commands that take effect on the next scan.

Virtual time runs at ``time_scale`` times real time, so a 15-minute cadence
is observable in seconds. ``run_virtual`` bypasses the threads entirely and
advances the same scan/dispatch pipeline synchronously — that path is fully
deterministic and is what the demo and most tests use.

Persistence is two append-only JSON-lines files: patient snapshots (last
record per bed wins) and the SMS journal (one record per delivery attempt,
sent or failed).
"""

from __future__ import annotations

import json
import os
import queue
import threading
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from typing import Iterable, Mapping, Optional

from .adc_bus import AcquisitionDriver, AdcBus, VirtualAdc0809
from .gsm_modem import (
    AtSession,
    EmulatedModem,
    EmulatorTransport,
    ModemError,
    ModemTimeout,
    SerialConfig,
    SerialTransport,
)
from .monitor_core import (
    Limits,
    MonitorEngine,
    Patient,
    SendRequest,
    VitalsSample,
    classify,
)
from .pdu_codec import build_submit_pdu
from .sensor_sim import (
    AD590_MAX_C,
    AD590_MIN_C,
    HR_FULL_SCALE_BPM,
    MAX_BEDS,
    BedInput,
    ScenarioStep,
    drive_channels,
)

DEFAULT_LISTEN = "127.0.0.1:8980"
DEFAULT_STORE_PATH = "vitalwire-data"
DEFAULT_SCAN_PERIOD_S = 1.0
PATIENTS_FILE = "patients.jsonl"
JOURNAL_FILE = "sms_journal.jsonl"


class ConfigError(ValueError):
    """Service configuration that cannot be run."""


class UnknownBedError(LookupError):
    """Operation names a bed no patient occupies."""


@dataclass(frozen=True)
class ModemConfig:
    kind: str = "emulated"  # "emulated" | "serial"
    path: Optional[str] = None
    baud: int = 19200

    def __post_init__(self):
        if self.kind not in ("emulated", "serial"):
            raise ConfigError(f"modem kind must be 'emulated' or 'serial', got {self.kind!r}")
        if self.kind == "serial" and not self.path:
            raise ConfigError("serial modem requires a device path")


@dataclass(frozen=True)
class ServiceConfig:
    patients: tuple[Patient, ...]
    initial_inputs: Mapping[int, BedInput]
    listen_host: str = "127.0.0.1"
    listen_port: int = 8980
    time_scale: float = 1.0
    store_path: str = DEFAULT_STORE_PATH
    scan_period_s: float = DEFAULT_SCAN_PERIOD_S
    modem: ModemConfig = ModemConfig()

    def __post_init__(self):
        if self.time_scale <= 0:
            raise ConfigError(f"time_scale must be positive, got {self.time_scale}")
        if self.scan_period_s <= 0:
            raise ConfigError(f"scan_period_s must be positive, got {self.scan_period_s}")
        beds = [p.bed_no for p in self.patients]
        if len(beds) != len(set(beds)):
            raise ConfigError(f"duplicate bed numbers in config: {sorted(beds)}")
        if len(beds) > MAX_BEDS:
            raise ConfigError(f"at most {MAX_BEDS} beds supported, got {len(beds)}")


def patient_to_dict(p: Patient) -> dict:
    return {
        "name": p.name,
        "bed_no": p.bed_no,
        "doctor_msisdn": p.doctor_msisdn,
        "temp_limits": [p.temp_limits.low, p.temp_limits.high],
        "hr_limits": [p.hr_limits.low, p.hr_limits.high],
    }


def patient_from_dict(data: Mapping) -> Patient:
    try:
        temp = data["temp_limits"]
        hr = data["hr_limits"]
        return Patient(
            name=str(data["name"]),
            bed_no=int(data["bed_no"]),
            doctor_msisdn=str(data["doctor_msisdn"]),
            temp_limits=Limits(float(temp[0]), float(temp[1])),
            hr_limits=Limits(float(hr[0]), float(hr[1])),
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise ValueError(f"patient record missing or malformed field: {exc}") from None


def parse_config(data: Mapping) -> ServiceConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("config root must be a JSON object")
    listen = str(data.get("listen_addr", DEFAULT_LISTEN))
    host, _, port_text = listen.rpartition(":")
    if not host or not port_text.isdigit():
        raise ConfigError(f"listen_addr must be host:port, got {listen!r}")
    patients = []
    initial: dict[int, BedInput] = {}
    for entry in data.get("beds", []):
        p = patient_from_dict(entry)
        patients.append(p)
        init = entry.get("initial", {})
        initial[p.bed_no] = BedInput(
            temp_c=float(init.get("temp_c", 36.3)),
            bpm=float(init.get("bpm", 74)),
        )
    modem_data = data.get("modem", {})
    modem = ModemConfig(
        kind=str(modem_data.get("kind", "emulated")),
        path=modem_data.get("path"),
        baud=int(modem_data.get("baud", 19200)),
    )
    try:
        return ServiceConfig(
            patients=tuple(patients),
            initial_inputs=initial,
            listen_host=host,
            listen_port=int(port_text),
            time_scale=float(data.get("time_scale", 1.0)),
            store_path=str(data.get("store_path", DEFAULT_STORE_PATH)),
            scan_period_s=float(data.get("scan_period_s", DEFAULT_SCAN_PERIOD_S)),
            modem=modem,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ServiceConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)


def default_config(**overrides) -> ServiceConfig:
    """Two monitored beds, emulated modem — the out-of-the-box setup."""
    base = {
        "beds": [
            {
                "name": "Ram Gopal Verma",
                "bed_no": 1,
                "doctor_msisdn": "9844120647",
                "temp_limits": [95.0, 100.0],
                "hr_limits": [60, 100],
                "initial": {"temp_c": 36.3, "bpm": 74},
            },
            {
                "name": "Kavya Nair",
                "bed_no": 2,
                "doctor_msisdn": "9880014325",
                "temp_limits": [95.0, 100.0],
                "hr_limits": [55, 110],
                "initial": {"temp_c": 36.9, "bpm": 80},
            },
        ],
    }
    base.update(overrides)
    return parse_config(base)


@dataclass(frozen=True)
class SmsJournalEntry:
    seq: int
    at: float  # virtual seconds at the send decision
    wall: str  # wall-clock ISO timestamp of the delivery attempt
    kind: str  # "routine" | "alert"
    bed_no: int
    doctor_msisdn: str
    body: str
    pdu_hex: str
    status: str  # "sent" | "failed"
    message_ref: Optional[int] = None
    reason: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps({"record": "sms", **asdict(self)}, ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: Mapping) -> "SmsJournalEntry":
        fields = {k: data[k] for k in (
            "seq", "at", "wall", "kind", "bed_no", "doctor_msisdn",
            "body", "pdu_hex", "status",
        )}
        return cls(message_ref=data.get("message_ref"), reason=data.get("reason"), **fields)


class Store:
    """Append-only JSON-lines persistence for patients and the journal."""

    def __init__(self, root: str):
        self.root = root
        os.makedirs(root, exist_ok=True)
        self._lock = threading.Lock()
        self._patients_path = os.path.join(root, PATIENTS_FILE)
        self._journal_path = os.path.join(root, JOURNAL_FILE)

    def _append(self, path: str, line: str) -> None:
        with self._lock, open(path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()

    @staticmethod
    def _read_lines(path: str) -> Iterable[dict]:
        if not os.path.exists(path):
            return []
        records = []
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                raw = raw.strip()
                if not raw:
                    continue
                try:
                    records.append(json.loads(raw))
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{lineno}: corrupt record: {exc}") from None
        return records

    def append_patient(self, patient: Patient) -> None:
        self._append(self._patients_path, json.dumps({"record": "patient", **patient_to_dict(patient)}))

    def load_patients(self) -> dict[int, Patient]:
        latest: dict[int, Patient] = {}
        for record in self._read_lines(self._patients_path):
            if record.get("record") == "patient":
                p = patient_from_dict(record)
                latest[p.bed_no] = p  # last snapshot per bed wins
        return latest

    def append_journal(self, entry: SmsJournalEntry) -> None:
        self._append(self._journal_path, entry.to_json())

    def load_journal(self) -> list[SmsJournalEntry]:
        return [
            SmsJournalEntry.from_dict(r)
            for r in self._read_lines(self._journal_path)
            if r.get("record") == "sms"
        ]


def _wall_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class VitalService:
    """Bind sensors, bus, scheduler, modem and store into one runtime."""

    def __init__(self, config: ServiceConfig, *, transport=None):
        self.config = config
        self._lock = threading.RLock()
        bus = AdcBus(adc=VirtualAdc0809())
        self.bus = bus
        self.engine = MonitorEngine(AcquisitionDriver(bus))
        self.store = Store(config.store_path)
        self.modem: Optional[EmulatedModem] = None
        if transport is not None:
            self._transport = transport
        elif config.modem.kind == "serial":
            self._transport = SerialTransport(
                config.modem.path, SerialConfig(baud_rate=config.modem.baud)
            )
        else:
            self.modem = EmulatedModem()
            self._transport = EmulatorTransport(self.modem)
        self.session = AtSession(self._transport)

        self.time_scale = config.time_scale
        self.virtual_now = 0.0
        self._initial_scan_done = False
        self._bed_inputs: dict[int, BedInput] = {}
        self._pending_injects: dict[int, BedInput] = {}
        self._scenario: list[ScenarioStep] = []
        self._scenario_pos = 0
        self._send_queue: "queue.Queue[SendRequest]" = queue.Queue()
        self._subscribers: list[queue.Queue] = []
        self._sent_count = 0
        self._failed_count = 0
        self._last_published: dict[int, tuple] = {}

        self._stop = threading.Event()
        self._scan_thread: Optional[threading.Thread] = None
        self._dispatch_thread: Optional[threading.Thread] = None

        # restart durability: persisted patients win over config; config
        # seeds only beds the store has never seen
        for patient in self.store.load_patients().values():
            self.engine.upsert_patient(patient)
        for patient in config.patients:
            if patient.bed_no not in self.engine.patients:
                self.engine.upsert_patient(patient)
                self.store.append_patient(patient)
        for bed_no, bed_input in config.initial_inputs.items():
            if bed_no in self.engine.patients:
                self._bed_inputs[bed_no] = bed_input
        for bed_no in self.engine.patients:
            self._bed_inputs.setdefault(bed_no, BedInput(36.3, 74))

        existing = self.store.load_journal()
        self._next_seq = max((e.seq for e in existing), default=0) + 1
        self._journal_cache: list[SmsJournalEntry] = existing

    # -- operator API ------------------------------------------------------

    def upsert_patient(self, data: Mapping | Patient) -> Patient:
        patient = data if isinstance(data, Patient) else patient_from_dict(data)
        with self._lock:
            stored = self.engine.upsert_patient(patient)  # BedConflictError propagates
            self._bed_inputs.setdefault(patient.bed_no, BedInput(36.3, 74))
        self.store.append_patient(stored)
        self._publish({"type": "patient", **patient_to_dict(stored)})
        return stored

    def inject_sample(self, bed_no: int, temp_c: float, bpm: float) -> dict:
        bed_no = int(bed_no)
        temp_c = float(temp_c)
        bpm = float(bpm)
        with self._lock:
            if bed_no not in self.engine.patients:
                raise UnknownBedError(f"no patient on bed {bed_no}")
            if not AD590_MIN_C <= temp_c <= AD590_MAX_C:
                raise ValueError(
                    f"temp_c {temp_c} outside sensor range [{AD590_MIN_C}, {AD590_MAX_C}]"
                )
            if not 0 <= bpm <= HR_FULL_SCALE_BPM:
                raise ValueError(f"bpm {bpm} outside sensor range [0, {HR_FULL_SCALE_BPM}]")
            self._pending_injects[bed_no] = BedInput(temp_c=temp_c, bpm=bpm)
            return {"bed_no": bed_no, "temp_c": temp_c, "bpm": bpm, "virtual_now": self.virtual_now}

    def list_patients(self) -> list[dict]:
        with self._lock:
            return [patient_to_dict(self.engine.patients[b]) for b in sorted(self.engine.patients)]

    def get_vitals(self, bed_no: int) -> Optional[dict]:
        bed_no = int(bed_no)
        with self._lock:
            if bed_no not in self.engine.patients:
                raise UnknownBedError(f"no patient on bed {bed_no}")
            sample = self.engine.last_samples.get(bed_no)
            if sample is None:
                return None
            return self._vitals_dict(sample, self.engine.patients[bed_no])

    def list_sms(self, since: Optional[int] = None) -> list[dict]:
        with self._lock:
            entries = self._journal_cache
            if since is not None:
                entries = [e for e in entries if e.seq > since]
            return [asdict(e) for e in entries]

    def health(self) -> dict:
        with self._lock:
            return {
                "status": "ok",
                "virtual_now": self.virtual_now,
                "time_scale": self.time_scale,
                "beds": len(self.engine.patients),
                "sent": self._sent_count,
                "failed": self._failed_count,
                "faults": [asdict(f) for f in self.engine.last_faults],
            }

    def load_scenario_steps(self, steps: Iterable[ScenarioStep]) -> None:
        with self._lock:
            self._scenario = sorted(steps, key=lambda s: s.at_s)
            self._scenario_pos = 0

    # -- event stream ------------------------------------------------------

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=1024)
        with self._lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def _publish(self, event: dict) -> None:
        with self._lock:
            subscribers = list(self._subscribers)
        for q in subscribers:
            try:
                q.put_nowait(event)
            except queue.Full:
                pass  # slow consumer loses events; polling covers the gap

    def snapshot(self) -> dict:
        with self._lock:
            vitals = []
            for bed_no in sorted(self.engine.patients):
                sample = self.engine.last_samples.get(bed_no)
                if sample is not None:
                    vitals.append(self._vitals_dict(sample, self.engine.patients[bed_no]))
            return {
                "type": "snapshot",
                "virtual_now": self.virtual_now,
                "patients": self.list_patients(),
                "vitals": vitals,
                "sms": [asdict(e) for e in self._journal_cache[-50:]],
            }

    def _vitals_dict(self, sample: VitalsSample, patient: Patient) -> dict:
        return {
            "bed_no": sample.bed_no,
            "temp_f": sample.temp_f,
            "hr": sample.hr,
            "at": sample.at,
            "classification": classify(sample, patient).value,
        }

    # -- scan/dispatch pipeline --------------------------------------------

    def _apply_scenario(self, now: float) -> None:
        while self._scenario_pos < len(self._scenario) and self._scenario[self._scenario_pos].at_s <= now:
            step = self._scenario[self._scenario_pos]
            self._scenario_pos += 1
            if step.bed_no in self.engine.patients:
                self._bed_inputs[step.bed_no] = BedInput(temp_c=step.temp_c, bpm=step.bpm)

    def _step_scan(self, now: float) -> None:
        with self._lock:
            self.virtual_now = now
            self._apply_scenario(now)
            self._bed_inputs.update(self._pending_injects)
            self._pending_injects.clear()
            by_index = {
                self.engine.patients[bed_no].bed_index: self._bed_inputs[bed_no]
                for bed_no in self.engine.patients
            }
            drive_channels(self.bus.adc, by_index)
            requests = self.engine.scan_cycle(now)
            changed = []
            for bed_no in sorted(self.engine.patients):
                sample = self.engine.last_samples.get(bed_no)
                if sample is None:
                    continue
                key = (sample.temp_f, sample.hr)
                if self._last_published.get(bed_no) != key:
                    self._last_published[bed_no] = key
                    changed.append(self._vitals_dict(sample, self.engine.patients[bed_no]))
        for vit in changed:
            self._publish({"type": "vitals", **vit})
        for request in requests:
            self._send_queue.put(request)

    def _dispatch_one(self, request: SendRequest) -> SmsJournalEntry:
        pdu_hex = build_submit_pdu(request.patient.doctor_msisdn, request.text)
        status, message_ref, reason = "sent", None, None
        try:
            outcome = self.session.send_sms(pdu_hex)
            message_ref = outcome.message_ref
        except (ModemError, ModemTimeout) as exc:
            status, reason = "failed", str(exc)
            with self._lock:
                self.engine.rollback_send(request)
        with self._lock:
            entry = SmsJournalEntry(
                seq=self._next_seq,
                at=request.at,
                wall=_wall_now(),
                kind=request.kind.value,
                bed_no=request.patient.bed_no,
                doctor_msisdn=request.patient.doctor_msisdn,
                body=request.text,
                pdu_hex=pdu_hex,
                status=status,
                message_ref=message_ref,
                reason=reason,
            )
            self._next_seq += 1
            self._journal_cache.append(entry)
            if status == "sent":
                self._sent_count += 1
            else:
                self._failed_count += 1
        self.store.append_journal(entry)
        self._publish({"type": "sms", **asdict(entry)})
        return entry

    def _drain_queue(self) -> None:
        while True:
            try:
                request = self._send_queue.get_nowait()
            except queue.Empty:
                return
            try:
                self._dispatch_one(request)
            finally:
                self._send_queue.task_done()

    # -- synchronous (fully virtual) execution ------------------------------

    def run_virtual(self, seconds: float) -> None:
        """Advance the pipeline ``seconds`` of virtual time with no threads
        and no sleeping; sends dispatch inline. Deterministic."""
        period = self.config.scan_period_s
        if not self._initial_scan_done:
            self._initial_scan_done = True
            self._step_scan(self.virtual_now)
            self._drain_queue()
        end = self.virtual_now + seconds
        while self.virtual_now + period <= end + 1e-9:
            self._step_scan(self.virtual_now + period)
            self._drain_queue()

    # -- threaded execution --------------------------------------------------

    def start(self, until_virtual: Optional[float] = None) -> None:
        if self._scan_thread is not None:
            raise RuntimeError("service already started")
        self._scan_thread = threading.Thread(
            target=self._scan_loop, args=(until_virtual,), name="vitalwire-scan", daemon=True
        )
        self._dispatch_thread = threading.Thread(
            target=self._dispatch_loop, name="vitalwire-dispatch", daemon=True
        )
        self._scan_thread.start()
        self._dispatch_thread.start()

    def _scan_loop(self, until_virtual: Optional[float]) -> None:
        period = self.config.scan_period_s
        start_real = time.monotonic()
        start_virtual = self.virtual_now
        if not self._initial_scan_done:
            self._initial_scan_done = True
            self._step_scan(start_virtual)
        k = 1
        while not self._stop.is_set():
            target = start_virtual + k * period
            if until_virtual is not None and target > until_virtual + 1e-9:
                return
            deadline = start_real + (target - start_virtual) / self.time_scale
            delay = deadline - time.monotonic()
            if delay > 0:
                if self._stop.wait(min(delay, 0.2)):
                    return
                if time.monotonic() < deadline:
                    continue
            self._step_scan(target)
            k += 1

    def _dispatch_loop(self) -> None:
        while True:
            try:
                request = self._send_queue.get(timeout=0.05)
            except queue.Empty:
                if self._stop.is_set() and (
                    self._scan_thread is None or not self._scan_thread.is_alive()
                ):
                    return
                if (
                    self._scan_thread is not None
                    and not self._scan_thread.is_alive()
                    and self._send_queue.empty()
                ):
                    return
                continue
            try:
                self._dispatch_one(request)
            finally:
                self._send_queue.task_done()

    def join(self, timeout: Optional[float] = None) -> None:
        """Wait for a bounded run (started with ``until_virtual``) to finish
        scanning and for every queued send to be journaled."""
        if self._scan_thread is not None:
            self._scan_thread.join(timeout)
        self._send_queue.join()
        self._stop.set()
        if self._dispatch_thread is not None:
            self._dispatch_thread.join(timeout)

    def stop(self) -> None:
        self._stop.set()
        if self._scan_thread is not None:
            self._scan_thread.join(2.0)
        if self._dispatch_thread is not None:
            self._dispatch_thread.join(2.0)
        close = getattr(self._transport, "close", None)
        if close is not None:
            close()

    @property
    def stopped(self) -> bool:
        return self._stop.is_set()
