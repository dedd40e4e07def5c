"""HTTP/JSON API and server-push event stream for the operator console.

Endpoints:

* ``GET  /health``        — runtime counters and fault list
* ``GET  /patients``      — configured patients with their limits
* ``PUT  /patients``      — add a patient or update limits (JSON body)
* ``GET  /vitals/{bed}``  — most recent sample for one bed
* ``POST /inject``        — steer a bed's simulated vitals
* ``GET  /sms?since=N``   — journal entries with seq > N
* ``GET  /events``        — server-sent events: snapshot, then live
  vitals/sms/patient records, with comment heartbeats

Every response carries permissive CORS headers so the console can be
served from anywhere (or from ``console_dir`` on this same port).
"""

from __future__ import annotations

import json
import mimetypes
import os
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional
from urllib.parse import parse_qs, urlsplit

from .monitor_core import BedConflictError
from .service_api import UnknownBedError, VitalService, patient_to_dict

SSE_HEARTBEAT_S = 2.0


class ApiServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, service: VitalService, console_dir: Optional[str] = None):
        super().__init__(address, ApiHandler)
        self.service = service
        self.console_dir = os.path.abspath(console_dir) if console_dir else None


class ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: ApiServer

    # -- plumbing ------------------------------------------------------------

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass  # API access logging is the operator console's business, not stderr's

    def _cors(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, PUT, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _send_json(self, status: int, payload) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self._cors()
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str) -> None:
        self._send_json(status, {"error": message})

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise ValueError("request body required")
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid JSON body: {exc}") from None
        if not isinstance(data, dict):
            raise ValueError("JSON body must be an object")
        return data

    # -- dispatch --------------------------------------------------------------

    def do_OPTIONS(self):  # noqa: N802 - stdlib naming
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):  # noqa: N802
        url = urlsplit(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if url.path == "/health":
                self._send_json(200, self.server.service.health())
            elif url.path == "/patients":
                self._send_json(200, {"patients": self.server.service.list_patients()})
            elif len(parts) == 2 and parts[0] == "vitals":
                self._get_vitals(parts[1])
            elif url.path == "/sms":
                self._get_sms(url.query)
            elif url.path == "/events":
                self._stream_events()
            elif self.server.console_dir is not None:
                self._serve_static(url.path)
            else:
                self._error(404, f"no such resource: {url.path}")
        except BrokenPipeError:
            pass

    def do_PUT(self):  # noqa: N802
        if urlsplit(self.path).path != "/patients":
            self._error(404, f"no such resource: {self.path}")
            return
        try:
            data = self._read_body()
            patient = self.server.service.upsert_patient(data)
        except BedConflictError as exc:
            self._error(409, str(exc))
        except ValueError as exc:
            self._error(400, str(exc))
        else:
            self._send_json(200, {"patient": patient_to_dict(patient)})

    def do_POST(self):  # noqa: N802
        if urlsplit(self.path).path != "/inject":
            self._error(404, f"no such resource: {self.path}")
            return
        try:
            data = self._read_body()
            ack = self.server.service.inject_sample(
                data["bed_no"], data["temp_c"], data["bpm"]
            )
        except UnknownBedError as exc:
            self._error(404, str(exc))
        except (KeyError, TypeError) as exc:
            self._error(400, f"bed_no, temp_c and bpm are required: {exc}")
        except ValueError as exc:
            self._error(400, str(exc))
        else:
            self._send_json(200, ack)

    # -- handlers ---------------------------------------------------------------

    def _get_vitals(self, bed_text: str) -> None:
        if not bed_text.isdigit():
            self._error(400, f"bed must be an integer, got {bed_text!r}")
            return
        try:
            vitals = self.server.service.get_vitals(int(bed_text))
        except UnknownBedError as exc:
            self._error(404, str(exc))
            return
        self._send_json(200, {"vitals": vitals})

    def _get_sms(self, query: str) -> None:
        params = parse_qs(query)
        since = None
        if "since" in params:
            raw = params["since"][-1]
            try:
                since = int(raw)
            except ValueError:
                self._error(400, f"since must be an integer, got {raw!r}")
                return
        entries = self.server.service.list_sms(since)
        next_since = entries[-1]["seq"] if entries else (since or 0)
        self._send_json(200, {"entries": entries, "next_since": next_since})

    def _stream_events(self) -> None:
        service = self.server.service
        subscription = service.subscribe()
        try:
            self.send_response(200)
            self._cors()
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Connection", "close")
            self.end_headers()
            self._write_event(service.snapshot())
            while not service.stopped:
                try:
                    event = subscription.get(timeout=SSE_HEARTBEAT_S)
                except queue.Empty:
                    self.wfile.write(b": ping\n\n")
                    self.wfile.flush()
                    continue
                self._write_event(event)
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            service.unsubscribe(subscription)

    def _write_event(self, event: dict) -> None:
        kind = event.get("type", "message")
        data = json.dumps(event, ensure_ascii=False)
        self.wfile.write(f"event: {kind}\ndata: {data}\n\n".encode("utf-8"))
        self.wfile.flush()

    def _serve_static(self, path: str) -> None:
        root = self.server.console_dir
        relative = path.lstrip("/") or "index.html"
        full = os.path.abspath(os.path.join(root, relative))
        if not full.startswith(root + os.sep) and full != root:
            self._error(404, "not found")
            return
        if os.path.isdir(full):
            full = os.path.join(full, "index.html")
        if not os.path.isfile(full):
            self._error(404, f"no such resource: {path}")
            return
        content_type = mimetypes.guess_type(full)[0] or "application/octet-stream"
        with open(full, "rb") as fh:
            body = fh.read()
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def serve_http(service: VitalService, host: str, port: int, console_dir: Optional[str] = None) -> ApiServer:
    """Start the API server on a daemon thread; returns the server object
    (its ``server_address`` carries the bound port when 0 was requested)."""
    server = ApiServer((host, port), service, console_dir)
    thread = threading.Thread(
        target=lambda: server.serve_forever(poll_interval=0.05),
        name="vitalwire-http",
        daemon=True,
    )
    thread.start()
    return server
