"""Command-line entry point.

* ``vitalwire serve``  — run the monitoring service with its HTTP API
* ``vitalwire pdu``    — encode/decode SMS frames from the shell
* ``vitalwire demo``   — scripted patient scenario on pure virtual time
"""

from __future__ import annotations

import argparse
import signal
import sys
import threading

from .pdu_codec import PduError, build_submit_pdu, cmgs_length, parse_submit_pdu, pdu_text
from .sensor_sim import ScenarioStep, load_scenario
from .service_api import (
    ConfigError,
    VitalService,
    default_config,
    load_config,
    parse_config,
)

DEMO_SCENARIO = [
    # steady vitals, then a 3.5-minute fever spike on bed 1 at the 28 min mark
    ScenarioStep(at_s=0, bed_no=1, temp_c=36.3, bpm=74),
    ScenarioStep(at_s=0, bed_no=2, temp_c=36.9, bpm=80),
    ScenarioStep(at_s=1680, bed_no=1, temp_c=39.8, bpm=74),
    ScenarioStep(at_s=1890, bed_no=1, temp_c=36.3, bpm=74),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vitalwire",
        description="Patient-vitals monitoring with SMS notification over a GSM modem.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the monitoring service")
    serve.add_argument("--config", metavar="FILE", help="JSON config (default: built-in two-bed setup)")
    serve.add_argument("--time-scale", type=float, metavar="N", help="virtual seconds per real second")
    serve.add_argument("--serial", metavar="PATH", help="drive a real modem on this serial device")
    serve.add_argument("--listen", metavar="HOST:PORT", help="override the API listen address")
    serve.add_argument("--store", metavar="DIR", help="override the persistence directory")
    serve.add_argument("--console-dir", metavar="DIR", help="also serve the operator console from DIR")

    pdu = sub.add_parser("pdu", help="SMS frame tools")
    pdu_sub = pdu.add_subparsers(dest="pdu_command", required=True)
    enc = pdu_sub.add_parser("encode", help="build a frame from number and text")
    enc.add_argument("number", help="destination phone number (digits)")
    enc.add_argument("text", help="message body (7-bit characters, up to 160)")
    dec = pdu_sub.add_parser("decode", help="parse a frame back to number and text")
    dec.add_argument("hex", help="frame as hex digits")

    demo = sub.add_parser("demo", help="run a scripted scenario and print the SMS journal")
    demo.add_argument("--scenario", metavar="FILE", help="scenario file: time_offset_s, bed, temp_C, bpm")
    demo.add_argument("--duration", type=float, default=3600.0, metavar="S", help="virtual seconds to run")
    demo.add_argument("--store", metavar="DIR", help="persistence directory (default: temporary)")
    return parser


def cmd_serve(args) -> int:
    overrides = {}
    try:
        config = load_config(args.config) if args.config else default_config()
        if args.time_scale is not None:
            overrides["time_scale"] = args.time_scale
        if args.listen is not None:
            overrides["listen_addr"] = args.listen
        if args.store is not None:
            overrides["store_path"] = args.store
        if args.serial is not None:
            overrides["modem"] = {"kind": "serial", "path": args.serial}
        if overrides:
            merged = config_to_dict(config)
            merged.update(overrides)
            config = parse_config(merged)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    from .httpd import serve_http

    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    signal.signal(signal.SIGTERM, lambda *_: stop.set())

    service = VitalService(config)
    service.start()
    server = serve_http(service, config.listen_host, config.listen_port, args.console_dir)
    host, port = server.server_address[:2]
    print(f"listening on http://{host}:{port} (time scale {config.time_scale}x)", flush=True)
    print(f"store: {config.store_path}; modem: {config.modem.kind}", flush=True)
    stop.wait()
    print("shutting down", flush=True)
    server.shutdown()
    service.stop()
    return 0


def config_to_dict(config) -> dict:
    from .service_api import patient_to_dict

    beds = []
    for patient in config.patients:
        entry = patient_to_dict(patient)
        bed_input = config.initial_inputs.get(patient.bed_no)
        if bed_input is not None:
            entry["initial"] = {"temp_c": bed_input.temp_c, "bpm": bed_input.bpm}
        beds.append(entry)
    return {
        "beds": beds,
        "listen_addr": f"{config.listen_host}:{config.listen_port}",
        "time_scale": config.time_scale,
        "store_path": config.store_path,
        "scan_period_s": config.scan_period_s,
        "modem": {"kind": config.modem.kind, "path": config.modem.path, "baud": config.modem.baud},
    }


def cmd_pdu(args) -> int:
    try:
        if args.pdu_command == "encode":
            pdu_hex = build_submit_pdu(args.number, args.text)
            print(pdu_hex)
            print(f"AT+CMGS={cmgs_length(pdu_hex)}")
        else:
            frame = parse_submit_pdu(args.hex)
            print(f"to:   {frame.da_digits}")
            print(f"text: {pdu_text(frame)}")
    except PduError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_demo(args) -> int:
    import tempfile

    try:
        steps = load_scenario(args.scenario) if args.scenario else DEMO_SCENARIO
    except (OSError, ValueError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    store = args.store or tempfile.mkdtemp(prefix="vitalwire-demo-")
    service = VitalService(default_config(store_path=store))
    service.load_scenario_steps(steps)
    service.run_virtual(args.duration)
    entries = service.list_sms()
    for entry in entries:
        minutes = entry["at"] / 60.0
        ref = f"ref={entry['message_ref']}" if entry["status"] == "sent" else f"FAILED: {entry['reason']}"
        print(f"[{minutes:7.2f} min] {entry['kind']:7} bed={entry['bed_no']} "
              f"to={entry['doctor_msisdn']} ({ref})")
        print(f"    {entry['body']}")
    print(f"{len(entries)} message(s); journal in {store}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    if args.command == "pdu":
        return cmd_pdu(args)
    return cmd_demo(args)


if __name__ == "__main__":
    sys.exit(main())
