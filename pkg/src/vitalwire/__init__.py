"""Patient-vitals monitoring over emulated bedside hardware.

The package layers, bottom to top:

- ``pdu_codec``     - GSM 03.40 SMS-SUBMIT frames (7-bit packing, semi-octets)
- ``gsm_modem``     - AT command session + emulated/serial modem transports
- ``adc_bus``       - printer-port register model, ADC handshake, code math
- ``sensor_sim``    - temperature/heart-rate sensor electronics emulation
- ``monitor_core``  - threshold classification and the send scheduler
- ``service_api``   - the service: scan loop, SMS dispatch, journal, config
- ``httpd``         - thin HTTP/JSON + event-stream front end
- ``cli``           - ``vitalwire`` console entry point

Most callers only need :class:`~vitalwire.service_api.VitalService` plus a
:class:`~vitalwire.service_api.ServiceConfig`; the lower layers are importable
on their own for reuse or testing.
"""

from .monitor_core import Classification, Limits, MonitorEngine, Patient, classify
from .pdu_codec import PduError, build_submit_pdu, cmgs_length, parse_submit_pdu, pdu_text
from .service_api import ScenarioStep, ServiceConfig, VitalService, default_config, load_config

__version__ = "0.1.0"

__all__ = [
    "Classification",
    "Limits",
    "MonitorEngine",
    "Patient",
    "PduError",
    "ScenarioStep",
    "ServiceConfig",
    "VitalService",
    "build_submit_pdu",
    "classify",
    "cmgs_length",
    "default_config",
    "load_config",
    "parse_submit_pdu",
    "pdu_text",
    "__version__",
]
