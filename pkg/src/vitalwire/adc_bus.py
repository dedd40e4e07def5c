"""Bit-accurate emulation of a printer-port ADC front end, plus its driver.

An 8-channel, 8-bit ADC hangs off the standard parallel port through a quad
2x1 multiplexer, because the port only has five input lines:

* data bits D1-D3 drive the ADC channel address (C on D1 as the MSB, A on D3
  as the LSB), D4 drives the shorted ALE/SOC line;
* status bit S3 senses EOC; S4-S7 carry one nibble of the conversion result,
  with the mux's 1Y output passing through an external hex inverter so that
  the port's hardware inversion of bit 7 cancels out;
* control bit C0 (hardware inverted) drives the mux select: a HIGH line
  level selects the lower nibble, LOW the upper.

Time is virtual: a nanosecond counter advanced explicitly by the driver, so
every handshake (address setup, ALE/SOC pulse, EOC polling) is deterministic
and the recorded timing log can be checked against the device minimums.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

DEFAULT_VREF = 5.0
DEFAULT_BASE_ADDRESS = 0x378
ADDRESS_SETUP_NS = 50
SOC_PULSE_NS = 2_500
DEFAULT_CONVERSION_DELAY_US = 100.0
DEFAULT_EOC_TIMEOUT_US = 10_000.0
DEFAULT_POLL_INTERVAL_US = 10.0

FULL_SCALE_CODE = 255
TEMP_GAIN_V_PER_C = 0.1
HEART_RATE_FULL_SCALE_BPM = 200


class EocTimeout(RuntimeError):
    """EOC never rose within the virtual-time budget; the device is wedged."""


@dataclass(frozen=True)
class WireMap:
    """Fixed wiring between port bits, the ADC and the multiplexer.

    ``s7_external_inverter`` models the hex inverter in front of status bit 7
    that cancels the port's own inversion of that bit.
    """

    adc_addr_a: int = 3  # data bit carrying address A (LSB)
    adc_addr_b: int = 2
    adc_addr_c: int = 1  # data bit carrying address C (MSB)
    ale_soc: int = 4
    eoc_status_bit: int = 3
    mux_1y_status_bit: int = 7
    mux_2y_status_bit: int = 6
    mux_3y_status_bit: int = 5
    mux_4y_status_bit: int = 4
    mux_select_control_bit: int = 0
    s7_external_inverter: bool = True


class PortRegisters:
    """Software-facing model of the three printer-port registers.

    Data (base+0) is write-mostly: reads return the last written byte.
    Status (base+1) is read-only with bit 7 hardware-inverted. Control
    (base+2) has bits 0, 1 and 3 hardware-inverted. Each inversion is
    applied exactly once, at this register boundary.
    """

    STATUS_INVERT_MASK = 0x80
    CONTROL_INVERT_MASK = 0x0B

    def __init__(
        self,
        base_address: int = DEFAULT_BASE_ADDRESS,
        status_invert_mask: int = STATUS_INVERT_MASK,
        control_invert_mask: int = CONTROL_INVERT_MASK,
    ):
        self.base_address = base_address
        self.status_invert_mask = status_invert_mask
        self.control_invert_mask = control_invert_mask
        self.data = 0
        self._control = 0

    def write_data(self, value: int) -> None:
        self.data = value & 0xFF

    def read_data(self) -> int:
        return self.data

    def write_status(self, value: int) -> None:
        """Status is input-only; writes land nowhere."""

    def status_from_pins(self, pin_levels: int) -> int:
        # reserved bits 0-2 read as zero; bits 3-7 carry the input pins
        return ((pin_levels & 0xF8) ^ self.status_invert_mask) & 0xF8

    def write_control(self, value: int) -> None:
        self._control = value & 0x0F

    def read_control(self) -> int:
        return self._control

    def control_pin_levels(self) -> int:
        return (self._control ^ self.control_invert_mask) & 0x0F


class ConversionState(enum.Enum):
    IDLE = "idle"
    CONVERTING = "converting"
    DONE = "done"


class VirtualAdc0809:
    """8-channel successive-approximation converter on the virtual clock.

    The address present on A/B/C is latched on the ALE rising edge; the
    falling edge of the shorted ALE/SOC line samples the selected channel
    and starts a conversion. EOC sits low while converting and rises a fixed
    delay later. Channels listed in :attr:`wedged_channels` never finish,
    which is how a hung device is simulated.
    """

    def __init__(self, vref: float = DEFAULT_VREF, conversion_delay_us: float = DEFAULT_CONVERSION_DELAY_US):
        if vref <= 0:
            raise ValueError(f"vref must be positive, got {vref}")
        self.vref = float(vref)
        self.conversion_delay_ns = int(conversion_delay_us * 1_000)
        self.channel_volts = [0.0] * 8
        self.wedged_channels: set[int] = set()
        self.latched_channel = 0
        self.state = ConversionState.IDLE
        self._address_lines = 0
        self._eoc_high = True
        self._output_code = 0
        self._pending_code = 0
        self._done_at_ns: int | None = None

    @property
    def eoc_high(self) -> bool:
        return self._eoc_high

    def output_code(self) -> int:
        """Last completed conversion; presented continuously to the mux."""
        return self._output_code

    def set_address_lines(self, address: int) -> None:
        self._address_lines = address & 0x07

    def latch_address(self) -> None:
        self.latched_channel = self._address_lines

    def start_conversion(self, now_ns: int) -> None:
        self._eoc_high = False
        self.state = ConversionState.CONVERTING
        if self.latched_channel in self.wedged_channels:
            self._done_at_ns = None
            return
        self._pending_code = quantize_volts(self.channel_volts[self.latched_channel], self.vref)
        self._done_at_ns = now_ns + self.conversion_delay_ns

    def settle(self, now_ns: int) -> int | None:
        """Complete a due conversion; returns the completion timestamp, if any."""
        if self._done_at_ns is not None and now_ns >= self._done_at_ns:
            done_at = self._done_at_ns
            self._done_at_ns = None
            self._output_code = self._pending_code
            self._eoc_high = True
            self.state = ConversionState.DONE
            return done_at
        return None


def quantize_volts(volts: float, vref: float = DEFAULT_VREF) -> int:
    """8-bit code for an input voltage: round-half-up of volts/vref*255, clamped."""
    return max(0, min(FULL_SCALE_CODE, math.floor(volts * FULL_SCALE_CODE / vref + 0.5)))


@dataclass(frozen=True)
class BusTimingEvent:
    at_ns: int
    kind: str
    detail: str = ""

    def as_line(self) -> str:
        return f"{self.at_ns} {self.kind}" + (f" {self.detail}" if self.detail else "")


class BusTimingLog:
    """Append-only record of bus edges and reads with virtual timestamps."""

    def __init__(self) -> None:
        self.events: list[BusTimingEvent] = []

    def record(self, at_ns: int, kind: str, detail: str = "") -> None:
        if self.events and at_ns < self.events[-1].at_ns:
            raise ValueError(f"timing log must be nondecreasing: {at_ns} after {self.events[-1].at_ns}")
        self.events.append(BusTimingEvent(at_ns, kind, detail))

    def dump_lines(self) -> list[str]:
        return [event.as_line() for event in self.events]

    def __len__(self) -> int:
        return len(self.events)


class AdcBus:
    """The parallel port, ADC and mux wired together over one virtual clock."""

    def __init__(
        self,
        *,
        vref: float = DEFAULT_VREF,
        conversion_delay_us: float = DEFAULT_CONVERSION_DELAY_US,
        base_address: int = DEFAULT_BASE_ADDRESS,
        wire_map: WireMap = WireMap(),
        port: PortRegisters | None = None,
        adc: VirtualAdc0809 | None = None,
    ):
        self.wire_map = wire_map
        self.port = port if port is not None else PortRegisters(base_address)
        self.adc = adc if adc is not None else VirtualAdc0809(vref, conversion_delay_us)
        self.log = BusTimingLog()
        self.now_ns = 0

    def advance(self, ns: int) -> None:
        target = self.now_ns + int(ns)
        done_at = self.adc.settle(target)
        if done_at is not None:
            self.log.record(done_at, "eoc_rise", f"code=0x{self.adc.output_code():02X}")
        self.now_ns = target

    def write_data(self, value: int) -> None:
        wm = self.wire_map
        previous = self.port.read_data()
        self.port.write_data(value)
        address = (
            ((value >> wm.adc_addr_c) & 1) << 2
            | ((value >> wm.adc_addr_b) & 1) << 1
            | ((value >> wm.adc_addr_a) & 1)
        )
        self.adc.set_address_lines(address)
        was_high = (previous >> wm.ale_soc) & 1
        is_high = (value >> wm.ale_soc) & 1
        if not was_high and is_high:
            self.adc.latch_address()
            self.log.record(self.now_ns, "ale_rise", f"channel={self.adc.latched_channel}")
            self.log.record(self.now_ns, "soc_rise")
        elif was_high and not is_high:
            self.log.record(self.now_ns, "soc_fall")
            self.adc.start_conversion(self.now_ns)
            self.log.record(self.now_ns, "eoc_fall")
        else:
            self.log.record(self.now_ns, "address_write", f"address={address}")

    def read_data(self) -> int:
        return self.port.read_data()

    def write_control(self, value: int) -> None:
        self.port.write_control(value)

    def write_status(self, value: int) -> None:
        self.port.write_status(value)

    def read_status(self) -> int:
        wm = self.wire_map
        select_high = (self.port.control_pin_levels() >> wm.mux_select_control_bit) & 1
        code = self.adc.output_code()
        nibble = code & 0x0F if select_high else (code >> 4) & 0x0F
        one_y = (nibble >> 3) & 1
        if wm.s7_external_inverter:
            one_y ^= 1
        pins = (
            one_y << wm.mux_1y_status_bit
            | ((nibble >> 2) & 1) << wm.mux_2y_status_bit
            | ((nibble >> 1) & 1) << wm.mux_3y_status_bit
            | (nibble & 1) << wm.mux_4y_status_bit
            | (1 if self.adc.eoc_high else 0) << wm.eoc_status_bit
        )
        return self.port.status_from_pins(pins)


class NibbleSelect(enum.Enum):
    LOWER = "lower"
    UPPER = "upper"


class AcquisitionDriver:
    """Implements the acquisition handshake against an :class:`AdcBus`.

    One acquisition per call: write the channel address, give it the 50 ns
    setup, pulse the shorted ALE/SOC line high for 2.5 us, poll EOC on S3,
    then read the lower and upper nibbles through the mux and combine them.
    """

    def __init__(
        self,
        bus: AdcBus,
        *,
        eoc_timeout_us: float = DEFAULT_EOC_TIMEOUT_US,
        poll_interval_us: float = DEFAULT_POLL_INTERVAL_US,
        address_setup_ns: int = ADDRESS_SETUP_NS,
        soc_pulse_ns: int = SOC_PULSE_NS,
    ):
        self.bus = bus
        self.eoc_timeout_ns = int(eoc_timeout_us * 1_000)
        self.poll_interval_ns = max(1, int(poll_interval_us * 1_000))
        self.address_setup_ns = address_setup_ns
        self.soc_pulse_ns = soc_pulse_ns

    @property
    def vref(self) -> float:
        return self.bus.adc.vref

    def acquire(self, channel: int) -> int:
        if not 0 <= channel <= 7:
            raise ValueError(f"channel must be 0-7, got {channel}")
        bus = self.bus
        wm = bus.wire_map
        address_bits = (
            ((channel >> 2) & 1) << wm.adc_addr_c
            | ((channel >> 1) & 1) << wm.adc_addr_b
            | (channel & 1) << wm.adc_addr_a
        )
        bus.write_data(address_bits)
        bus.advance(self.address_setup_ns)
        bus.write_data(address_bits | 1 << wm.ale_soc)
        bus.advance(self.soc_pulse_ns)
        bus.write_data(address_bits)
        deadline = bus.now_ns + self.eoc_timeout_ns
        while True:
            bus.advance(self.poll_interval_ns)
            status = bus.read_status()
            if (status >> wm.eoc_status_bit) & 1:
                break
            if bus.now_ns >= deadline:
                raise EocTimeout(f"channel {channel}: EOC low after {self.eoc_timeout_ns} ns")
        low = self.read_nibble(NibbleSelect.LOWER)
        high = self.read_nibble(NibbleSelect.UPPER)
        return (high << 4) | low

    def read_nibble(self, select: NibbleSelect) -> int:
        bus = self.bus
        bit = 1 << bus.wire_map.mux_select_control_bit
        # control bit is inverted on the wire: writing 0 drives the select
        # line HIGH, which is the lower-nibble position
        bus.write_control(0 if select is NibbleSelect.LOWER else bit)
        value = (bus.read_status() >> 4) & 0x0F
        bus.log.record(bus.now_ns, "nibble_read", f"{select.value}=0x{value:X}")
        return value


def _round_half_up(value: float, digits: int = 0) -> float:
    scale = 10.0**digits
    return math.floor(value * scale + 0.5) / scale


def code_to_temperature(code: int, vref: float = DEFAULT_VREF) -> float:
    """Body temperature in degrees Fahrenheit, rounded to 2 decimals.

    The sensor chain delivers 100 mV per degree Celsius into the converter,
    so full scale at 5 V reference spans 0-50 C.
    """
    celsius = (code * vref / FULL_SCALE_CODE) / TEMP_GAIN_V_PER_C
    return _round_half_up(1.8 * celsius + 32.0, 2)


def code_to_heart_rate(code: int) -> int:
    """Heart rate in bpm: linear 0-200 over the full converter scale."""
    return int(_round_half_up(code * HEART_RATE_FULL_SCALE_BPM / FULL_SCALE_CODE))
