"""Bus-level tests for the printer-port ADC emulation.

The reference model here is independent of the implementation: expected
status bytes are rebuilt from the wiring rules (which pin carries which
nibble bit, which bits the port hardware inverts), and the converter
arithmetic is re-done with exact Fraction math.
"""

from fractions import Fraction
from math import floor

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vitalwire.adc_bus import (
    AcquisitionDriver,
    AdcBus,
    BusTimingLog,
    EocTimeout,
    NibbleSelect,
    PortRegisters,
    VirtualAdc0809,
    WireMap,
    code_to_heart_rate,
    code_to_temperature,
    quantize_volts,
)

VREF = 5.0


def expected_status(code: int, lower: bool, eoc_high: bool) -> int:
    """Status register contents rebuilt from the wiring, pin by pin.

    The mux presents one nibble on pins S7..S4. The 1Y line is inverted
    externally before it reaches S7, and the port inverts S7 again on read,
    so bit 3 of the nibble lands in status bit 7 unmolested. Bits 0-2 of the
    status register are reserved and read as zero.
    """
    nibble = code & 0x0F if lower else (code >> 4) & 0x0F
    pin_s7 = ((nibble >> 3) & 1) ^ 1  # external inverter
    pins = (
        pin_s7 << 7
        | ((nibble >> 2) & 1) << 6
        | ((nibble >> 1) & 1) << 5
        | (nibble & 1) << 4
        | (1 if eoc_high else 0) << 3
    )
    return (pins ^ 0x80) & 0xF8  # port inverts bit 7; bits 0-2 reserved


def oracle_temperature(code: int) -> float:
    celsius = Fraction(code * 5, 255) / Fraction(1, 10)
    fahrenheit = Fraction(9, 5) * celsius + 32
    return float(floor(fahrenheit * 100 + Fraction(1, 2))) / 100


def oracle_heart_rate(code: int) -> int:
    return int(floor(Fraction(code * 200, 255) + Fraction(1, 2)))


def make_rig(**adc_kwargs):
    bus = AdcBus(adc=VirtualAdc0809(vref=VREF, **adc_kwargs))
    return bus, AcquisitionDriver(bus)


class TestQuantizer:
    @pytest.mark.parametrize(
        "volts,code",
        [(0.000, 0x00), (5.000, 0xFF), (2.024, 0x67)],
    )
    def test_anchor_points(self, volts, code):
        assert quantize_volts(volts, VREF) == code

    def test_clamps_out_of_range(self):
        assert quantize_volts(-0.3, VREF) == 0
        assert quantize_volts(6.1, VREF) == 255

    def test_code_grid_roundtrips(self):
        for code in range(256):
            assert quantize_volts(code * VREF / 255, VREF) == code

    @given(
        v1=st.floats(min_value=0.0, max_value=5.0, allow_nan=False),
        v2=st.floats(min_value=0.0, max_value=5.0, allow_nan=False),
    )
    def test_monotone(self, v1, v2):
        if v1 > v2:
            v1, v2 = v2, v1
        assert quantize_volts(v1, VREF) <= quantize_volts(v2, VREF)

    @given(volts=st.floats(min_value=-1.0, max_value=6.0, allow_nan=False))
    def test_matches_fraction_oracle(self, volts):
        want = floor(Fraction(volts) * 255 / 5 + Fraction(1, 2))
        want = max(0, min(255, want))
        assert quantize_volts(volts, VREF) == want


class TestConversions:
    @pytest.mark.parametrize(
        "code,fahrenheit",
        [(0, 32.00), (255, 122.00), (185, 97.29)],
    )
    def test_temperature_anchors(self, code, fahrenheit):
        assert code_to_temperature(code, VREF) == pytest.approx(fahrenheit, abs=1e-9)

    @pytest.mark.parametrize("code,bpm", [(0, 0), (94, 74), (255, 200)])
    def test_heart_rate_anchors(self, code, bpm):
        assert code_to_heart_rate(code) == bpm

    def test_full_code_range_against_oracle(self):
        for code in range(256):
            assert code_to_temperature(code, VREF) == pytest.approx(oracle_temperature(code), abs=1e-9)
            assert code_to_heart_rate(code) == oracle_heart_rate(code)


class TestPortRegisters:
    def test_data_reads_back_last_write(self):
        port = PortRegisters()
        port.write_data(0x5A)
        assert port.read_data() == 0x5A
        port.write_data(0x1FF)  # only 8 bits exist
        assert port.read_data() == 0xFF

    def test_status_write_is_ignored(self):
        port = PortRegisters()
        port.write_status(0xFF)
        assert port.status_from_pins(0x00) == 0x80  # inverted bit 7 only

    def test_status_reserved_bits_read_zero(self):
        port = PortRegisters()
        assert port.status_from_pins(0xFF) & 0x07 == 0

    def test_control_pin_inversions(self):
        port = PortRegisters()
        port.write_control(0x00)
        # C0, C1, C3 inverted; C2 straight through
        assert port.control_pin_levels() == 0x0B
        port.write_control(0x0F)
        assert port.control_pin_levels() == 0x04


class TestAcquisition:
    def test_exhaustive_channel_code_sweep(self):
        # every channel x every code, result checked against the wiring oracle
        for channel in range(8):
            bus, driver = make_rig()
            for code in range(256):
                bus.adc.channel_volts[channel] = code * VREF / 255
                assert driver.acquire(channel) == code, (channel, code)

    def test_nibble_reads_match_status_oracle(self):
        bus, driver = make_rig()
        for code in (0x00, 0x0F, 0xF0, 0xA5, 0x67, 0xFF):
            bus.adc.channel_volts[2] = code * VREF / 255
            assert driver.acquire(2) == code
            bus.write_control(0)  # select line HIGH -> lower nibble
            assert bus.read_status() & 0xF8 == expected_status(code, lower=True, eoc_high=True)
            bus.write_control(1)
            assert bus.read_status() & 0xF8 == expected_status(code, lower=False, eoc_high=True)

    def test_address_latched_on_ale_rise(self):
        # lines may change while ALE is high; the rise is what latches
        bus, _ = make_rig()
        wm = bus.wire_map
        bus.adc.channel_volts[3] = 3 * VREF / 255
        bus.adc.channel_volts[5] = 200 * VREF / 255
        addr3 = (0 << wm.adc_addr_c) | (1 << wm.adc_addr_b) | (1 << wm.adc_addr_a)
        addr5 = (1 << wm.adc_addr_c) | (0 << wm.adc_addr_b) | (1 << wm.adc_addr_a)
        bus.write_data(addr3)
        bus.advance(50)
        bus.write_data(addr3 | 1 << wm.ale_soc)
        bus.advance(100)
        bus.write_data(addr5 | 1 << wm.ale_soc)  # too late, already latched
        bus.advance(2_400)
        bus.write_data(addr5)
        bus.advance(200_000)
        assert bus.adc.latched_channel == 3
        assert bus.adc.output_code() == 3

    def test_eoc_low_while_converting(self):
        bus, driver = make_rig()
        wm = bus.wire_map
        bus.adc.channel_volts[0] = 1.0
        addr = 0
        bus.write_data(addr)
        bus.advance(50)
        bus.write_data(addr | 1 << wm.ale_soc)
        bus.advance(2_500)
        bus.write_data(addr)
        for _ in range(9):  # 90 us of a 100 us conversion
            bus.advance(10_000)
            assert (bus.read_status() >> wm.eoc_status_bit) & 1 == 0
        bus.advance(10_000)
        assert (bus.read_status() >> wm.eoc_status_bit) & 1 == 1

    def test_wedged_channel_times_out(self):
        bus, driver = make_rig()
        bus.adc.wedged_channels.add(6)
        with pytest.raises(EocTimeout):
            driver.acquire(6)
        # other channels unaffected
        bus.adc.channel_volts[1] = 2.024
        assert driver.acquire(1) == 0x67

    def test_rejects_bad_channel(self):
        _, driver = make_rig()
        with pytest.raises(ValueError):
            driver.acquire(8)
        with pytest.raises(ValueError):
            driver.acquire(-1)

    @given(channel=st.integers(0, 7), code=st.integers(0, 255))
    @settings(max_examples=60, deadline=None)
    def test_acquire_is_repeatable(self, channel, code):
        bus, driver = make_rig()
        bus.adc.channel_volts[channel] = code * VREF / 255
        assert driver.acquire(channel) == driver.acquire(channel) == code


class TestTiming:
    def acquire_events(self):
        bus, driver = make_rig()
        bus.adc.channel_volts[4] = 2.5
        driver.acquire(4)
        return {e.kind: e for e in bus.log.events}, bus.log.events

    def test_event_order_and_minimums(self):
        by_kind, events = self.acquire_events()
        kinds = [e.kind for e in events]
        assert kinds[:5] == ["address_write", "ale_rise", "soc_rise", "soc_fall", "eoc_fall"]
        assert kinds.count("nibble_read") == 2
        assert kinds.index("eoc_rise") < kinds.index("nibble_read")
        assert by_kind["ale_rise"].at_ns - by_kind["address_write"].at_ns >= 50
        assert by_kind["soc_fall"].at_ns - by_kind["soc_rise"].at_ns >= 2_500
        assert by_kind["eoc_rise"].at_ns - by_kind["soc_fall"].at_ns == 100_000

    def test_timestamps_nondecreasing(self):
        _, events = self.acquire_events()
        stamps = [e.at_ns for e in events]
        assert stamps == sorted(stamps)

    def test_log_rejects_time_travel(self):
        log = BusTimingLog()
        log.record(10, "a")
        with pytest.raises(ValueError):
            log.record(9, "b")

    def test_custom_conversion_delay(self):
        bus = AdcBus(adc=VirtualAdc0809(vref=VREF, conversion_delay_us=250))
        driver = AcquisitionDriver(bus)
        bus.adc.channel_volts[0] = 1.0
        driver.acquire(0)
        by_kind = {e.kind: e for e in bus.log.events}
        assert by_kind["eoc_rise"].at_ns - by_kind["soc_fall"].at_ns == 250_000


class TestWiringMutations:
    """Each hardware inversion matters: break one and acquisitions go wrong."""

    def result_with(self, *, port=None, wire_map=None, code=0xA5):
        adc = VirtualAdc0809(vref=VREF)
        bus = AdcBus(
            adc=adc,
            port=port if port is not None else PortRegisters(),
            wire_map=wire_map if wire_map is not None else WireMap(),
        )
        adc.channel_volts[0] = code * VREF / 255
        return AcquisitionDriver(bus).acquire(0)

    def test_baseline_is_faithful(self):
        assert self.result_with(code=0xA5) == 0xA5

    def test_status_inversion_is_load_bearing(self):
        port = PortRegisters(status_invert_mask=0x00)
        assert self.result_with(port=port, code=0xFF) != 0xFF

    def test_control_inversion_is_load_bearing(self):
        # without the C0 inversion the nibble selects swap
        port = PortRegisters(control_invert_mask=0x0A)
        assert self.result_with(port=port, code=0xA5) == 0x5A

    def test_external_inverter_is_load_bearing(self):
        wm = WireMap(s7_external_inverter=False)
        assert self.result_with(wire_map=wm, code=0xFF) != 0xFF

    def test_nibble_select_levels(self):
        # select HIGH reads the lower nibble, LOW the upper
        adc = VirtualAdc0809(vref=VREF)
        bus = AdcBus(adc=adc)
        adc.channel_volts[0] = 0x9C * VREF / 255
        driver = AcquisitionDriver(bus)
        driver.acquire(0)
        assert driver.read_nibble(NibbleSelect.LOWER) == 0xC
        assert driver.read_nibble(NibbleSelect.UPPER) == 0x9
