"""Analog front-end models that feed the virtual converter channels.

Temperature: a two-terminal transducer sourcing 1 µA per kelvin (273 µA at
0 °C), followed by an op-amp stage that subtracts the 273 µA offset and
converts at 100 mV/°C, so 0 °C reads 0 V and 50 °C reads 5 V full scale.

Heart rate: a potentiometer standing in for a real ECG chain, dialed so the
wiper voltage is bpm/200 of the 5 V reference.

Each monitored bed owns an adjacent channel pair: temperature on channel
2i, heart rate on channel 2i+1, for bed index i (0-3).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Mapping, Sequence

AD590_OFFSET_UA = 273.0
AD590_GAIN_UA_PER_C = 1.0
AD590_MIN_C = -55.0
AD590_MAX_C = 150.0
THERMOMETER_GAIN_V_PER_C = 0.1
HR_FULL_SCALE_BPM = 200.0
CHANNELS_PER_BED = 2
MAX_BEDS = 4  # 8 converter channels


class SensorRangeError(ValueError):
    """Input outside the transducer's operating range."""


class ChannelConfigError(ValueError):
    """Bed-to-channel assignment that the hardware cannot satisfy."""


@dataclass(frozen=True)
class Ad590Model:
    offset_ua: float = AD590_OFFSET_UA
    gain_ua_per_c: float = AD590_GAIN_UA_PER_C
    min_c: float = AD590_MIN_C
    max_c: float = AD590_MAX_C

    def current_ua(self, temp_c: float) -> float:
        if not self.min_c <= temp_c <= self.max_c:
            raise SensorRangeError(
                f"temperature {temp_c} degC outside device range [{self.min_c}, {self.max_c}]"
            )
        return self.offset_ua + self.gain_ua_per_c * temp_c


@dataclass(frozen=True)
class ThermometerCircuit:
    sensor: Ad590Model = Ad590Model()
    gain_v_per_c: float = THERMOMETER_GAIN_V_PER_C
    zero_c_offset_v: float = 0.0

    def volts(self, temp_c: float) -> float:
        # written as the op-amp computes it: offset current subtracted,
        # then the 100 mV/uA conversion — keeps the current/volt agreement
        # invariant exact, not just approximate
        delta_ua = self.sensor.current_ua(temp_c) - self.sensor.offset_ua
        return delta_ua * self.gain_v_per_c + self.zero_c_offset_v


@dataclass(frozen=True)
class PotentiometerHr:
    full_scale_bpm: float = HR_FULL_SCALE_BPM
    vref: float = 5.0

    def volts(self, bpm: float) -> float:
        return min(max(bpm / self.full_scale_bpm * self.vref, 0.0), self.vref)


_DEFAULT_SENSOR = Ad590Model()
_DEFAULT_THERMOMETER = ThermometerCircuit()
_DEFAULT_POT = PotentiometerHr()


def ad590_current(temp_c: float) -> float:
    return _DEFAULT_SENSOR.current_ua(temp_c)


def thermometer_volts(temp_c: float) -> float:
    return _DEFAULT_THERMOMETER.volts(temp_c)


def heart_rate_volts(bpm: float) -> float:
    return _DEFAULT_POT.volts(bpm)


@dataclass(frozen=True)
class BedInput:
    temp_c: float
    bpm: float


def drive_channels(
    adc,
    inputs: Mapping[int, BedInput] | Sequence[BedInput],
    *,
    jitter_mv: float = 0.0,
    rng: random.Random | None = None,
) -> None:
    """Refresh all eight channel voltages from per-bed inputs.

    ``inputs`` maps bed index (0-3) to that bed's vitals; a plain sequence
    is taken as beds 0..len-1. Unused channels are driven to 0 V. Optional
    zero-mean uniform jitter (deterministic when ``rng`` is seeded) roughs
    up the analog values for demos; it defaults off.
    """
    if not isinstance(inputs, Mapping):
        inputs = dict(enumerate(inputs))
    if len(inputs) > MAX_BEDS:
        raise ChannelConfigError(f"at most {MAX_BEDS} beds fit on 8 channels, got {len(inputs)}")
    volts = [0.0] * 8
    for index, bed in sorted(inputs.items()):
        if not 0 <= index < MAX_BEDS:
            raise ChannelConfigError(f"bed index {index} outside 0-{MAX_BEDS - 1}")
        volts[CHANNELS_PER_BED * index] = thermometer_volts(bed.temp_c)
        volts[CHANNELS_PER_BED * index + 1] = heart_rate_volts(bed.bpm)
    if jitter_mv > 0.0:
        if rng is None:
            rng = random.Random()
        volts = [v + rng.uniform(-jitter_mv, jitter_mv) / 1000.0 for v in volts]
    adc.channel_volts[:] = volts


@dataclass(frozen=True)
class ScenarioStep:
    """One scripted vitals change: at ``at_s`` simulated seconds, bed
    ``bed_no`` starts reading ``temp_c`` / ``bpm``."""

    at_s: float
    bed_no: int
    temp_c: float
    bpm: float


def parse_scenario(text: str) -> list[ScenarioStep]:
    """Parse a scripted scenario: one ``time_offset_s, bed, temp_C, bpm``
    line per step; blank lines and ``#`` comments ignored."""
    steps = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 4:
            raise ValueError(f"scenario line {lineno}: expected 4 comma-separated fields, got {len(fields)}")
        try:
            step = ScenarioStep(
                at_s=float(fields[0]),
                bed_no=int(fields[1]),
                temp_c=float(fields[2]),
                bpm=float(fields[3]),
            )
        except ValueError as exc:
            raise ValueError(f"scenario line {lineno}: {exc}") from None
        if step.at_s < 0:
            raise ValueError(f"scenario line {lineno}: negative time offset")
        steps.append(step)
    steps.sort(key=lambda s: s.at_s)
    return steps


def load_scenario(path) -> list[ScenarioStep]:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
