"""Domain types shared by the detection, location and notification stages.

Sample types are plain frozen values; they are *not* checked on construction
because they come straight off a trace file. Run them through
:func:`validate_sample` before feeding them to anything else. Types produced
internally (fixes, events, responders) check their invariants eagerly.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Optional, Union

ADC_MAX = 1023
ULTRASONIC_SENSORS = ("front", "rear")

_PHONE_RE = re.compile(r"^\+[0-9]{8,15}$")


class ValidationError(ValueError):
    """Base class for rejected input samples."""


class RangeError(ValidationError):
    pass


class FormatError(ValidationError):
    pass


class EventKind(str, enum.Enum):
    TILT_ACCIDENT = "TiltAccident"
    PROXIMITY_WARNING = "ProximityWarning"


class Axis(str, enum.Enum):
    X = "X"
    Y = "Y"
    Z = "Z"


class ResponderKind(str, enum.Enum):
    HOSPITAL = "hospital"
    POLICE = "police"


@dataclass(frozen=True)
class AccelSample:
    t: int
    x: int
    y: int
    z: int


@dataclass(frozen=True)
class UltrasonicSample:
    t: int
    sensor_id: str
    range_cm: float


@dataclass(frozen=True)
class NmeaLine:
    t: int
    raw: bytes


Sample = Union[AccelSample, UltrasonicSample, NmeaLine]


def check_lat_lon(lat: float, lon: float) -> None:
    if not (isinstance(lat, (int, float)) and isinstance(lon, (int, float))):
        raise RangeError(f"coordinates must be numbers, got {lat!r}, {lon!r}")
    if not -90.0 <= lat <= 90.0:
        raise RangeError(f"latitude {lat} outside [-90, 90]")
    if not -180.0 <= lon <= 180.0:
        raise RangeError(f"longitude {lon} outside [-180, 180]")


@dataclass(frozen=True)
class GeoFix:
    lat: float
    lon: float
    t: int
    stale: bool = False

    def __post_init__(self) -> None:
        check_lat_lon(self.lat, self.lon)
        _check_timestamp(self.t)


@dataclass(frozen=True)
class DetectionEvent:
    t: int
    kind: EventKind
    trigger_value: float
    axis: Optional[Axis] = None
    # which ultrasonic sensor raised a proximity warning; None for tilt
    sensor_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind is EventKind.TILT_ACCIDENT and self.axis is None:
            raise ValueError("TiltAccident requires an axis")
        if self.kind is EventKind.PROXIMITY_WARNING and self.axis is not None:
            raise ValueError("ProximityWarning carries no axis")


@dataclass(frozen=True)
class Responder:
    id: str
    kind: ResponderKind
    name: str
    phone: str
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not _PHONE_RE.match(self.phone):
            raise FormatError(f"phone {self.phone!r} is not '+' followed by 8-15 digits")
        check_lat_lon(self.lat, self.lon)

    @property
    def location(self) -> tuple[float, float]:
        return (self.lat, self.lon)


def _check_timestamp(t: object) -> None:
    if not isinstance(t, int) or isinstance(t, bool):
        raise FormatError(f"timestamp must be an integer millisecond count, got {t!r}")
    if t < 0:
        raise RangeError(f"timestamp {t} is negative")


def _check_adc(name: str, value: object) -> None:
    if not isinstance(value, int) or isinstance(value, bool):
        raise FormatError(f"{name} must be an integer ADC count, got {value!r}")
    if not 0 <= value <= ADC_MAX:
        raise RangeError(f"{name}={value} outside 10-bit ADC range 0..{ADC_MAX}")


def validate_sample(sample: Sample) -> Sample:
    """Check a raw sample against its type invariants and return it unchanged.

    Raises :class:`RangeError` for out-of-range numbers and
    :class:`FormatError` for structurally wrong values. Nothing is coerced.
    """
    if isinstance(sample, AccelSample):
        _check_timestamp(sample.t)
        for axis in ("x", "y", "z"):
            _check_adc(axis, getattr(sample, axis))
    elif isinstance(sample, UltrasonicSample):
        _check_timestamp(sample.t)
        if sample.sensor_id not in ULTRASONIC_SENSORS:
            raise FormatError(f"unknown ultrasonic sensor {sample.sensor_id!r}")
        r = sample.range_cm
        if not isinstance(r, (int, float)) or isinstance(r, bool):
            raise FormatError(f"range_cm must be a number, got {r!r}")
        if math.isnan(r) or math.isinf(r) or r < 0:
            raise RangeError(f"range_cm={r} must be finite and non-negative")
    elif isinstance(sample, NmeaLine):
        _check_timestamp(sample.t)
        raw = sample.raw
        if not isinstance(raw, bytes):
            raise FormatError("NMEA raw line must be bytes")
        if not raw.startswith(b"$"):
            raise FormatError("NMEA line does not start with '$'")
        body = raw[:-2] if raw.endswith(b"\r\n") else raw
        if b"\r" in body or b"\n" in body:
            raise FormatError("NMEA line contains interior CR/LF")
        if any(b > 0x7F for b in raw):
            raise FormatError("NMEA line contains non-ASCII bytes")
    else:
        raise FormatError(f"not a sensor sample: {type(sample).__name__}")
    return sample
