"""NMEA 0183 codec for the two sentences the pipeline needs: GGA and RMC.

Wire format is ``$<talker><type>,<fields>*HH\\r\\n`` with ``HH`` the uppercase
hex XOR of every byte between ``$`` and ``*``.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from functools import reduce
from typing import Union

from .telemetry import GeoFix, NmeaLine

SUPPORTED_TYPES = frozenset({"GGA", "RMC"})
_HEX_UPPER = frozenset(b"0123456789ABCDEF")


class NmeaError(ValueError):
    pass


class Malformed(NmeaError):
    pass


class ChecksumMismatch(NmeaError):
    def __init__(self, expected: int, found: int) -> None:
        super().__init__(f"checksum mismatch: computed {expected:02X}, sentence says {found:02X}")
        self.expected = expected
        self.found = found


class Unsupported(NmeaError):
    """Structurally valid sentence of a type the pipeline does not use.

    The parsed sentence is attached so callers can still log it.
    """

    def __init__(self, sentence: "NmeaSentence") -> None:
        super().__init__(f"unsupported sentence type {sentence.type!r}")
        self.sentence = sentence


class NoFix(NmeaError):
    pass


class FieldError(NmeaError):
    pass


def checksum(payload: bytes) -> int:
    return reduce(lambda acc, b: acc ^ b, payload, 0)


@dataclass(frozen=True)
class NmeaSentence:
    talker: str
    type: str
    fields: tuple[str, ...]
    checksum: int

    @classmethod
    def build(cls, talker: str, type: str, fields) -> "NmeaSentence":
        fields = tuple(fields)
        return cls(talker, type, fields, checksum(_payload(talker, type, fields)))

    @property
    def supported(self) -> bool:
        return self.type in SUPPORTED_TYPES


def _payload(talker: str, type: str, fields: tuple[str, ...]) -> bytes:
    return ",".join((talker + type,) + fields).encode("ascii")


def serialize(sentence: NmeaSentence) -> bytes:
    payload = _payload(sentence.talker, sentence.type, sentence.fields)
    return b"$" + payload + b"*" + b"%02X" % checksum(payload) + b"\r\n"


def parse_sentence(line: Union[NmeaLine, bytes, str]) -> NmeaSentence:
    """Parse one sentence and verify its checksum.

    The checksum is verified before any content checks, so a single
    corrupted byte in the payload always surfaces as ChecksumMismatch.
    Raises Unsupported (with the parsed sentence) for types other than
    GGA and RMC.
    """
    if isinstance(line, NmeaLine):
        raw = line.raw
    elif isinstance(line, str):
        try:
            raw = line.encode("ascii")
        except UnicodeEncodeError as exc:
            raise Malformed("non-ASCII sentence") from exc
    else:
        raw = bytes(line)

    if raw.endswith(b"\r\n"):
        raw = raw[:-2]
    if not raw.startswith(b"$"):
        raise Malformed("sentence does not start with '$'")
    star = raw.rfind(b"*")
    if star < 0:
        raise Malformed("missing '*' checksum delimiter")
    hh = raw[star + 1 :]
    if len(hh) != 2 or not all(b in _HEX_UPPER for b in hh):
        raise Malformed(f"checksum field {hh!r} is not two uppercase hex digits")
    payload = raw[1:star]
    found = int(hh, 16)
    expected = checksum(payload)
    if expected != found:
        raise ChecksumMismatch(expected, found)

    if any(b < 0x20 or b > 0x7E for b in payload):
        raise Malformed("payload contains non-printable or non-ASCII bytes")
    if b"$" in payload or b"*" in payload:
        raise Malformed("reserved delimiter inside payload")
    parts = payload.decode("ascii").split(",")
    address = parts[0]
    if len(address) != 5 or not address.isalnum():
        raise Malformed(f"bad address field {address!r}")
    sentence = NmeaSentence(address[:2], address[2:], tuple(parts[1:]), found)
    if not sentence.supported:
        raise Unsupported(sentence)
    return sentence


def _coordinate(value: str, hemisphere: str, deg_digits: int, positive: str, negative: str) -> float:
    if hemisphere not in (positive, negative):
        raise FieldError(f"bad hemisphere {hemisphere!r}")
    dot = value.find(".")
    int_part = value if dot < 0 else value[:dot]
    if len(int_part) != deg_digits + 2 or not int_part.isdigit():
        raise FieldError(f"bad coordinate {value!r}")
    try:
        minutes = Decimal(value[deg_digits:])
    except InvalidOperation as exc:
        raise FieldError(f"bad coordinate {value!r}") from exc
    if not minutes.is_finite() or minutes >= 60:
        raise FieldError(f"minutes out of range in {value!r}")
    degrees = Decimal(int(value[:deg_digits])) + minutes / 60
    limit = 90 if deg_digits == 2 else 180
    if degrees > limit:
        raise FieldError(f"coordinate {value!r} exceeds {limit} degrees")
    result = float(degrees)
    return -result if hemisphere == negative else result


def to_geo_fix(sentence: NmeaSentence, t: int) -> GeoFix:
    f = sentence.fields
    if sentence.type == "GGA":
        if len(f) < 6:
            raise FieldError("GGA sentence too short")
        if f[5] in ("", "0"):
            raise NoFix("GGA fix quality 0")
        lat_f, ns, lon_f, ew = f[1], f[2], f[3], f[4]
    elif sentence.type == "RMC":
        if len(f) < 6:
            raise FieldError("RMC sentence too short")
        if f[1] != "A":
            raise NoFix(f"RMC status {f[1]!r}")
        lat_f, ns, lon_f, ew = f[2], f[3], f[4], f[5]
    else:
        raise Unsupported(sentence)
    lat = _coordinate(lat_f, ns, 2, "N", "S")
    lon = _coordinate(lon_f, ew, 3, "E", "W")
    return GeoFix(lat=lat, lon=lon, t=t, stale=False)


def format_coordinate(value: float, is_lat: bool, decimals: int = 4) -> tuple[str, str]:
    """Render decimal degrees as an NMEA ``(ddmm.mmmm, hemisphere)`` pair."""
    hemi = ("N" if value >= 0 else "S") if is_lat else ("E" if value >= 0 else "W")
    v = Decimal(repr(abs(value)))
    deg = int(v)
    minutes = ((v - deg) * 60).quantize(Decimal(1).scaleb(-decimals))
    if minutes >= 60:
        deg, minutes = deg + 1, minutes - 60
    width = 2 if is_lat else 3
    return f"{deg:0{width}d}{minutes:0{3 + decimals}.{decimals}f}", hemi
