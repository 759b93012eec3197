from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accident_alert.nmea import (
    ChecksumMismatch,
    FieldError,
    Malformed,
    NmeaError,
    NmeaSentence,
    NoFix,
    Unsupported,
    checksum,
    format_coordinate,
    parse_sentence,
    serialize,
    to_geo_fix,
)
from accident_alert.telemetry import NmeaLine

GGA_PAYLOAD = "GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,"
# XOR over the payload bytes, computed offline before the codec existed
GGA_CHECKSUM = 0x47


def xor_oracle(payload: bytes) -> int:
    acc = 0
    for b in payload:
        acc = acc ^ b
    return acc


def test_checksum_trivial():
    assert checksum(b"") == 0x00
    assert checksum(b"A") == 0x41


def test_checksum_gga_example():
    assert checksum(GGA_PAYLOAD.encode()) == GGA_CHECKSUM
    assert xor_oracle(GGA_PAYLOAD.encode()) == GGA_CHECKSUM


def test_parse_gga():
    s = parse_sentence(NmeaLine(0, b"$" + GGA_PAYLOAD.encode() + b"*47\r\n"))
    assert (s.talker, s.type) == ("GP", "GGA")
    assert s.fields[-2:] == ("", "")
    assert len(s.fields) == 14
    assert s.checksum == GGA_CHECKSUM


def test_parse_flipped_checksum():
    with pytest.raises(ChecksumMismatch) as info:
        parse_sentence("$" + GGA_PAYLOAD + "*46")
    assert info.value.expected == 0x47
    assert info.value.found == 0x46


def test_unsupported_type_keeps_parsed_sentence():
    payload = "GPGSV,1,1,01,12,40,083,46"
    line = f"${payload}*{xor_oracle(payload.encode()):02X}"
    with pytest.raises(Unsupported) as info:
        parse_sentence(line)
    assert info.value.sentence.type == "GSV"
    assert info.value.sentence.fields[0] == "1"


@pytest.mark.parametrize(
    "line",
    ["$" + GGA_PAYLOAD, "$" + GGA_PAYLOAD + "*4", "$" + GGA_PAYLOAD + "*4g", GGA_PAYLOAD + "*47", "$GPGG,1*00"],
)
def test_malformed(line):
    if line == "$GPGG,1*00":
        line = "$GPGG,1*%02X" % xor_oracle(b"GPGG,1")
    with pytest.raises(Malformed):
        parse_sentence(line)


def test_lowercase_checksum_rejected():
    payload = "GPRMC,1,A,2323.5,N,09147.0,W,0,0,181026,,"
    hh = "%02x" % xor_oracle(payload.encode())
    assert hh != hh.upper()
    with pytest.raises(Malformed):
        parse_sentence(f"${payload}*{hh}")


def test_serialize_gga_exact():
    s = NmeaSentence.build("GP", "GGA", GGA_PAYLOAD.split(",")[1:])
    out = serialize(s)
    assert out == b"$" + GGA_PAYLOAD.encode() + b"*47\r\n"
    assert out.endswith(b",M,,*47\r\n")
    assert parse_sentence(out) == s


def test_coordinate_examples():
    s = NmeaSentence.build("GP", "GGA", ["000000", "2323.5000", "N", "09147.0000", "W", "1", "05", "1.0", "0", "M", "0", "M", "", ""])
    fix = to_geo_fix(s, 77)
    assert fix.lat == pytest.approx(23.3916667, abs=1e-7)
    assert fix.lon == pytest.approx(-91.7833333, abs=1e-7)
    assert fix.t == 77 and fix.stale is False


def test_rmc_fix_and_void():
    fields = ["081836", "A", "3751.65", "S", "14507.36", "E", "000.0", "360.0", "130998", "011.3", "E"]
    fix = to_geo_fix(NmeaSentence.build("GP", "RMC", fields), 0)
    assert fix.lat == pytest.approx(-(37 + Fraction("51.65") / 60))
    fields[1] = "V"
    with pytest.raises(NoFix):
        to_geo_fix(NmeaSentence.build("GP", "RMC", fields), 0)


def test_gga_quality_zero_is_nofix():
    s = NmeaSentence.build("GP", "GGA", ["123519", "4807.038", "N", "01131.000", "E", "0", "00", "", "", "M", "", "M", "", ""])
    with pytest.raises(NoFix):
        to_geo_fix(s, 0)


@pytest.mark.parametrize(
    "lat,ns",
    [("23x3.5", "N"), ("2360.0", "N"), ("2323.5", "Q"), ("223.5", "N"), ("9100.0", "S")],
)
def test_coordinate_field_errors(lat, ns):
    s = NmeaSentence.build("GP", "GGA", ["0", lat, ns, "09147.0", "E", "1", "05", "1", "0", "M", "0", "M", "", ""])
    with pytest.raises(FieldError):
        to_geo_fix(s, 0)


# --- generated sentences ----------------------------------------------------

FIELD_CHARS = st.characters(min_codepoint=0x20, max_codepoint=0x7E, blacklist_characters=",*$")
talkers = st.text(alphabet="ABCDEFGHIJKLMNOPQRSTUVWXYZ", min_size=2, max_size=2)
sentences = st.builds(
    NmeaSentence.build,
    talkers,
    st.sampled_from(["GGA", "RMC"]),
    st.lists(st.text(alphabet=FIELD_CHARS, max_size=12), max_size=16),
)


@settings(max_examples=300)
@given(sentences)
def test_round_trip(s):
    raw = serialize(s)
    assert raw.startswith(b"$") and raw.endswith(b"\r\n")
    assert parse_sentence(raw) == s


@settings(max_examples=100)
@given(sentences, st.data())
def test_single_payload_bit_flip_is_checksum_mismatch(s, data):
    raw = bytearray(serialize(s))
    star = raw.rindex(b"*")
    pos = data.draw(st.integers(1, star - 1))
    bit = data.draw(st.integers(0, 7))
    raw[pos] ^= 1 << bit
    with pytest.raises(ChecksumMismatch):
        parse_sentence(bytes(raw))


def test_every_bit_flip_of_gga_rejected():
    raw = serialize(NmeaSentence.build("GP", "GGA", GGA_PAYLOAD.split(",")[1:]))[:-2]
    for pos in range(len(raw)):
        for bit in range(8):
            corrupt = bytearray(raw)
            corrupt[pos] ^= 1 << bit
            with pytest.raises(NmeaError):
                parse_sentence(bytes(corrupt))


def rational_degrees(field: str, deg_digits: int) -> Fraction:
    return int(field[:deg_digits]) + Fraction(field[deg_digits:]) / 60


@settings(max_examples=300)
@given(
    st.integers(0, 89),
    st.integers(0, 59),
    st.integers(0, 9999),
    st.integers(0, 179),
    st.integers(0, 59),
    st.integers(0, 9999),
)
def test_coordinate_conversion_against_fractions(lat_d, lat_m, lat_f, lon_d, lon_m, lon_f):
    lat = f"{lat_d:02d}{lat_m:02d}.{lat_f:04d}"
    lon = f"{lon_d:03d}{lon_m:02d}.{lon_f:04d}"
    s = NmeaSentence.build("GN", "RMC", ["0", "A", lat, "S", lon, "E", "0", "0", "010100", "", ""])
    fix = to_geo_fix(s, 0)
    assert abs(Fraction(fix.lat) + rational_degrees(lat, 2)) < Fraction(1, 10**7)
    assert abs(Fraction(fix.lon) - rational_degrees(lon, 3)) < Fraction(1, 10**7)


@given(st.floats(-89.99, 89.99), st.floats(-179.99, 179.99))
def test_format_coordinate_inverts_conversion(lat, lon):
    lat_s, ns = format_coordinate(lat, True)
    lon_s, ew = format_coordinate(lon, False)
    fix = to_geo_fix(NmeaSentence.build("GP", "GGA", ["0", lat_s, ns, lon_s, ew, "1", "", "", "", "", "", "", "", ""]), 0)
    # 4 decimal minutes resolve to ~1.7e-6 degrees
    assert fix.lat == pytest.approx(lat, abs=1e-6)
    assert fix.lon == pytest.approx(lon, abs=1e-6)
