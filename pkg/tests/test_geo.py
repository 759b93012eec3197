import math
import random

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from accident_alert.geo import (
    EARTH_RADIUS_M,
    EmptyKind,
    RegistryError,
    ResponderRegistry,
    compose,
    haversine_m,
    maps_link,
    nearest,
    parse_link,
    parse_registry,
)
from accident_alert.telemetry import Axis, DetectionEvent, EventKind, GeoFix, Responder, ResponderKind

DHAKA = (23.8103, 90.4125)
CHITTAGONG = (22.3569, 91.7832)
# spherical law of cosines, evaluated at 50 significant digits (mpmath) before the build
DHAKA_CHITTAGONG_M = 213952.19117971733


def cosine_law_m(a, b):
    """Independent distance oracle: spherical law of cosines."""
    la1, lo1, la2, lo2 = map(math.radians, (*a, *b))
    c = math.sin(la1) * math.sin(la2) + math.cos(la1) * math.cos(la2) * math.cos(lo2 - lo1)
    return EARTH_RADIUS_M * math.acos(max(-1.0, min(1.0, c)))


def H(rid, lat, lon):
    return Responder(rid, ResponderKind.HOSPITAL, rid, "+8801711000000", lat, lon)


def P(rid, lat, lon):
    return Responder(rid, ResponderKind.POLICE, rid, "+8801811000000", lat, lon)


def tilt(t=12500):
    return DetectionEvent(t=t, kind=EventKind.TILT_ACCIDENT, axis=Axis.X, trigger_value=320)


def test_haversine_identity():
    assert haversine_m(DHAKA, DHAKA) == 0.0


def test_haversine_dhaka_chittagong():
    assert abs(haversine_m(DHAKA, CHITTAGONG) - DHAKA_CHITTAGONG_M) < 1.0
    assert abs(cosine_law_m(DHAKA, CHITTAGONG) - DHAKA_CHITTAGONG_M) < 1e-3


def test_haversine_half_circumference():
    assert haversine_m((0, 0), (0, 180)) == pytest.approx(math.pi * EARTH_RADIUS_M, abs=1e-6)
    assert haversine_m((90, 0), (-90, 0)) == pytest.approx(20_015_086.796, abs=1e-3)


lat = st.floats(-90, 90)
lon = st.floats(-180, 180)
points = st.tuples(lat, lon)


@given(points, points)
def test_haversine_symmetric_nonnegative(a, b):
    assert haversine_m(a, b) == haversine_m(b, a) >= 0


@given(points, points, points)
def test_triangle_inequality(a, b, c):
    ab, bc, ac = haversine_m(a, b), haversine_m(b, c), haversine_m(a, c)
    assert ac <= (ab + bc) * (1 + 1e-6) + 1e-6


@settings(max_examples=200)
@given(points, points)
def test_haversine_agrees_with_cosine_law_at_long_range(a, b):
    d = haversine_m(a, b)
    # the cosine law loses precision below a few km; compare where it is trustworthy
    if d > 10_000:
        assert d == pytest.approx(cosine_law_m(a, b), rel=1e-6)


def test_nearest_singleton():
    reg = ResponderRegistry((H("h1", 0, 0), P("p1", 1, 1)))
    assert nearest(reg, (50.0, 50.0), ResponderKind.HOSPITAL).id == "h1"


def test_nearest_tie_first_listed():
    reg = ResponderRegistry((H("east", 0, 1), H("west", 0, -1), P("p", 5, 5)))
    assert nearest(reg, (0.0, 0.0), ResponderKind.HOSPITAL).id == "east"
    flipped = ResponderRegistry((H("west", 0, -1), H("east", 0, 1), P("p", 5, 5)))
    assert nearest(flipped, (0.0, 0.0), ResponderKind.HOSPITAL).id == "west"


def test_nearest_empty_kind():
    with pytest.raises(EmptyKind):
        nearest([H("h", 0, 0)], (0, 0), ResponderKind.POLICE)


def brute_argmin(responders, fix, kind):
    """Exhaustive scan with the oracle distance; first index wins ties."""
    candidates = [(cosine_law_m(fix, (r.lat, r.lon)), i) for i, r in enumerate(responders) if r.kind is kind]
    return responders[min(candidates)[1]]


def random_registry(rng, n):
    rs = [H("h0", rng.uniform(20, 26), rng.uniform(88, 93)), P("p0", rng.uniform(20, 26), rng.uniform(88, 93))]
    for i in range(1, n - 1):
        make = H if rng.random() < 0.5 else P
        rs.append(make(f"r{i}", rng.uniform(20, 26), rng.uniform(88, 93)))
    rng.shuffle(rs)
    return ResponderRegistry(tuple(rs))


@pytest.mark.parametrize("seed", range(10))
def test_nearest_matches_exhaustive_scan(seed):
    rng = random.Random(seed)
    reg = random_registry(rng, 10)
    fix = (rng.uniform(20, 26), rng.uniform(88, 93))
    for kind in ResponderKind:
        assert nearest(reg, fix, kind) == brute_argmin(reg.responders, fix, kind)


@given(st.randoms(use_true_random=False), st.permutations(range(8)))
def test_nearest_permutation_invariant(rng, perm):
    reg = random_registry(rng, 8)
    shuffled = ResponderRegistry(tuple(reg.responders[i] for i in perm))
    fix = (rng.uniform(20, 26), rng.uniform(88, 93))
    for kind in ResponderKind:
        dists = sorted(haversine_m(fix, r) for r in reg.of_kind(kind))
        # exact ties are resolved by listing order, so they are exempt
        assume(len(dists) == 1 or dists[0] != dists[1])
        assert nearest(reg, fix, kind) == nearest(shuffled, fix, kind)


@pytest.mark.parametrize(
    "fix,link",
    [
        ((22.3569, 91.7832), "http://maps.google.com/?q=22.356900,91.783200"),
        ((0, 0), "http://maps.google.com/?q=0.000000,0.000000"),
        ((-33.8688, 151.2093), "http://maps.google.com/?q=-33.868800,151.209300"),
        ((-0.0000001, -0.0000004), "http://maps.google.com/?q=0.000000,0.000000"),
    ],
)
def test_maps_link(fix, link):
    assert maps_link(fix) == link


def test_compose_body(registry):
    fix = GeoFix(22.3569, 91.7832, t=12000)
    n = compose(tilt(), fix, registry, "BUS-42")
    assert n.body == "ACCIDENT BUS-42 t=12.5s http://maps.google.com/?q=22.356900,91.783200"
    assert n.link in n.body
    assert [r.kind for r in n.recipients] == [ResponderKind.HOSPITAL, ResponderKind.POLICE]


def test_compose_stale(registry):
    n = compose(tilt(), GeoFix(22.3569, 91.7832, t=0, stale=True), registry, "BUS-42")
    assert n.body.endswith(" STALE")


def test_compose_rejects_proximity(registry):
    ev = DetectionEvent(t=0, kind=EventKind.PROXIMITY_WARNING, trigger_value=3.0)
    with pytest.raises(ValueError):
        compose(ev, GeoFix(0, 0, 0), registry, "V")


def test_compose_truncates_vehicle_id_not_link(registry):
    fix = GeoFix(-89.123456, -179.654321, t=0, stale=True)
    n = compose(tilt(10**9), fix, registry, "V" * 300)
    assert len(n.body.encode("ascii")) == 160
    assert n.body.endswith(maps_link(fix) + " STALE")


def test_compose_recipients_match_oracle():
    rng = random.Random(42)
    reg = random_registry(rng, 6)
    for _ in range(20):
        fix = GeoFix(rng.uniform(20, 26), rng.uniform(88, 93), 0)
        n = compose(tilt(), fix, reg, "T")
        assert n.hospital == brute_argmin(reg.responders, (fix.lat, fix.lon), ResponderKind.HOSPITAL)
        assert n.police == brute_argmin(reg.responders, (fix.lat, fix.lon), ResponderKind.POLICE)


@given(lat, lon, st.booleans(), st.integers(0, 10**8), st.text(alphabet="ABCXYZ-0123456789", min_size=1, max_size=200))
def test_body_link_round_trips(la, lo, stale, t, vid):
    reg = ResponderRegistry((H("h", 0, 0), P("p", 0, 0)))
    n = compose(tilt(t), GeoFix(la, lo, 0, stale), reg, vid)
    assert len(n.body) <= 160
    got = parse_link(n.body)
    assert got is not None
    assert (f"{got[0]:.6f}", f"{got[1]:.6f}") == tuple(maps_link((la, lo))[len("http://maps.google.com/?q="):].split(","))
    assert got == pytest.approx((la, lo), abs=5e-7)


def test_registry_file_parsing():
    text = """# comment
h1,hospital,"Medical College, Ward 3",+8801711000101,22.35,91.83

p1, police, Kotwali, +8801811000101, 22.33, 91.83
"""
    reg = parse_registry(text, source="mem")
    assert [r.id for r in reg.responders] == ["h1", "p1"]
    assert reg.responders[0].name == "Medical College, Ward 3"
    assert reg.source == "mem"


@pytest.mark.parametrize(
    "text,line",
    [
        ("h1,hospital,A,+8801711000101,22.3\n", 1),
        ("h1,clinic,A,+8801711000101,22.3,91.8\n", 1),
        ("h1,hospital,A,01711000101,22.3,91.8\n", 1),
        ("#x\nh1,hospital,A,+8801711000101,95,91.8\n", 2),
    ],
)
def test_registry_bad_lines(text, line):
    with pytest.raises(RegistryError) as info:
        parse_registry(text)
    assert info.value.line == line


def test_registry_needs_both_kinds_and_unique_ids():
    with pytest.raises(RegistryError):
        ResponderRegistry((H("h", 0, 0),))
    with pytest.raises(RegistryError):
        ResponderRegistry((H("x", 0, 0), P("x", 0, 0)))
