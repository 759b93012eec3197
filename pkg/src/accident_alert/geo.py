"""Responder registry, nearest-responder selection and alert message composition."""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Optional, Sequence, Union

from .telemetry import DetectionEvent, EventKind, GeoFix, Responder, ResponderKind

EARTH_RADIUS_M = 6_371_000.0
SMS_MAX_BYTES = 160
MAPS_PREFIX = "http://maps.google.com/?q="
LINK_RE = re.compile(r"http://maps\.google\.com/\?q=(-?\d+\.\d{6}),(-?\d+\.\d{6})")

LatLon = tuple[float, float]


class EmptyKind(LookupError):
    pass


class RegistryError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None) -> None:
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def _latlon(p) -> LatLon:
    if isinstance(p, (GeoFix, Responder)):
        return (p.lat, p.lon)
    return (p[0], p[1])


def haversine_m(a, b) -> float:
    """Great-circle distance in meters between two ``(lat, lon)`` points."""
    lat1, lon1 = map(math.radians, _latlon(a))
    lat2, lon2 = map(math.radians, _latlon(b))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    # rounding can push h a hair above 1 for antipodal points
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, h)))


@dataclass(frozen=True)
class ResponderRegistry:
    responders: tuple[Responder, ...]
    source: Optional[str] = None

    def __post_init__(self) -> None:
        ids = [r.id for r in self.responders]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise RegistryError(f"duplicate responder ids: {', '.join(dupes)}")
        for kind in ResponderKind:
            if not any(r.kind is kind for r in self.responders):
                raise RegistryError(f"registry has no {kind.value} responder")

    def of_kind(self, kind: ResponderKind) -> list[Responder]:
        return [r for r in self.responders if r.kind is kind]


def nearest(registry: Union[ResponderRegistry, Sequence[Responder]], fix, kind: ResponderKind) -> Responder:
    """Closest responder of ``kind``; on exact ties the first one listed wins."""
    responders = registry.responders if isinstance(registry, ResponderRegistry) else registry
    kind = ResponderKind(kind)
    best, best_d = None, math.inf
    for r in responders:
        if r.kind is not kind:
            continue
        d = haversine_m(fix, r)
        if d < best_d:
            best, best_d = r, d
    if best is None:
        raise EmptyKind(f"no {kind.value} responder registered")
    return best


def parse_registry(text: str, source: Optional[str] = None) -> ResponderRegistry:
    """Parse ``id,kind,name,phone,lat,lon`` records; ``#`` starts a comment line."""
    responders = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        row = next(csv.reader(io.StringIO(line), skipinitialspace=True))
        if len(row) != 6:
            raise RegistryError(f"expected 6 fields, got {len(row)}", lineno)
        rid, kind, name, phone, lat, lon = (v.strip() for v in row)
        try:
            responders.append(
                Responder(
                    id=rid,
                    kind=ResponderKind(kind.lower()),
                    name=name,
                    phone=phone,
                    lat=float(lat),
                    lon=float(lon),
                )
            )
        except ValueError as exc:
            raise RegistryError(str(exc), lineno) from exc
    return ResponderRegistry(tuple(responders), source=source)


def load_registry(path: Union[str, Path]) -> ResponderRegistry:
    path = Path(path)
    return parse_registry(path.read_text(encoding="utf-8"), source=str(path))


def maps_link(fix) -> str:
    lat, lon = _latlon(fix)
    return f"{MAPS_PREFIX}{_fixed6(lat)},{_fixed6(lon)}"


def _fixed6(value: float) -> str:
    text = f"{value:.6f}"
    # "-0.000000" would be a sign on a zero coordinate
    return "0.000000" if text == "-0.000000" else text


def parse_link(body: str) -> Optional[LatLon]:
    m = LINK_RE.search(body)
    if m is None:
        return None
    return float(m.group(1)), float(m.group(2))


@dataclass(frozen=True)
class Notification:
    event: DetectionEvent
    fix: GeoFix
    hospital: Responder
    police: Responder
    body: str
    link: str

    @property
    def recipients(self) -> tuple[Responder, Responder]:
        return (self.hospital, self.police)


def _seconds(millis: int) -> str:
    return str((Decimal(millis) / 1000).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def compose(event: DetectionEvent, fix: GeoFix, registry: ResponderRegistry, vehicle_id: str) -> Notification:
    if event.kind is not EventKind.TILT_ACCIDENT:
        raise ValueError("only tilt accidents are notified")
    if not vehicle_id.isascii() or not vehicle_id.isprintable():
        raise ValueError(f"vehicle id {vehicle_id!r} must be printable ASCII")
    link = maps_link(fix)
    head = "ACCIDENT "
    tail = f" t={_seconds(event.t)}s {link}" + (" STALE" if fix.stale else "")
    room = SMS_MAX_BYTES - len(head) - len(tail)
    assert room >= 0, "link alone overflows one SMS"
    body = head + vehicle_id[:room] + tail
    return Notification(
        event=event,
        fix=fix,
        hospital=nearest(registry, fix, ResponderKind.HOSPITAL),
        police=nearest(registry, fix, ResponderKind.POLICE),
        body=body,
        link=link,
    )

