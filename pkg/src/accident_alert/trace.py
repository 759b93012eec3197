"""Trace files: one JSON object per line, header first.

See ``docs/trace-format.md`` for the field layout. Traces replace live
sensors; :func:`synthesize_trace` produces desk-scale stand-ins for field
trials.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .nmea import NmeaSentence, format_coordinate, serialize
from .telemetry import (
    AccelSample,
    NmeaLine,
    Sample,
    UltrasonicSample,
    ValidationError,
    validate_sample,
)

TRACE_VERSION = 1
SCENARIOS = ("clean_crash", "no_gps_crash", "proximity_only", "quiet", "spike_only")


class TraceError(ValueError):
    def __init__(self, message: str, line: int | None = None) -> None:
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class ParseError(TraceError):
    pass


class VersionError(TraceError):
    pass


class OrderError(TraceError):
    pass


@dataclass(frozen=True)
class TraceFile:
    vehicle_id: str
    records: tuple[Sample, ...]
    version: int = TRACE_VERSION
    # ground truth: when accidents were staged, for scoring missed detections
    staged_ms: tuple[int, ...] = ()
    line_numbers: tuple[int, ...] = field(default=(), compare=False)


def _record_from_json(obj: dict) -> Sample:
    kind = obj.get("type")
    if kind == "accel":
        return AccelSample(t=obj["t"], x=obj["x"], y=obj["y"], z=obj["z"])
    if kind == "ultrasonic":
        return UltrasonicSample(t=obj["t"], sensor_id=obj["sensor"], range_cm=obj["range_cm"])
    if kind == "nmea":
        raw = obj["raw"]
        if not isinstance(raw, str) or not raw.isascii():
            raise ValidationError("nmea raw must be an ASCII string")
        return NmeaLine(t=obj["t"], raw=raw.encode("ascii"))
    raise ValidationError(f"unknown record type {kind!r}")


def _record_to_json(rec: Sample) -> dict:
    if isinstance(rec, AccelSample):
        return {"type": "accel", "t": rec.t, "x": rec.x, "y": rec.y, "z": rec.z}
    if isinstance(rec, UltrasonicSample):
        return {"type": "ultrasonic", "t": rec.t, "sensor": rec.sensor_id, "range_cm": rec.range_cm}
    return {"type": "nmea", "t": rec.t, "raw": rec.raw.decode("ascii")}


def parse_trace(text: str) -> TraceFile:
    header = None
    records: list[Sample] = []
    lines: list[int] = []
    last_t = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", lineno) from exc
        if not isinstance(obj, dict):
            raise ParseError("record is not a JSON object", lineno)
        if header is None:
            if obj.get("type") != "header":
                raise ParseError("first record must be the header", lineno)
            if obj.get("version") != TRACE_VERSION:
                raise VersionError(f"unsupported trace version {obj.get('version')!r}", lineno)
            vehicle_id = obj.get("vehicle_id")
            staged = obj.get("staged_ms", [])
            if not isinstance(vehicle_id, str) or not vehicle_id:
                raise ParseError("header needs a non-empty vehicle_id", lineno)
            if not isinstance(staged, list) or not all(isinstance(s, int) and s >= 0 for s in staged):
                raise ParseError("staged_ms must be a list of non-negative integers", lineno)
            header = (vehicle_id, tuple(sorted(staged)))
            continue
        try:
            rec = validate_sample(_record_from_json(obj))
        except KeyError as exc:
            raise ParseError(f"missing field {exc.args[0]!r}", lineno) from exc
        except ValidationError as exc:
            raise ParseError(str(exc), lineno) from exc
        if last_t is not None and rec.t < last_t:
            raise OrderError(f"timestamp {rec.t} after {last_t}", lineno)
        last_t = rec.t
        records.append(rec)
        lines.append(lineno)
    if header is None:
        raise ParseError("empty trace: no header")
    return TraceFile(
        vehicle_id=header[0],
        records=tuple(records),
        staged_ms=header[1],
        line_numbers=tuple(lines),
    )


def load_trace(path: Union[str, Path]) -> TraceFile:
    return parse_trace(Path(path).read_text(encoding="utf-8"))


def dump_trace(trace: TraceFile) -> str:
    header = {
        "type": "header",
        "version": trace.version,
        "vehicle_id": trace.vehicle_id,
        "staged_ms": list(trace.staged_ms),
    }
    out = [json.dumps(header, separators=(",", ":"))]
    out.extend(json.dumps(_record_to_json(r), separators=(",", ":")) for r in trace.records)
    return "\n".join(out) + "\n"


def save_trace(trace: TraceFile, path: Union[str, Path]) -> None:
    Path(path).write_text(dump_trace(trace), encoding="utf-8")


# --- synthesis -------------------------------------------------------------

DURATION_MS = 30_000
ACCEL_PERIOD_MS = 100
RANGE_PERIOD_MS = 500
GPS_PERIOD_MS = 1_000

# resting ADC counts; well under the re-arm level of both tilt thresholds
NOMINAL = {"x": 270, "y": 290, "z": 380}
NOISE = 8

START_POINTS = [
    (22.3569, 91.7832),  # Chittagong
    (23.8103, 90.4125),  # Dhaka
    (24.8949, 91.8687),  # Sylhet
    (22.8456, 89.5403),  # Khulna
    (24.3745, 88.6042),  # Rajshahi
]


def _nominal(rng: random.Random, axis: str) -> int:
    return NOMINAL[axis] + rng.randint(-NOISE, NOISE)


def _gps_lines(rng: random.Random, t: int, lat: float, lon: float, with_rmc: bool) -> list[NmeaLine]:
    secs = 8 * 3600 + t // 1000
    hms = f"{secs // 3600:02d}{secs // 60 % 60:02d}{secs % 60:02d}.{t % 1000 // 10:02d}"
    lat_s, ns = format_coordinate(lat, True)
    lon_s, ew = format_coordinate(lon, False)
    sentences = [
        NmeaSentence.build(
            "GP",
            "GGA",
            [hms, lat_s, ns, lon_s, ew, "1", f"{rng.randint(5, 11):02d}", f"{rng.uniform(0.7, 1.6):.1f}",
             f"{rng.uniform(4, 30):.1f}", "M", "-46.9", "M", "", ""],
        )
    ]
    if with_rmc:
        sentences.append(
            NmeaSentence.build(
                "GP",
                "RMC",
                [hms, "A", lat_s, ns, lon_s, ew, f"{rng.uniform(0, 40):05.1f}", f"{rng.uniform(0, 359):05.1f}",
                 "181026", "", "", "A"],
            )
        )
    if rng.random() < 0.2:
        # satellites-in-view noise the pipeline should skip
        sentences.append(NmeaSentence.build("GP", "GSV", ["1", "1", "01", "12", "40", "083", "46"]))
    return [NmeaLine(t=t + i, raw=serialize(s)[:-2]) for i, s in enumerate(sentences)]


def _spike_plan(rng: random.Random, start: int, debounce: int) -> set[int]:
    """Sample indices of short over-threshold bursts, each shorter than ``debounce``."""
    plan = set()
    i = start
    for _ in range(rng.randint(2, 4)):
        length = rng.randint(1, max(1, debounce - 1))
        plan.update(range(i, i + length))
        i += length + rng.randint(2, 6)
    return plan


def synthesize_trace(scenario: str, seed: int, debounce_samples: int = 3) -> TraceFile:
    """Build a deterministic trace for ``scenario``; same arguments, same trace."""
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    rng = random.Random(f"{scenario}:{seed}")
    lat, lon = rng.choice(START_POINTS)
    lat += rng.uniform(-0.05, 0.05)
    lon += rng.uniform(-0.05, 0.05)
    heading = (rng.uniform(-1, 1) * 2e-4, rng.uniform(-1, 1) * 2e-4)

    crash = scenario in ("clean_crash", "no_gps_crash")
    staged_t = rng.randrange(8_000, 18_000, ACCEL_PERIOD_MS) if crash or scenario == "spike_only" else None
    roll = rng.choice(("x", "y", "xy"))
    spikes = _spike_plan(rng, staged_t // ACCEL_PERIOD_MS, debounce_samples) if scenario == "spike_only" else set()
    close_calls = sorted(rng.sample(range(4, DURATION_MS // RANGE_PERIOD_MS - 4), 2)) if scenario == "proximity_only" else []
    close_plan = {}
    for k in close_calls:
        sensor = rng.choice(("front", "rear"))
        for j in range(rng.randint(1, 3)):
            close_plan[(k + j, sensor)] = round(rng.uniform(1.0, 4.9), 1)

    records: list[Sample] = []
    thresholds = {"x": 310, "y": 340}
    for t in range(0, DURATION_MS, ACCEL_PERIOD_MS):
        idx = t // ACCEL_PERIOD_MS
        crashed = crash and t >= staged_t
        if t % GPS_PERIOD_MS == 0 and scenario != "no_gps_crash":
            if not crashed:
                lat += heading[0]
                lon += heading[1]
            # offset keeps GPS lines from sharing a timestamp with accel samples
            records.extend(_gps_lines(rng, t + 50, lat, lon, with_rmc=(t // GPS_PERIOD_MS) % 2 == 0))
        sample = {axis: _nominal(rng, axis) for axis in NOMINAL}
        if crashed:
            for axis in roll:
                sample[axis] = min(1023, thresholds[axis] + rng.randint(15, 150))
        elif idx in spikes:
            axis = rng.choice(("x", "y"))
            sample[axis] = thresholds[axis] + rng.randint(5, 100)
        records.append(AccelSample(t=t, **sample))
        if t % RANGE_PERIOD_MS == 0:
            k = t // RANGE_PERIOD_MS
            for sensor in ("front", "rear"):
                r = close_plan.get((k, sensor), round(rng.uniform(20.0, 400.0), 1))
                records.append(UltrasonicSample(t=t, sensor_id=sensor, range_cm=r))
    records.sort(key=lambda r: r.t)
    staged = (staged_t,) if staged_t is not None else ()
    return TraceFile(
        vehicle_id=f"VEH-{seed:04d}",
        records=tuple(records),
        staged_ms=staged,
    )
