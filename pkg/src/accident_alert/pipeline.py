"""Replay a trace through detection, location and notification.

The modem is always the in-process simulator on a virtual clock, so a
``(trace, config, fault script)`` triple fully determines every output byte.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

from . import metrics
from .detection import DetectionConfig, Detector
from .geo import Notification, ResponderRegistry, compose, load_registry
from .gsm import DEFAULT_BACKOFF_MS, DEFAULT_DEADLINE_MS, DEFAULT_MAX_RETRIES, DeliveryReport, SmsClient, VirtualClock
from .modem_sim import FaultRule, SimulatedModem, SimulatedSerial, load_fault_script
from .nmea import NmeaError, NoFix, Unsupported, parse_sentence, to_geo_fix
from .telemetry import DetectionEvent, EventKind, GeoFix, NmeaLine
from .trace import TraceFile

log = logging.getLogger(__name__)

REPORT_FORMAT = "accident-alert-report/1"


@dataclass(frozen=True)
class PipelineConfig:
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    registry_path: Optional[str] = None
    staleness_ms: int = 30_000
    dedup_ms: int = 5_000
    fault_script_path: Optional[str] = None
    max_retries: int = DEFAULT_MAX_RETRIES
    deadline_ms: int = DEFAULT_DEADLINE_MS
    backoff_ms: int = DEFAULT_BACKOFF_MS

    def __post_init__(self) -> None:
        for name in ("staleness_ms", "dedup_ms", "deadline_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.backoff_ms < 0 or self.max_retries < 0:
            raise ValueError("backoff_ms and max_retries must be non-negative")


def load_config(path: Union[str, Path]) -> PipelineConfig:
    """Read a JSON config; unknown keys are rejected rather than ignored."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    detection = DetectionConfig(**data.pop("detection", {}))
    return PipelineConfig(detection=detection, **data)


@dataclass(frozen=True)
class LogEntry:
    t: int
    kind: str
    detail: str

    def __str__(self) -> str:
        return f"{self.t:>9} {self.kind:<20} {self.detail}"


@dataclass
class RunResult:
    vehicle_id: str
    deliveries: list[DeliveryReport]
    records: list[metrics.TrialRecord]
    log: list[LogEntry]
    notifications: list[Notification]
    proximity_warnings: int

    @property
    def report(self) -> metrics.AccuracyReport:
        if not self.records:
            return metrics.ZERO
        return metrics.accumulate(self.records)


@dataclass
class _Trial:
    t: int
    detected: bool
    located: bool
    notified: bool


def run(
    trace: TraceFile,
    cfg: PipelineConfig,
    registry: Optional[ResponderRegistry] = None,
    faults: Optional[tuple[FaultRule, ...]] = None,
    place_start: int = 1,
) -> RunResult:
    """Replay ``trace``; runtime failures become log entries and trial outcomes."""
    if registry is None:
        if cfg.registry_path is None:
            raise ValueError("no responder registry given")
        registry = load_registry(cfg.registry_path)
    if faults is None:
        faults = load_fault_script(cfg.fault_script_path) if cfg.fault_script_path else ()

    clock = VirtualClock()
    transport = SimulatedSerial(SimulatedModem(faults), clock=clock)
    client = SmsClient(transport, clock=clock, deadline_ms=cfg.deadline_ms, backoff_ms=cfg.backoff_ms)
    detector = Detector(cfg.detection)

    entries: list[LogEntry] = []
    deliveries: list[DeliveryReport] = []
    notifications: list[Notification] = []
    trials: list[_Trial] = []
    fixes: list[GeoFix] = []
    last_accepted: Optional[int] = None
    proximity = 0

    def note(t: int, kind: str, detail: str) -> None:
        entries.append(LogEntry(t, kind, detail))

    def handle_accident(ev: DetectionEvent) -> None:
        if not fixes:
            note(ev.t, "LocationFailure", "no GPS fix since trace start; notification skipped")
            # no dispatch was attempted, so no delivery failed
            trials.append(_Trial(ev.t, True, False, True))
            return
        last = fixes[-1]
        age = ev.t - last.t
        fix = replace(last, stale=age > cfg.staleness_ms)
        if fix.stale:
            note(ev.t, "StaleFix", f"last fix is {age} ms old")
        notification = compose(ev, fix, registry, trace.vehicle_id)
        notifications.append(notification)
        note(ev.t, "Notification", f"{notification.hospital.id},{notification.police.id} {notification.body!r}")
        reports = client.notify_all(notification, cfg.max_retries)
        for r in reports:
            status = "ok" if r.success else f"FAILED ({r.last_error})"
            note(ev.t, "Delivery", f"{r.recipient} attempts={r.attempts} {status}")
        deliveries.extend(reports)
        trials.append(_Trial(ev.t, True, not fix.stale, all(r.success for r in reports)))

    for rec in trace.records:
        if isinstance(rec, NmeaLine):
            try:
                fixes.append(to_geo_fix(parse_sentence(rec), rec.t))
            except Unsupported as exc:
                note(rec.t, "NmeaSkipped", exc.sentence.type)
            except NoFix as exc:
                note(rec.t, "NoFix", str(exc))
            except NmeaError as exc:
                note(rec.t, "NmeaRejected", f"{type(exc).__name__}: {exc}")
            continue
        for ev in detector.feed(rec):
            if ev.kind is EventKind.PROXIMITY_WARNING:
                proximity += 1
                note(ev.t, "ProximityWarning", f"{ev.sensor_id} {ev.trigger_value} cm")
                continue
            note(ev.t, "TiltAccident", f"axis={ev.axis.value} value={ev.trigger_value}")
            if last_accepted is not None and ev.t - last_accepted < cfg.dedup_ms:
                note(ev.t, "Deduplicated", f"within {cfg.dedup_ms} ms of accident at {last_accepted}")
                continue
            last_accepted = ev.t
            handle_accident(ev)

    trials.extend(_missed(trace, trials, fixes, cfg, note))
    trials.sort(key=lambda tr: tr.t)
    records = [
        metrics.TrialRecord(place_start + i, tr.detected, tr.located, tr.notified) for i, tr in enumerate(trials)
    ]
    return RunResult(trace.vehicle_id, deliveries, records, entries, notifications, proximity)


def _missed(trace: TraceFile, trials: list[_Trial], fixes: list[GeoFix], cfg: PipelineConfig, note) -> list[_Trial]:
    """Trials for staged accidents that no accepted detection answered.

    Each staged time owns the interval up to the next staged time.
    """
    missed = []
    bounds = list(trace.staged_ms) + [None]
    for start, end in zip(bounds, bounds[1:]):
        if any(tr.t >= start and (end is None or tr.t < end) for tr in trials):
            continue
        known = [f for f in fixes if f.t <= start]
        located = bool(known) and start - known[-1].t <= cfg.staleness_ms
        note(start, "MissedAccident", "staged accident produced no confirmed detection")
        # nothing was dispatched, so no delivery failed
        missed.append(_Trial(start, False, located, True))
    return missed


# --- output documents -------------------------------------------------------


def _yes(flag: bool) -> str:
    return "Yes" if flag else "No"


def report_document(result: RunResult) -> dict:
    return {
        "format": REPORT_FORMAT,
        "vehicles": [result.vehicle_id],
        "metrics": result.report.to_dict(),
        "proximity_warnings": result.proximity_warnings,
        "trials": [
            {
                "place_no": r.place_no,
                "vehicle_id": result.vehicle_id,
                "accident_detection": _yes(r.detected),
                "exact_location_tracking": _yes(r.located),
                "notification_sending": _yes(r.notified),
            }
            for r in result.records
        ],
    }


def merge_documents(docs: list[dict]) -> dict:
    """Combine shard reports; trial rows are renumbered in shard order."""
    total = metrics.ZERO
    trials = []
    vehicles: list[str] = []
    warnings = 0
    for doc in docs:
        if doc.get("format") != REPORT_FORMAT:
            raise ValueError(f"not a report document: format={doc.get('format')!r}")
        total = metrics.merge(total, metrics.AccuracyReport.from_dict(doc["metrics"]))
        warnings += doc["proximity_warnings"]
        vehicles.extend(doc["vehicles"])
        for row in doc["trials"]:
            trials.append(dict(row, place_no=len(trials) + 1))
    return {
        "format": REPORT_FORMAT,
        "vehicles": vehicles,
        "metrics": total.to_dict(),
        "proximity_warnings": warnings,
        "trials": trials,
    }


def dump_document(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def transcript_text(deliveries: list[DeliveryReport]) -> str:
    """Human-auditable transcript dump; bytes shown as JSON string literals."""
    lines = []
    for i, d in enumerate(deliveries, start=1):
        lines.append(f"# delivery {i} to {d.recipient} success={str(d.success).lower()} attempts={d.attempts}")
        for direction, data in d.transcript:
            lines.append(f"{direction} {json.dumps(data.decode('latin-1'))}")
    return "\n".join(lines) + "\n"


def log_text(result: RunResult) -> str:
    return "".join(f"{e}\n" for e in result.log)


# Same shape as the field trials: place 6 missed, places 9 and 15 without GPS.
FIELD_TRIAL_SUITE = tuple(
    ("spike_only" if place == 6 else "no_gps_crash" if place in (9, 15) else "clean_crash", place)
    for place in range(1, 21)
)
