"""Tilt and proximity detection over accelerometer and ultrasonic samples.

Thresholds are raw 10-bit ADC counts compared with ``>=``. An axis fires once
when ``debounce_samples`` consecutive samples sit at or above its threshold,
then stays quiet until a sample drops below ``threshold - rearm_below_margin``.

The functions here are pure transitions: ``(state, sample, cfg) -> (state, events)``.
:class:`Detector` wraps them for callers that prefer a mutable object.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .telemetry import (
    ADC_MAX,
    ULTRASONIC_SENSORS,
    AccelSample,
    Axis,
    DetectionEvent,
    EventKind,
    UltrasonicSample,
)

AXES = (Axis.X, Axis.Y, Axis.Z)


class OutOfOrder(ValueError):
    def __init__(self, last: int, got: int) -> None:
        super().__init__(f"timestamp regression: {got} after {last}")
        self.last = last
        self.got = got


@dataclass(frozen=True)
class DetectionConfig:
    threshold_x: int = 310
    threshold_y: int = 340
    # Z is wired but has no published threshold; None keeps it out of the comparison.
    threshold_z: Optional[int] = None
    proximity_cm: float = 5.0
    debounce_samples: int = 3
    rearm_below_margin: int = 10

    def __post_init__(self) -> None:
        for name in ("threshold_x", "threshold_y", "threshold_z"):
            value = getattr(self, name)
            if value is None and name == "threshold_z":
                continue
            if not isinstance(value, int) or not 0 < value <= ADC_MAX:
                raise ValueError(f"{name}={value!r} must be an integer in (0, {ADC_MAX}]")
        if not self.proximity_cm > 0:
            raise ValueError("proximity_cm must be positive")
        if not isinstance(self.debounce_samples, int) or self.debounce_samples < 1:
            raise ValueError("debounce_samples must be >= 1")
        if not isinstance(self.rearm_below_margin, int) or self.rearm_below_margin < 0:
            raise ValueError("rearm_below_margin must be a non-negative integer")

    def threshold(self, axis: Axis) -> Optional[int]:
        return {Axis.X: self.threshold_x, Axis.Y: self.threshold_y, Axis.Z: self.threshold_z}[axis]


@dataclass(frozen=True)
class DetectorState:
    """Per-stream detector state, indexed by axis in X, Y, Z order."""

    runs: tuple[int, int, int] = (0, 0, 0)
    armed: tuple[bool, bool, bool] = (True, True, True)
    latched: frozenset[str] = frozenset()
    last_t: Optional[int] = None

    def run(self, axis: Axis) -> int:
        return self.runs[AXES.index(axis)]

    def is_armed(self, axis: Axis) -> bool:
        return self.armed[AXES.index(axis)]


def _advance_clock(state: DetectorState, t: int) -> DetectorState:
    if state.last_t is not None and t < state.last_t:
        raise OutOfOrder(state.last_t, t)
    return replace(state, last_t=t)


def ingest_accel(
    state: DetectorState, sample: AccelSample, cfg: DetectionConfig
) -> tuple[DetectorState, list[DetectionEvent]]:
    state = _advance_clock(state, sample.t)
    runs = list(state.runs)
    armed = list(state.armed)
    events = []
    for i, axis in enumerate(AXES):
        threshold = cfg.threshold(axis)
        if threshold is None:
            continue
        value = getattr(sample, axis.value.lower())
        if value >= threshold:
            before = runs[i]
            runs[i] = min(before + 1, cfg.debounce_samples)
            if runs[i] == cfg.debounce_samples and before < cfg.debounce_samples and armed[i]:
                events.append(
                    DetectionEvent(t=sample.t, kind=EventKind.TILT_ACCIDENT, axis=axis, trigger_value=value)
                )
                armed[i] = False
        else:
            runs[i] = 0
            if value < threshold - cfg.rearm_below_margin:
                armed[i] = True
    return replace(state, runs=tuple(runs), armed=tuple(armed)), events


def ingest_ultrasonic(
    state: DetectorState, sample: UltrasonicSample, cfg: DetectionConfig
) -> tuple[DetectorState, list[DetectionEvent]]:
    if sample.sensor_id not in ULTRASONIC_SENSORS:
        raise ValueError(f"unknown ultrasonic sensor {sample.sensor_id!r}")
    state = _advance_clock(state, sample.t)
    latched = state.latched
    events = []
    if sample.range_cm < cfg.proximity_cm:
        if sample.sensor_id not in latched:
            events.append(
                DetectionEvent(
                    t=sample.t,
                    kind=EventKind.PROXIMITY_WARNING,
                    trigger_value=sample.range_cm,
                    sensor_id=sample.sensor_id,
                )
            )
            latched = latched | {sample.sensor_id}
    elif sample.range_cm >= 2 * cfg.proximity_cm:
        latched = latched - {sample.sensor_id}
    return replace(state, latched=latched), events


def reset(state: Optional[DetectorState] = None) -> DetectorState:
    return DetectorState()


class Detector:
    """Mutable convenience wrapper holding one stream's state."""

    def __init__(self, cfg: Optional[DetectionConfig] = None) -> None:
        self.cfg = cfg or DetectionConfig()
        self.state = DetectorState()

    def feed(self, sample) -> list[DetectionEvent]:
        if isinstance(sample, AccelSample):
            self.state, events = ingest_accel(self.state, sample, self.cfg)
        elif isinstance(sample, UltrasonicSample):
            self.state, events = ingest_ultrasonic(self.state, sample, self.cfg)
        else:
            raise TypeError(f"detector does not consume {type(sample).__name__}")
        return events

    def reset(self) -> None:
        self.state = reset(self.state)
