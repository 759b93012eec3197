"""Hardware-free vehicle accident detection, location and SMS notification."""

from .detection import DetectionConfig, Detector, DetectorState, ingest_accel, ingest_ultrasonic, reset
from .geo import ResponderRegistry, compose, haversine_m, load_registry, maps_link, nearest
from .gsm import DeliveryReport, SmsClient, notify_all, send_sms
from .metrics import AccuracyReport, TrialRecord, accumulate, merge
from .nmea import NmeaSentence, checksum, parse_sentence, serialize, to_geo_fix
from .pipeline import PipelineConfig, run
from .telemetry import (
    AccelSample,
    DetectionEvent,
    GeoFix,
    NmeaLine,
    Responder,
    UltrasonicSample,
    validate_sample,
)
from .trace import TraceFile, load_trace, synthesize_trace

__version__ = "0.1.0"
