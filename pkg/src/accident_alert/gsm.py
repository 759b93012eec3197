"""Text-mode SMS sending over an AT-command serial link.

The healthy dialogue, byte for byte::

    -> AT+CMGF=1\\r
    <- \\r\\nOK\\r\\n
    -> AT+CMGS="+8801711000001"\\r
    <- \\r\\n>  (prompt, no line terminator)
    -> <body>\\x1a
    <- \\r\\n+CMGS: 7\\r\\n\\r\\nOK\\r\\n

A failed expectation (timeout, ``ERROR``, ``+CMS ERROR``, unexpected line)
aborts the attempt; the whole dialogue is retried after a backoff.
Exhausting the retries is reported, never raised.
"""

from __future__ import annotations

import enum
import logging
import re
import time
from dataclasses import dataclass, field
from typing import Optional, Protocol

from .geo import SMS_MAX_BYTES, Notification

log = logging.getLogger(__name__)

CTRL_Z = b"\x1a"
ESC = b"\x1b"
DEFAULT_DEADLINE_MS = 5_000
DEFAULT_BACKOFF_MS = 2_000
DEFAULT_MAX_RETRIES = 3

_PHONE_RE = re.compile(r"^\+[0-9]{8,15}$")
_CMGS_RE = re.compile(r"^\+CMGS: *\d+$")


class SerialTransport(Protocol):
    def write(self, data: bytes) -> None: ...

    def read(self, timeout_ms: float) -> bytes:
        """Return whatever arrived within ``timeout_ms``; ``b""`` if nothing did."""
        ...


class Clock(Protocol):
    def now_ms(self) -> float: ...

    def sleep_ms(self, ms: float) -> None: ...


class SystemClock:
    def now_ms(self) -> float:
        return time.monotonic() * 1000.0

    def sleep_ms(self, ms: float) -> None:
        time.sleep(ms / 1000.0)


class VirtualClock:
    """Clock that only moves when something sleeps on it; keeps replays deterministic."""

    def __init__(self, start_ms: float = 0.0) -> None:
        self.t = start_ms

    def now_ms(self) -> float:
        return self.t

    def sleep_ms(self, ms: float) -> None:
        self.t += max(0.0, ms)


class DialogueError(Exception):
    pass


class Timeout(DialogueError):
    pass


class ModemError(DialogueError):
    pass


class Phase(str, enum.Enum):
    IDLE = "Idle"
    SET_TEXT_MODE = "SetTextMode"
    AWAIT_PROMPT = "AwaitPrompt"
    SENDING_BODY = "SendingBody"
    AWAIT_SEND_RESULT = "AwaitSendResult"


# Every phase may fall back to Idle when an attempt aborts.
TRANSITIONS = {
    Phase.IDLE: {Phase.SET_TEXT_MODE},
    Phase.SET_TEXT_MODE: {Phase.AWAIT_PROMPT, Phase.IDLE},
    Phase.AWAIT_PROMPT: {Phase.SENDING_BODY, Phase.IDLE},
    Phase.SENDING_BODY: {Phase.AWAIT_SEND_RESULT, Phase.IDLE},
    Phase.AWAIT_SEND_RESULT: {Phase.IDLE},
}


@dataclass
class DialogueState:
    phase: Phase = Phase.IDLE
    attempt: int = 0
    last_error: Optional[str] = None
    history: list[Phase] = field(default_factory=lambda: [Phase.IDLE])

    def enter(self, phase: Phase) -> None:
        if phase not in TRANSITIONS[self.phase]:
            raise RuntimeError(f"illegal dialogue transition {self.phase.value} -> {phase.value}")
        self.phase = phase
        self.history.append(phase)


Transcript = list[tuple[str, bytes]]


@dataclass(frozen=True)
class DeliveryReport:
    recipient: str
    success: bool
    attempts: int
    transcript: tuple[tuple[str, bytes], ...]
    last_error: Optional[str] = None


def healthy_attempt(recipient: str, body: bytes, seq: int) -> Transcript:
    """Expected transcript of one clean send, as the modem simulator produces it."""
    return [
        ("tx", b"AT+CMGF=1\r"),
        ("rx", b"\r\nOK\r\n"),
        ("tx", b'AT+CMGS="' + recipient.encode("ascii") + b'"\r'),
        ("rx", b"\r\n> "),
        ("tx", body + CTRL_Z),
        ("rx", b"\r\n+CMGS: %d\r\n\r\nOK\r\n" % seq),
    ]


_HEALTHY_TAIL = [
    ("tx", re.compile(rb"AT\+CMGF=1\r\Z")),
    ("rx", re.compile(rb"(\r\n)*OK\r\n\Z")),
    ("tx", re.compile(rb'AT\+CMGS="\+[0-9]{8,15}"\r\Z')),
    ("rx", re.compile(rb"(\r\n)*> \Z")),
    ("tx", re.compile(rb"[^\x1a\x1b]*\x1a\Z")),
    ("rx", re.compile(rb"(\r\n)*\+CMGS: *[0-9]+\r\n(\r\n)*OK\r\n\Z")),
]


def transcript_succeeded(transcript) -> bool:
    """True iff the transcript ends in one complete healthy dialogue."""
    tail = list(transcript)[-len(_HEALTHY_TAIL):]
    if len(tail) != len(_HEALTHY_TAIL):
        return False
    return all(d == want_d and pat.match(data) for (d, data), (want_d, pat) in zip(tail, _HEALTHY_TAIL))


def _check_body(body: bytes) -> None:
    if len(body) > SMS_MAX_BYTES:
        raise ValueError(f"body is {len(body)} bytes, limit {SMS_MAX_BYTES}")
    if any(b > 0x7F for b in body):
        raise ValueError("body must be ASCII")
    if CTRL_Z in body or ESC in body:
        raise ValueError("body may not contain Ctrl-Z or ESC")
    if re.search(rb"\r(?!\n)", body):
        raise ValueError("body contains a bare CR")


class SmsClient:
    """Sequential AT dialogue driver for one transport."""

    def __init__(
        self,
        transport: SerialTransport,
        *,
        clock: Optional[Clock] = None,
        deadline_ms: float = DEFAULT_DEADLINE_MS,
        backoff_ms: float = DEFAULT_BACKOFF_MS,
    ) -> None:
        self.transport = transport
        self.clock = clock or SystemClock()
        self.deadline_ms = deadline_ms
        self.backoff_ms = backoff_ms
        self.state = DialogueState()
        self._buf = b""
        self._transcript: Transcript = []

    def _write(self, data: bytes) -> None:
        self._transcript.append(("tx", data))
        self.transport.write(data)

    def _record_rx(self, chunk: bytes) -> None:
        if self._transcript and self._transcript[-1][0] == "rx":
            self._transcript[-1] = ("rx", self._transcript[-1][1] + chunk)
        else:
            self._transcript.append(("rx", chunk))

    def _scan(self, want: str, seen_cmgs: list) -> bool:
        """Consume complete lines from the buffer; True once ``want`` is satisfied."""
        while True:
            if want == "prompt":
                stripped = self._buf.lstrip(b"\r\n")
                if stripped.startswith(b"> "):
                    self._buf = stripped[2:]
                    return True
            nl = self._buf.find(b"\n")
            if nl < 0:
                return False
            line = self._buf[:nl].strip(b"\r").decode("latin-1").strip()
            self._buf = self._buf[nl + 1 :]
            if not line:
                continue
            if line == "ERROR" or line.startswith(("+CMS ERROR", "+CME ERROR")):
                raise ModemError(line)
            if want == "ok" and line == "OK":
                return True
            if want == "result":
                if _CMGS_RE.match(line) and not seen_cmgs:
                    seen_cmgs.append(line)
                    continue
                if line == "OK" and seen_cmgs:
                    return True
            raise ModemError(f"unexpected response {line!r}")

    def _expect(self, want: str) -> None:
        deadline = self.clock.now_ms() + self.deadline_ms
        seen_cmgs: list = []
        while not self._scan(want, seen_cmgs):
            remaining = deadline - self.clock.now_ms()
            if remaining <= 0:
                raise Timeout(f"no {want} within {self.deadline_ms} ms")
            chunk = self.transport.read(remaining)
            if chunk:
                self._record_rx(chunk)
                self._buf += chunk

    def _attempt(self, recipient: str, body: bytes) -> None:
        self._buf = b""
        self.state.enter(Phase.SET_TEXT_MODE)
        self._write(b"AT+CMGF=1\r")
        self._expect("ok")
        self.state.enter(Phase.AWAIT_PROMPT)
        self._write(b'AT+CMGS="' + recipient.encode("ascii") + b'"\r')
        self._expect("prompt")
        self.state.enter(Phase.SENDING_BODY)
        self._write(body + CTRL_Z)
        self.state.enter(Phase.AWAIT_SEND_RESULT)
        self._expect("result")
        self.state.enter(Phase.IDLE)

    def send(self, recipient: str, body, max_retries: int = DEFAULT_MAX_RETRIES) -> DeliveryReport:
        if not _PHONE_RE.match(recipient):
            raise ValueError(f"bad recipient {recipient!r}")
        if isinstance(body, str):
            body = body.encode("ascii")
        _check_body(body)
        if max_retries < 0:
            raise ValueError("max_retries must be >= 0")

        self.state = DialogueState()
        self._transcript = []
        success = False
        for attempt in range(1, max_retries + 2):
            self.state.attempt = attempt
            try:
                self._attempt(recipient, body)
            except DialogueError as exc:
                self.state.last_error = f"{type(exc).__name__}: {exc}"
                self.state.enter(Phase.IDLE)
                log.info("SMS to %s attempt %d failed: %s", recipient, attempt, self.state.last_error)
                if attempt <= max_retries:
                    self.clock.sleep_ms(self.backoff_ms)
                continue
            success = True
            break
        return DeliveryReport(
            recipient=recipient,
            success=success,
            attempts=self.state.attempt,
            transcript=tuple(self._transcript),
            last_error=None if success else self.state.last_error,
        )

    def notify_all(self, notification: Notification, max_retries: int = DEFAULT_MAX_RETRIES) -> list[DeliveryReport]:
        # hospital first, and a failure never skips the police send
        return [self.send(r.phone, notification.body, max_retries) for r in notification.recipients]


def send_sms(
    transport: SerialTransport,
    recipient: str,
    body,
    max_retries: int = DEFAULT_MAX_RETRIES,
    **client_opts,
) -> DeliveryReport:
    return SmsClient(transport, **client_opts).send(recipient, body, max_retries)


def notify_all(
    transport: SerialTransport,
    notification: Notification,
    max_retries: int = DEFAULT_MAX_RETRIES,
    **client_opts,
) -> list[DeliveryReport]:
    return SmsClient(transport, **client_opts).notify_all(notification, max_retries)
