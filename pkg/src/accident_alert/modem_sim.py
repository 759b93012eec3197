"""In-process GSM modem double speaking the text-mode SMS subset of AT.

Faults are scripted per command index (0-based, counting every CR-terminated
command line and every Ctrl-Z terminated message body the modem receives)::

    # fail the first CMGS, drop the third command
    cmd_index:1 action:error
    cmd_index:2 action:drop
    cmd_index:* action:garbage

``*`` matches every command. The first matching rule wins.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Union

from .gsm import VirtualClock

OK = b"\r\nOK\r\n"
ERROR = b"\r\nERROR\r\n"
PROMPT = b"\r\n> "
GARBAGE = b"\r\n\xff\xfe#@!~\r\n"
ACTIONS = ("error", "drop", "garbage")

_RULE_RE = re.compile(r"^cmd_index:(\*|\d+)\s+action:(\w+)$")
_CMGS_RE = re.compile(rb'^AT\+CMGS="([^"]*)"$', re.IGNORECASE)


class FaultScriptError(ValueError):
    pass


@dataclass(frozen=True)
class FaultRule:
    cmd_index: Optional[int]  # None matches every command
    action: str

    def matches(self, index: int) -> bool:
        return self.cmd_index is None or self.cmd_index == index


def parse_fault_script(text: str) -> tuple[FaultRule, ...]:
    rules = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        m = _RULE_RE.match(line)
        if m is None:
            raise FaultScriptError(f"line {lineno}: cannot parse fault rule {line!r}")
        index, action = m.groups()
        if action not in ACTIONS:
            raise FaultScriptError(f"line {lineno}: unknown action {action!r}")
        rules.append(FaultRule(None if index == "*" else int(index), action))
    return tuple(rules)


def load_fault_script(path: Union[str, Path]) -> tuple[FaultRule, ...]:
    return parse_fault_script(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ModemState:
    faults: tuple[FaultRule, ...] = ()
    text_mode: bool = False
    in_body: bool = False
    buffer: bytes = b""
    cmd_index: int = 0
    seq: int = 0


def _fault_for(state: ModemState) -> Optional[str]:
    for rule in state.faults:
        if rule.matches(state.cmd_index):
            return rule.action
    return None


def _cms_error(code: int) -> bytes:
    return b"\r\n+CMS ERROR: %d\r\n" % code


def _run_command(state: ModemState, line: bytes) -> tuple[ModemState, bytes]:
    cmd = line.strip().upper()
    fault = _fault_for(state)
    state = replace(state, cmd_index=state.cmd_index + 1)
    is_cmgs = cmd.startswith(b"AT+CMGS")
    if fault == "drop":
        return state, b""
    if fault == "garbage":
        return state, GARBAGE
    if fault == "error":
        return state, _cms_error(500) if is_cmgs else ERROR

    if cmd in (b"AT", b"ATE0", b"ATE1", b"ATZ"):
        return state, OK
    if cmd == b"AT+CMGF=1":
        return replace(state, text_mode=True), OK
    if cmd == b"AT+CMGF=0":
        return replace(state, text_mode=False), OK
    if cmd == b"AT+CMGF?":
        return state, b"\r\n+CMGF: %d\r\n" % state.text_mode + OK
    if is_cmgs:
        if _CMGS_RE.match(line.strip()) is None:
            return state, ERROR
        if not state.text_mode:
            return state, _cms_error(302)
        return replace(state, in_body=True), PROMPT
    return state, ERROR


def _finish_body(state: ModemState, terminator: bytes) -> tuple[ModemState, bytes]:
    fault = _fault_for(state)
    state = replace(state, cmd_index=state.cmd_index + 1, in_body=False)
    if terminator == b"\x1b":
        return state, OK
    if fault == "drop":
        return state, b""
    if fault == "garbage":
        return state, GARBAGE
    if fault == "error":
        return state, _cms_error(500)
    seq = state.seq + 1
    return replace(state, seq=seq), b"\r\n+CMGS: %d\r\n" % seq + OK


def modem_sim_respond(state: ModemState, incoming: bytes) -> tuple[ModemState, bytes]:
    """Feed bytes to the modem; return its new state and everything it emits."""
    state = replace(state, buffer=state.buffer + incoming)
    out = b""
    while state.buffer:
        buf = state.buffer
        if state.in_body:
            ends = [i for i in (buf.find(b"\x1a"), buf.find(b"\x1b")) if i >= 0]
            if not ends:
                break
            end = min(ends)
            state = replace(state, buffer=buf[end + 1 :])
            state, resp = _finish_body(state, buf[end : end + 1])
        else:
            cr = buf.find(b"\r")
            if cr < 0:
                break
            line = buf[:cr]
            state = replace(state, buffer=buf[cr + 1 :])
            if not line.strip():
                continue
            state, resp = _run_command(state, line)
        out += resp
    return state, out


class SimulatedModem:
    def __init__(self, faults: tuple[FaultRule, ...] = ()) -> None:
        self.state = ModemState(faults=tuple(faults))

    def respond(self, incoming: bytes) -> bytes:
        self.state, out = modem_sim_respond(self.state, incoming)
        return out


class SimulatedSerial:
    """SerialTransport backed by a :class:`SimulatedModem` and a virtual clock.

    ``chunk_size`` controls fragmentation: ``None`` hands over everything
    pending per read, an int caps each read, and a callable receives the
    pending length and returns how many bytes to deliver.
    """

    def __init__(
        self,
        modem: Optional[SimulatedModem] = None,
        clock: Optional[VirtualClock] = None,
        chunk_size: Union[None, int, Callable[[int], int]] = None,
    ) -> None:
        self.modem = modem or SimulatedModem()
        self.clock = clock or VirtualClock()
        self.chunk_size = chunk_size
        self._pending = b""

    def write(self, data: bytes) -> None:
        self._pending += self.modem.respond(data)

    def read(self, timeout_ms: float) -> bytes:
        if not self._pending:
            self.clock.sleep_ms(timeout_ms)
            return b""
        if self.chunk_size is None:
            n = len(self._pending)
        elif callable(self.chunk_size):
            n = max(1, min(len(self._pending), self.chunk_size(len(self._pending))))
        else:
            n = self.chunk_size
        chunk, self._pending = self._pending[:n], self._pending[n:]
        return chunk
