"""Discrete-time virtual hardware substrate.

Logic lines with recorded transition traces, a simplified atomic I2C
transaction channel, and a millisecond simulation clock.  A Bus is
single-owner: it is stepped from one caller and never shared between
threads.  Time is integer milliseconds since power-on.
"""

from __future__ import annotations

import bisect
import heapq
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Callable


class LogicLevel(IntEnum):
    LOW = 0
    HIGH = 1


LOW = LogicLevel.LOW
HIGH = LogicLevel.HIGH

I2C_ADDRESS_MIN = 0x08
I2C_ADDRESS_MAX = 0x77


class Direction(Enum):
    READ = "read"
    WRITE = "write"


class Status(Enum):
    ACK = "ack"
    NACK = "nack"


class BusError(Exception):
    """Raised on misuse of the bus (unknown line, time travel, bad dt)."""


@dataclass
class HighInterval:
    """Half-open interval [start, end) during which a line was HIGH."""

    start: int
    end: int
    open_ended: bool = False

    def __iter__(self):
        return iter((self.start, self.end))

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass
class I2CTransaction:
    address: int
    direction: Direction
    payload: bytes
    status: Status


@dataclass
class PinTrace:
    """Time-ordered logic-level transitions on one named line.

    Transitions are strictly increasing in time and alternate levels;
    the level before the first transition is ``initial_level``.
    """

    line_id: str
    initial_level: LogicLevel = LOW
    transitions: list[tuple[int, LogicLevel]] = field(default_factory=list)

    def level_at(self, t: int) -> LogicLevel:
        """Level in force at time t (last transition at or before t)."""
        times = [tt for tt, _ in self.transitions]
        i = bisect.bisect_right(times, t)
        if i == 0:
            return self.initial_level
        return self.transitions[i - 1][1]

    def last_time(self) -> int:
        return self.transitions[-1][0] if self.transitions else -1

    def current_level(self) -> LogicLevel:
        return self.transitions[-1][1] if self.transitions else self.initial_level

    def append(self, t: int, level: LogicLevel) -> bool:
        """Record the line being driven to ``level`` at time ``t``.

        Returns True if a transition was appended, False if the drive was
        an idempotent no-op.  Raises BusError when t precedes the last
        recorded transition.
        """
        level = LogicLevel(level)
        if level == self.current_level():
            return False
        if self.transitions and t <= self.transitions[-1][0]:
            raise BusError(
                f"time travel: drive on {self.line_id!r} at t={t} not after "
                f"last transition t={self.transitions[-1][0]}"
            )
        self.transitions.append((t, level))
        return True

    def rising_edges(self) -> list[int]:
        return [t for t, lvl in self.transitions if lvl == HIGH]

    def falling_edges(self) -> list[int]:
        return [t for t, lvl in self.transitions if lvl == LOW]


def high_intervals(trace: PinTrace, run_end: int | None = None) -> list[HighInterval]:
    """Half-open [t0, t1) intervals during which the trace is HIGH.

    An unterminated HIGH at the end of the run yields an interval closed
    at ``run_end`` and flagged open-ended.  ``run_end`` defaults to the
    last transition time.
    """
    out: list[HighInterval] = []
    start: int | None = 0 if trace.initial_level == HIGH else None
    for t, lvl in trace.transitions:
        if lvl == HIGH and start is None:
            start = t
        elif lvl == LOW and start is not None:
            out.append(HighInterval(start, t))
            start = None
    if start is not None:
        end = run_end if run_end is not None else trace.last_time()
        if end > start:
            out.append(HighInterval(start, end, open_ended=True))
        elif end == start:
            out.append(HighInterval(start, end, open_ended=True))
    return out


@dataclass
class ExposureRecord:
    """One device emission crossing the isolation boundary."""

    at: int
    channel: str  # "PIN" or "SERIAL"
    detail: str  # line_id for PIN, hex address for SERIAL
    bits: int


class Bus:
    """Single-threaded simulation bus: lines, serial responders, clock."""

    def __init__(self) -> None:
        self.clock: int = 0
        self.lines: dict[str, PinTrace] = {}
        self.serial_responders: dict[int, object] = {}
        self.exposure_log: list[ExposureRecord] = []
        self.i2c_log: list[tuple[int, I2CTransaction]] = []
        self.virtual_lines: dict[str, Callable[["Bus"], PinTrace]] = {}
        self._steppers: list[tuple[int, Callable[[int], None]]] = []
        self._next_step: list[int] = []

    # -- lines -----------------------------------------------------------

    def add_line(self, line_id: str, initial_level: LogicLevel = LOW) -> PinTrace:
        if line_id in self.lines:
            raise BusError(f"duplicate line {line_id!r}")
        trace = PinTrace(line_id, initial_level)
        self.lines[line_id] = trace
        return trace

    def drive(self, line_id: str, level: LogicLevel, at: int) -> bool:
        """Drive a line; returns True when a transition was recorded."""
        if line_id not in self.lines:
            raise BusError(f"unknown line {line_id!r}")
        if at < self.clock:
            raise BusError(f"time travel: drive at t={at} < clock={self.clock}")
        return self.lines[line_id].append(at, level)

    def level_at(self, line_id: str, t: int) -> LogicLevel:
        if line_id not in self.lines:
            raise BusError(f"unknown line {line_id!r}")
        return self.lines[line_id].level_at(t)

    # -- devices ---------------------------------------------------------

    def attach_stepper(self, cadence_ms: int, fn: Callable[[int], None]) -> None:
        """Register a step callback invoked every cadence_ms of sim time."""
        if cadence_ms < 1:
            raise BusError("cadence must be >= 1 ms")
        first = (self.clock // cadence_ms + 1) * cadence_ms
        self._steppers.append((cadence_ms, fn))
        self._next_step.append(first)

    def attach_serial(self, address: int, responder: object) -> None:
        if not (I2C_ADDRESS_MIN <= address <= I2C_ADDRESS_MAX):
            raise BusError(f"address 0x{address:02x} outside [0x08, 0x77]")
        if address in self.serial_responders:
            raise BusError(f"address 0x{address:02x} already occupied")
        self.serial_responders[address] = responder

    # -- time ------------------------------------------------------------

    def advance(self, dt: int) -> list[tuple[int, str, LogicLevel]]:
        """Advance the clock by dt ms, stepping every attached device.

        Returns the line transitions that occurred in (old clock, new
        clock], time-ordered.
        """
        if dt < 1:
            raise BusError("dt must be >= 1")
        start = self.clock
        end = start + dt
        while True:
            due = [
                (t, i)
                for i, t in enumerate(self._next_step)
                if t <= end
            ]
            if not due:
                break
            t = min(tt for tt, _ in due)
            self.clock = t
            for tt, i in due:
                if tt == t:
                    cadence, fn = self._steppers[i]
                    fn(t)
                    self._next_step[i] = t + cadence
        self.clock = end
        out: list[tuple[int, str, LogicLevel]] = []
        for line_id in self.lines:
            for t, lvl in self.lines[line_id].transitions:
                if start < t <= end:
                    out.append((t, line_id, lvl))
        out.sort(key=lambda x: (x[0], x[1]))
        return out

    # -- serial ----------------------------------------------------------

    def i2c_transfer(
        self, address: int, direction: Direction, n_or_bytes: int | bytes
    ) -> I2CTransaction:
        """Atomic I2C transaction; NACK (not an error) if address is free.

        Every payload byte that crosses the wire is an emission: serviced
        reads and write attempts (ACKed or not) both enter the exposure log.
        """
        if not (I2C_ADDRESS_MIN <= address <= I2C_ADDRESS_MAX):
            raise BusError(f"address 0x{address:02x} outside [0x08, 0x77]")
        responder = self.serial_responders.get(address)
        if direction == Direction.WRITE and len(bytes(n_or_bytes)) > 0:
            self.exposure_log.append(
                ExposureRecord(
                    self.clock, "SERIAL", f"0x{address:02x}", 8 * len(bytes(n_or_bytes))
                )
            )
        if responder is None:
            txn = I2CTransaction(address, direction, b"", Status.NACK)
            self.i2c_log.append((self.clock, txn))
            return txn
        if direction == Direction.READ:
            n = int(n_or_bytes)
            payload = bytes(responder.serial_read(n, self.clock))
            if len(payload) != n:
                raise BusError(
                    f"responder at 0x{address:02x} returned {len(payload)} "
                    f"bytes, expected {n}"
                )
            if n > 0:
                self.exposure_log.append(
                    ExposureRecord(self.clock, "SERIAL", f"0x{address:02x}", 8 * n)
                )
        else:
            payload = bytes(n_or_bytes)
            responder.serial_write(payload, self.clock)
        txn = I2CTransaction(address, direction, payload, Status.ACK)
        self.i2c_log.append((self.clock, txn))
        return txn

    def record_pin_exposure(self, at: int, line_id: str) -> None:
        self.exposure_log.append(ExposureRecord(at, "PIN", line_id, 1))

    # -- virtual lines ---------------------------------------------------

    def add_virtual_line(
        self, line_id: str, compute: Callable[["Bus"], PinTrace]
    ) -> None:
        if line_id in self.lines or line_id in self.virtual_lines:
            raise BusError(f"duplicate line {line_id!r}")
        self.virtual_lines[line_id] = compute

    def virtual_trace(self, line_id: str) -> PinTrace:
        if line_id not in self.virtual_lines:
            raise BusError(f"unknown virtual line {line_id!r}")
        trace = self.virtual_lines[line_id](self)
        trace.line_id = line_id
        return trace

    def trace(self, line_id: str) -> PinTrace:
        """Real or virtual trace by line id."""
        if line_id in self.lines:
            return self.lines[line_id]
        return self.virtual_trace(line_id)

    # -- dumps -----------------------------------------------------------

    def trace_csv(self, include_virtual: bool = True) -> str:
        """CSV dump: header time_ms,line_id,level, sorted by (time, line)."""
        rows: list[tuple[int, str, int]] = []
        traces = list(self.lines.values())
        if include_virtual:
            traces += [self.virtual_trace(lid) for lid in sorted(self.virtual_lines)]
        for trace in traces:
            for t, lvl in trace.transitions:
                rows.append((t, trace.line_id, int(lvl)))
        rows.sort(key=lambda r: (r[0], r[1]))
        lines = ["time_ms,line_id,level"]
        lines += [f"{t},{lid},{lvl}" for t, lid, lvl in rows]
        return "\n".join(lines) + "\n"

    def exposure_csv(self) -> str:
        """CSV dump: header time_ms,channel,detail,bits."""
        lines = ["time_ms,channel,detail,bits"]
        for rec in sorted(self.exposure_log, key=lambda r: (r.at, r.channel, r.detail)):
            lines.append(f"{rec.at},{rec.channel},{rec.detail},{rec.bits}")
        return "\n".join(lines) + "\n"

    def i2c_csv(self) -> str:
        lines = ["time_ms,address,direction,status,payload_hex"]
        for t, txn in self.i2c_log:
            lines.append(
                f"{t},0x{txn.address:02x},{txn.direction.value},"
                f"{txn.status.value},{txn.payload.hex()}"
            )
        return "\n".join(lines) + "\n"
