"""Sensor-device framework: interface declarations, parameter blobs,
power lifecycle, the isolation boundary, and the exposure audit.

A device's host-facing surface is its InterfaceDecl plus whatever crosses
the bus (pin transitions, serial payloads).  Stimuli enter through a
private channel that no host-side query can read back.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from enum import Enum

from .vbus import Bus, BusError, ExposureRecord, LogicLevel, LOW

BLOB_MAGIC = b"MLSP"
BLOB_VERSION = 1


class DeviceKind(Enum):
    PERSON = 1
    GAZE = 2
    TAP = 3
    VOICE = 4
    TEXT_READER = 5


class PinRole(Enum):
    POWER = "power"
    GROUND = "ground"
    SIGNAL_OUT = "signal_out"


class DeviceError(Exception):
    """Device misuse; ``code`` is a stable machine-readable identifier."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass
class SerialDecl:
    address: int
    register_map_len: int
    packet_spec_id: str


@dataclass
class InterfaceDecl:
    """Everything a device is allowed to expose, declared up front."""

    pins: list[tuple[str, PinRole]]
    serial: SerialDecl | None
    declared_outputs: str

    def __post_init__(self) -> None:
        if not self.declared_outputs:
            raise ValueError("declared_outputs must be non-empty")
        signal_names = [n for n, r in self.pins if r == PinRole.SIGNAL_OUT]
        if len(signal_names) != len(set(signal_names)):
            raise ValueError("SIGNAL_OUT pin names must be unique")

    def signal_pins(self) -> list[str]:
        return [n for n, r in self.pins if r == PinRole.SIGNAL_OUT]

    def pin_names(self) -> list[str]:
        return [n for n, _ in self.pins]


# -- parameter blobs -------------------------------------------------------


def pack_blob(kind: DeviceKind, payload: bytes, version: int = BLOB_VERSION) -> bytes:
    """Frame detector parameters: MLSP magic, version, kind, length, CRC32."""
    head = BLOB_MAGIC + struct.pack("<BBI", version, kind.value, len(payload))
    body = head + payload
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def unpack_blob(blob: bytes) -> tuple[int, DeviceKind, bytes]:
    """Parse and verify a parameter blob; raises DeviceError BAD_CRC."""
    if len(blob) < 14 or blob[:4] != BLOB_MAGIC:
        raise DeviceError("BAD_CRC", "malformed parameter blob framing")
    version, kind_code, payload_len = struct.unpack("<BBI", blob[4:10])
    if len(blob) != 10 + payload_len + 4:
        raise DeviceError("BAD_CRC", "parameter blob length mismatch")
    body, crc_bytes = blob[:-4], blob[-4:]
    (crc,) = struct.unpack("<I", crc_bytes)
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise DeviceError("BAD_CRC", "parameter blob CRC mismatch")
    try:
        kind = DeviceKind(kind_code)
    except ValueError:
        raise DeviceError("KIND_MISMATCH", f"unknown device kind {kind_code}")
    return version, kind, blob[10 : 10 + payload_len]


# -- devices ---------------------------------------------------------------


class DevicePort:
    """Bus adapter handed to a powered device.

    The only way a device can emit anything: pin drives (recorded as
    exposure events) and serial reads serviced through the bus.
    """

    def __init__(self, bus: Bus, pin_lines: dict[str, str]):
        self._bus = bus
        self._pin_lines = pin_lines

    def line_id(self, pin: str) -> str:
        return self._pin_lines[pin]

    def drive(self, pin: str, level: LogicLevel, at: int) -> None:
        line_id = self._pin_lines[pin]
        if self._bus.lines[line_id].append(at, level):
            self._bus.record_pin_exposure(at, line_id)


class SensorDevice:
    """A powered virtual component: declared interface, private state,
    private stimulus channel.  Subclasses implement the inference core.
    """

    kind: DeviceKind
    _modality: type | None = None

    def __init__(self, interface: InterfaceDecl, cadence_ms: int):
        self._interface = interface
        self._cadence_ms = cadence_ms
        self._powered = False
        self._params_payload: bytes | None = None
        self._stimuli: list[tuple[int, object]] = []
        self._port: DevicePort | None = None

    # host-facing surface: interface, kind, cadence, powered -- nothing else

    @property
    def interface(self) -> InterfaceDecl:
        return self._interface

    @property
    def cadence_ms(self) -> int:
        return self._cadence_ms

    @property
    def powered(self) -> bool:
        return self._powered

    def timing(self) -> dict[str, int]:
        """Timing constants cross-checked against the datasheet."""
        return {"cadence_ms": self._cadence_ms}

    def load_parameters(self, blob: bytes) -> None:
        """Calibration-time parameter upload; forbidden once powered."""
        if self._powered:
            raise DeviceError("POWERED", "parameter update after power-on forbidden")
        _, kind, payload = unpack_blob(blob)
        if kind != self.kind:
            raise DeviceError(
                "KIND_MISMATCH", f"blob kind {kind.name} != device kind {self.kind.name}"
            )
        self._configure(payload)
        self._params_payload = payload

    def feed_stimulus(self, stimulus: object, at: int) -> None:
        """Queue a synthetic physical input on the private channel."""
        if self._modality is not None and not isinstance(stimulus, self._modality):
            raise DeviceError(
                "MODALITY_MISMATCH",
                f"{type(stimulus).__name__} into {self.kind.name} device",
            )
        self._stimuli.append((at, stimulus))
        self._stimuli.sort(key=lambda x: x[0])

    # subclass hooks ------------------------------------------------------

    def _configure(self, payload: bytes) -> None:
        raise NotImplementedError

    def _step(self, t: int, port: DevicePort) -> None:
        raise NotImplementedError

    def serial_read(self, n: int, at: int) -> bytes:
        raise DeviceError("NO_SERIAL", f"{self.kind.name} device has no serial interface")

    def serial_write(self, data: bytes, at: int) -> None:
        raise DeviceError("NO_SERIAL", f"{self.kind.name} device has no serial interface")

    def _pop_stimuli(self, t: int) -> list[tuple[int, object]]:
        """Drain queued stimuli with timestamp <= t, oldest first."""
        due = [s for s in self._stimuli if s[0] <= t]
        self._stimuli = [s for s in self._stimuli if s[0] > t]
        return due


def declared_surface(device: SensorDevice) -> InterfaceDecl:
    """The declaration used by audit and datasheet cross-check."""
    return device.interface


def power_on(device: SensorDevice, bus: Bus, wiring: dict[str, str]) -> SensorDevice:
    """Wire and attach a device; it steps at its cadence from now on."""
    if device._powered:
        raise DeviceError("POWERED", "device already powered")
    missing = [p for p in device.interface.pin_names() if p not in wiring]
    if missing:
        raise DeviceError("MISSING_PIN", f"wiring missing pins {missing}")
    serial = device.interface.serial
    if serial is not None and serial.address in bus.serial_responders:
        raise DeviceError(
            "ADDRESS_CONFLICT", f"address 0x{serial.address:02x} already occupied"
        )
    pin_lines = {}
    for pin in device.interface.signal_pins():
        line_id = wiring[pin]
        if line_id not in bus.lines:
            bus.add_line(line_id, LOW)
        pin_lines[pin] = line_id
    port = DevicePort(bus, pin_lines)
    device._port = port
    device._powered = True
    bus.attach_stepper(device.cadence_ms, lambda t: device._step(t, port))
    if serial is not None:
        bus.attach_serial(serial.address, device)
    return device


# -- exposure audit --------------------------------------------------------


@dataclass
class AuditFinding:
    code: str  # UNDECLARED_CHANNEL or OVERSIZED_PAYLOAD
    message: str


@dataclass
class AuditVerdict:
    passed: bool
    findings: list[AuditFinding] = field(default_factory=list)


def _line_matches_pin(line_id: str, pin: str) -> bool:
    # Scenario runners name lines "<device_id>.<PIN>"; bare pin names
    # are accepted for single-device runs.
    return line_id == pin or line_id.endswith("." + pin)


def audit(
    run_log: list[ExposureRecord],
    interface: InterfaceDecl,
    wiring: dict[str, str] | None = None,
) -> AuditVerdict:
    """Structural exposure audit: every emission must be declared.

    ``wiring`` (pin name -> line id), when given, pins down the mapping;
    otherwise line ids are matched to declared pin names directly or via
    the "<device>.<PIN>" convention.
    """
    findings: list[AuditFinding] = []
    signal_pins = interface.signal_pins()
    line_to_pin = {}
    if wiring:
        line_to_pin = {lid: pin for pin, lid in wiring.items() if pin in signal_pins}
    for rec in run_log:
        if rec.channel == "PIN":
            if wiring:
                ok = rec.detail in line_to_pin
            else:
                ok = any(_line_matches_pin(rec.detail, p) for p in signal_pins)
            if not ok:
                findings.append(
                    AuditFinding(
                        "UNDECLARED_CHANNEL",
                        f"pin emission on undeclared line {rec.detail!r} at t={rec.at}",
                    )
                )
        elif rec.channel == "SERIAL":
            address = int(rec.detail, 16)
            if interface.serial is None or interface.serial.address != address:
                findings.append(
                    AuditFinding(
                        "UNDECLARED_CHANNEL",
                        f"serial emission at undeclared address {rec.detail} "
                        f"at t={rec.at}",
                    )
                )
            elif rec.bits // 8 > interface.serial.register_map_len:
                findings.append(
                    AuditFinding(
                        "OVERSIZED_PAYLOAD",
                        f"{rec.bits // 8}-byte payload exceeds register map "
                        f"length {interface.serial.register_map_len} at t={rec.at}",
                    )
                )
        else:
            findings.append(
                AuditFinding("UNDECLARED_CHANNEL", f"unknown channel {rec.channel!r}")
            )
    return AuditVerdict(passed=not findings, findings=findings)


def parse_exposure_csv(text: str) -> list[ExposureRecord]:
    """Inverse of Bus.exposure_csv."""
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0] != "time_ms,channel,detail,bits":
        raise ValueError("bad exposure log header")
    out = []
    for ln in lines[1:]:
        at, channel, detail, bits = ln.split(",")
        out.append(ExposureRecord(int(at), channel, detail, int(bits)))
    return out
