"""The five concrete ML-sensor devices with bit-exact interface semantics.

Pin names are fixed per kind: PERSON/GAZE -> {VDD, GND, DETECT|GAZE},
TAP -> {VDD, GND, TAP}, VOICE (pin mode) -> {VDD, GND, STATE}.  Serial
register layouts are big-endian words.  Two devices of the same kind
always expose identical interface declarations regardless of their
loaded parameters.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .devkit import (
    DeviceError,
    DeviceKind,
    InterfaceDecl,
    PinRole,
    SensorDevice,
    SerialDecl,
    pack_blob,
)
from .stimuli.audio import FeatureWindow, detect_keywords, keyword_templates
from .stimuli.imu import ImuWindow, TapParams, detect_tap
from .stimuli.scene import (
    Detection,
    Frame,
    GazeParams,
    PersonParams,
    detect_gaze,
    detect_person,
)
from .stimuli.sevenseg import Reading, decode_display
from .vbus import HIGH, LOW, LogicLevel

TEXT_READER_DEFAULT_ADDRESS = 0x29
VOICE_SERIAL_DEFAULT_ADDRESS = 0x2A
VOICE_FIFO_DEPTH = 16
VOICE_EMPTY_SENTINEL = b"\xff\xff"
NO_READING_SENTINEL = b"\xff" * 8

SIGN_POSITIVE = 0xC
SIGN_NEGATIVE = 0xD
MAX_WHOLE_DIGITS = 7
MAX_FRAC_DIGITS = 8


# -- signed packed-BCD reading protocol -------------------------------------


class BcdError(Exception):
    """Raised on encode/decode protocol violations; ``code`` is stable."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def encode_reading(r: Reading) -> bytes:
    """Pack a display reading into two big-endian 32-bit words.

    Whole word: 7 packed-BCD digits zero-padded left plus a trailing sign
    nibble (0xC positive, 0xD negative).  Fraction word: 8 packed-BCD
    digits left-aligned from tenths, zero-padded right.
    """
    if len(r.whole_digits) > MAX_WHOLE_DIGITS:
        raise BcdError("TOO_MANY_DIGITS", f"whole part {r.whole_digits!r} > 7 digits")
    if len(r.frac_digits) > MAX_FRAC_DIGITS:
        raise BcdError("TOO_MANY_DIGITS", f"fraction {r.frac_digits!r} > 8 digits")
    whole = r.whole_digits.rjust(MAX_WHOLE_DIGITS, "0")
    sign = SIGN_NEGATIVE if r.negative else SIGN_POSITIVE
    whole_word = 0
    for d in whole:
        whole_word = (whole_word << 4) | int(d)
    whole_word = (whole_word << 4) | sign
    frac = r.frac_digits.ljust(MAX_FRAC_DIGITS, "0")
    frac_word = 0
    for d in frac:
        frac_word = (frac_word << 4) | int(d)
    return struct.pack(">II", whole_word, frac_word)


def decode_reading(data: bytes) -> Reading | None:
    """Exact inverse of encode_reading; None for the no-reading sentinel.

    Decoded digits are canonical: leading zeros of the whole part and
    trailing zeros of the fraction are not representable on the wire.
    """
    if len(data) != 8:
        raise BcdError("MALFORMED_NIBBLE", f"expected 8 bytes, got {len(data)}")
    if data == NO_READING_SENTINEL:
        return None
    whole_word, frac_word = struct.unpack(">II", data)
    sign = whole_word & 0xF
    if sign not in (SIGN_POSITIVE, SIGN_NEGATIVE):
        raise BcdError("MALFORMED_NIBBLE", f"bad sign nibble 0x{sign:X}")
    digits = []
    w = whole_word >> 4
    for _ in range(MAX_WHOLE_DIGITS):
        nib = w & 0xF
        if nib > 9:
            raise BcdError("MALFORMED_NIBBLE", f"nibble 0x{nib:X} in whole digit position")
        digits.append(str(nib))
        w >>= 4
    whole = "".join(reversed(digits)).lstrip("0") or "0"
    digits = []
    f = frac_word
    for _ in range(MAX_FRAC_DIGITS):
        nib = (f >> 28) & 0xF
        if nib > 9:
            raise BcdError(
                "MALFORMED_NIBBLE", f"nibble 0x{nib:X} in fraction digit position"
            )
        digits.append(str(nib))
        f = (f << 4) & 0xFFFFFFFF
    frac = "".join(digits).rstrip("0")
    return Reading(sign == SIGN_NEGATIVE, whole, frac)


# -- parameter payloads ------------------------------------------------------


def make_person_blob(threshold: float = 0.8, figure: str = "person") -> bytes:
    payload = struct.pack("<fB", threshold, {"person": 0, "rodent": 1}[figure])
    return pack_blob(DeviceKind.PERSON, payload)


def make_gaze_blob(threshold: float = 0.8) -> bytes:
    return pack_blob(DeviceKind.GAZE, struct.pack("<f", threshold))


def make_tap_blob(threshold_g: float = 1.0, refractory_ms: int = 100) -> bytes:
    return pack_blob(DeviceKind.TAP, struct.pack("<fH", threshold_g, refractory_ms))


def make_voice_blob(vocabulary: list[str], threshold: float = 0.82) -> bytes:
    """Numeric matched-filter templates: threshold + one signature per word."""
    if not (1 <= len(vocabulary) <= 255):
        raise ValueError("vocabulary size must be in [1, 255]")
    templates = keyword_templates(vocabulary)
    payload = struct.pack("<fB", threshold, len(vocabulary))
    for word in vocabulary:
        payload += np.asarray(templates[word], dtype="<f4").tobytes()
    return pack_blob(DeviceKind.VOICE, payload)


def make_text_reader_blob() -> bytes:
    return pack_blob(DeviceKind.TEXT_READER, b"")


# -- person / gaze -----------------------------------------------------------


@dataclass
class PersonPinPolicy:
    frame_period_ms: int = 100
    rise_frames: int = 2
    fall_frames: int = 2

    def __post_init__(self) -> None:
        if min(self.frame_period_ms, self.rise_frames, self.fall_frames) < 1:
            raise ValueError("policy values must be >= 1")


class _DetectorPinDevice(SensorDevice):
    """Shared DETECT/GAZE pin semantics: rise/fall frame debounce."""

    _modality = Frame
    pin_name = "DETECT"

    def __init__(self, policy: PersonPinPolicy):
        self.policy = policy
        super().__init__(self._make_interface(), policy.frame_period_ms)
        self._consecutive_pos = 0
        self._consecutive_neg = 0
        self._asserted = False

    def _make_interface(self) -> InterfaceDecl:
        raise NotImplementedError

    def _detect(self, frame: Frame) -> Detection:
        raise NotImplementedError

    def timing(self) -> dict[str, int]:
        return {
            "cadence_ms": self.cadence_ms,
            "frame_period_ms": self.policy.frame_period_ms,
            "rise_frames": self.policy.rise_frames,
            "fall_frames": self.policy.fall_frames,
        }

    def _step(self, t, port) -> None:
        due = self._pop_stimuli(t)
        frame = due[-1][1] if due else None
        positive = frame is not None and self._detect(frame).present
        if positive:
            self._consecutive_pos += 1
            self._consecutive_neg = 0
        else:
            self._consecutive_neg += 1
            self._consecutive_pos = 0
        if not self._asserted and self._consecutive_pos >= self.policy.rise_frames:
            self._asserted = True
            port.drive(self.pin_name, HIGH, t)
        elif self._asserted and self._consecutive_neg >= self.policy.fall_frames:
            self._asserted = False
            port.drive(self.pin_name, LOW, t)


class PersonDetectorDevice(_DetectorPinDevice):
    kind = DeviceKind.PERSON
    pin_name = "DETECT"

    def _make_interface(self) -> InterfaceDecl:
        return InterfaceDecl(
            pins=[("VDD", PinRole.POWER), ("GND", PinRole.GROUND),
                  ("DETECT", PinRole.SIGNAL_OUT)],
            serial=None,
            declared_outputs="DETECT: one bit, high while a person is present",
        )

    def _configure(self, payload: bytes) -> None:
        threshold, figure_code = struct.unpack("<fB", payload)
        figure = {0: "person", 1: "rodent"}[figure_code]
        self._detector_params = PersonParams(threshold=threshold, figure=figure)

    def _detect(self, frame: Frame) -> Detection:
        return detect_person(frame, self._detector_params)


class GazeDetectorDevice(_DetectorPinDevice):
    kind = DeviceKind.GAZE
    pin_name = "DETECT"

    def _make_interface(self) -> InterfaceDecl:
        return InterfaceDecl(
            pins=[("VDD", PinRole.POWER), ("GND", PinRole.GROUND),
                  ("DETECT", PinRole.SIGNAL_OUT)],
            serial=None,
            declared_outputs="DETECT: one bit, high while someone looks at the device",
        )

    def _configure(self, payload: bytes) -> None:
        (threshold,) = struct.unpack("<f", payload)
        self._detector_params = GazeParams(threshold=threshold)

    def _detect(self, frame: Frame) -> Detection:
        return detect_gaze(frame, self._detector_params)


def person_detector(
    policy: PersonPinPolicy | None = None, params: bytes | None = None
) -> PersonDetectorDevice:
    device = PersonDetectorDevice(policy or PersonPinPolicy())
    device.load_parameters(params if params is not None else make_person_blob())
    return device


def gaze_detector(
    policy: PersonPinPolicy | None = None, params: bytes | None = None
) -> GazeDetectorDevice:
    device = GazeDetectorDevice(policy or PersonPinPolicy())
    device.load_parameters(params if params is not None else make_gaze_blob())
    return device


# -- tap ----------------------------------------------------------------------


class TapSensorDevice(SensorDevice):
    kind = DeviceKind.TAP
    _modality = ImuWindow
    CADENCE_MS = 10

    def __init__(self, pulse_ms: int = 200):
        if pulse_ms < 1:
            raise ValueError("pulse_ms must be >= 1")
        self.pulse_ms = pulse_ms
        interface = InterfaceDecl(
            pins=[("VDD", PinRole.POWER), ("GND", PinRole.GROUND),
                  ("TAP", PinRole.SIGNAL_OUT)],
            serial=None,
            declared_outputs=f"TAP: one bit, {pulse_ms} ms pulse per detected tap",
        )
        super().__init__(interface, self.CADENCE_MS)
        self._pulse_end: int | None = None

    def timing(self) -> dict[str, int]:
        return {"cadence_ms": self.cadence_ms, "pulse_ms": self.pulse_ms}

    def _configure(self, payload: bytes) -> None:
        threshold_g, refractory_ms = struct.unpack("<fH", payload)
        self._detector_params = TapParams(threshold_g, refractory_ms)

    def _step(self, t, port) -> None:
        for at, window in self._pop_stimuli(t):
            for rel in detect_tap(window, self._detector_params):
                tap_at = at + rel
                if self._pulse_end is not None and tap_at <= self._pulse_end:
                    continue  # absorbed by the active pulse
                port.drive("TAP", HIGH, tap_at)
                port.drive("TAP", LOW, tap_at + self.pulse_ms)
                self._pulse_end = tap_at + self.pulse_ms


def tap_sensor(pulse_ms: int = 200, params: bytes | None = None) -> TapSensorDevice:
    device = TapSensorDevice(pulse_ms)
    device.load_parameters(params if params is not None else make_tap_blob())
    return device


# -- voice ---------------------------------------------------------------------


class _VoiceCore(SensorDevice):
    _modality = FeatureWindow

    def _configure(self, payload: bytes) -> None:
        threshold, n_words = struct.unpack_from("<fB", payload)
        offset = 5
        if len(self._vocabulary) != n_words:
            raise DeviceError(
                "KIND_MISMATCH",
                f"blob carries {n_words} words, device expects {len(self._vocabulary)}",
            )
        self._threshold = threshold
        self._templates = {}
        for word in self._vocabulary:
            vec = np.frombuffer(payload, dtype="<f4", count=13, offset=offset)
            self._templates[word] = vec.astype(np.float64)
            offset += 13 * 4

    def _recognitions(self, t: int) -> list[tuple[int, str]]:
        """(absolute time, word) events from all due windows, time-ordered."""
        events = []
        for at, window in self._pop_stimuli(t):
            for ev in detect_keywords(window, self._templates, self._threshold):
                events.append((at + ev.at_ms, ev.word))
        events.sort(key=lambda e: e[0])
        return events


class VoicePinDevice(_VoiceCore):
    """Latched STATE line: "on" drives HIGH, "off" drives LOW."""

    kind = DeviceKind.VOICE
    CADENCE_MS = 100

    def __init__(self):
        self._vocabulary = ["on", "off"]
        interface = InterfaceDecl(
            pins=[("VDD", PinRole.POWER), ("GND", PinRole.GROUND),
                  ("STATE", PinRole.SIGNAL_OUT)],
            serial=None,
            declared_outputs="STATE: one bit, latched high on 'on', low on 'off'",
        )
        super().__init__(interface, self.CADENCE_MS)

    def _step(self, t, port) -> None:
        # coalesce same-millisecond events so the trace stays well-formed
        by_time: dict[int, LogicLevel] = {}
        for when, word in self._recognitions(t):
            by_time[when] = HIGH if word == "on" else LOW
        for when in sorted(by_time):
            port.drive("STATE", by_time[when], when)


class VoiceSerialDevice(_VoiceCore):
    """Command packets over serial: 16-deep FIFO of (index, sequence)."""

    kind = DeviceKind.VOICE
    CADENCE_MS = 100

    def __init__(self, vocabulary: list[str], address: int = VOICE_SERIAL_DEFAULT_ADDRESS):
        if not (1 <= len(vocabulary) <= 255):
            raise ValueError("vocabulary size must be in [1, 255]")
        self._vocabulary = list(vocabulary)
        interface = InterfaceDecl(
            pins=[("VDD", PinRole.POWER), ("GND", PinRole.GROUND)],
            serial=SerialDecl(address, register_map_len=2, packet_spec_id="cmd-packet-v1"),
            declared_outputs="serial: 2-byte command packets (index, sequence)",
        )
        super().__init__(interface, self.CADENCE_MS)
        self._fifo: list[bytes] = []
        self._sequence = 0
        self._dropped = 0

    @property
    def dropped_packets(self) -> int:
        return self._dropped

    def _step(self, t, port) -> None:
        for _, word in self._recognitions(t):
            packet = bytes([self._vocabulary.index(word), self._sequence])
            self._sequence = (self._sequence + 1) & 0xFF
            self._fifo.append(packet)
            if len(self._fifo) > VOICE_FIFO_DEPTH:
                self._fifo.pop(0)
                self._dropped += 1

    def serial_read(self, n: int, at: int) -> bytes:
        out = b""
        while len(out) < n:
            out += self._fifo.pop(0) if self._fifo else VOICE_EMPTY_SENTINEL
        return out[:n]


def voice_sensor_pin(params: bytes | None = None) -> VoicePinDevice:
    device = VoicePinDevice()
    device.load_parameters(
        params if params is not None else make_voice_blob(["on", "off"])
    )
    return device


def voice_sensor_serial(
    vocabulary: list[str],
    address: int = VOICE_SERIAL_DEFAULT_ADDRESS,
    params: bytes | None = None,
) -> VoiceSerialDevice:
    device = VoiceSerialDevice(vocabulary, address)
    device.load_parameters(
        params if params is not None else make_voice_blob(vocabulary)
    )
    return device


# -- text reader ----------------------------------------------------------------


class TextReaderDevice(SensorDevice):
    """Reads a seven-segment display into two 32-bit BCD registers."""

    kind = DeviceKind.TEXT_READER
    _modality = Frame
    REFRESH_PERIOD_MS = 500

    def __init__(self, address: int = TEXT_READER_DEFAULT_ADDRESS):
        interface = InterfaceDecl(
            pins=[("VDD", PinRole.POWER), ("GND", PinRole.GROUND)],
            serial=SerialDecl(address, register_map_len=8, packet_spec_id="bcd-reading-v1"),
            declared_outputs="serial: signed BCD whole and fraction words",
        )
        super().__init__(interface, self.REFRESH_PERIOD_MS)
        self._registers = NO_READING_SENTINEL

    def timing(self) -> dict[str, int]:
        return {"cadence_ms": self.cadence_ms, "refresh_period_ms": self.REFRESH_PERIOD_MS}

    def _configure(self, payload: bytes) -> None:
        pass  # decode pipeline has no tunable parameters in v1

    def _step(self, t, port) -> None:
        due = self._pop_stimuli(t)
        if not due:
            return
        reading = decode_display(due[-1][1])
        if reading is None:
            self._registers = NO_READING_SENTINEL
        else:
            try:
                self._registers = encode_reading(reading)
            except BcdError:
                self._registers = NO_READING_SENTINEL

    def serial_read(self, n: int, at: int) -> bytes:
        padded = self._registers + b"\x00" * max(0, n - len(self._registers))
        return padded[:n]


def text_reader(
    address: int = TEXT_READER_DEFAULT_ADDRESS, params: bytes | None = None
) -> TextReaderDevice:
    device = TextReaderDevice(address)
    device.load_parameters(params if params is not None else make_text_reader_blob())
    return device


DEFAULT_BLOBS = {
    DeviceKind.PERSON: make_person_blob,
    DeviceKind.GAZE: make_gaze_blob,
    DeviceKind.TAP: make_tap_blob,
    DeviceKind.TEXT_READER: make_text_reader_blob,
}
