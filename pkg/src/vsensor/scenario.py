"""Declarative scenario files: devices, stimuli, composites, serial reads.

A scenario is a JSON document (same carrier and canonical form as
datasheets) describing a full simulation run.  All randomness flows from
the scenario's single ``seed``: per-stimulus seeds are hash-derived from
it plus stable indices, never from the clock or OS entropy.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from . import compose as compose_mod
from .devkit import DeviceError, SensorDevice, power_on
from .sensors import (
    PersonPinPolicy,
    gaze_detector,
    make_gaze_blob,
    make_person_blob,
    make_tap_blob,
    make_voice_blob,
    person_detector,
    tap_sensor,
    text_reader,
    voice_sensor_pin,
    voice_sensor_serial,
)
from .stimuli.audio import synth_audio
from .stimuli.imu import synth_imu
from .stimuli.scene import SceneParams, render_scene
from .stimuli.sevenseg import DisplayLayout, DisplayParams, Reading, render_display
from .vbus import Bus, Direction

SCENARIO_KINDS = ("PERSON", "GAZE", "TAP", "VOICE_PIN", "VOICE_SERIAL", "TEXT_READER")


class ScenarioError(Exception):
    """Malformed scenario document."""


def derive_seed(base: int, *parts: object) -> int:
    tag = ":".join([str(base)] + [str(p) for p in parts])
    return int.from_bytes(hashlib.sha256(tag.encode()).digest()[:8], "little")


@dataclass
class ScenarioResult:
    bus: Bus
    devices: dict[str, SensorDevice]
    wiring: dict[str, dict[str, str]]
    serial_reads: list[tuple[int, int, bytes]] = field(default_factory=list)


def _build_device(spec: dict) -> SensorDevice:
    kind = spec.get("kind")
    if kind not in SCENARIO_KINDS:
        raise ScenarioError(f"unknown device kind {kind!r}")
    cfg = spec.get("config", {})
    policy_cfg = cfg.get("policy", {})
    policy = PersonPinPolicy(
        frame_period_ms=policy_cfg.get("frame_period_ms", 100),
        rise_frames=policy_cfg.get("rise_frames", 2),
        fall_frames=policy_cfg.get("fall_frames", 2),
    )
    params = spec.get("params")
    blob = None
    if isinstance(params, str) and not params.startswith("builtin"):
        with open(params, "rb") as f:
            blob = f.read()
    if kind == "PERSON":
        if blob is None:
            blob = make_person_blob(
                cfg.get("threshold", 0.8), cfg.get("figure", "person")
            )
        return person_detector(policy, blob)
    if kind == "GAZE":
        if blob is None:
            blob = make_gaze_blob(cfg.get("threshold", 0.8))
        return gaze_detector(policy, blob)
    if kind == "TAP":
        if blob is None:
            blob = make_tap_blob(
                cfg.get("threshold_g", 1.0), cfg.get("refractory_ms", 100)
            )
        return tap_sensor(cfg.get("pulse_ms", 200), blob)
    if kind == "VOICE_PIN":
        if blob is None:
            blob = make_voice_blob(["on", "off"], cfg.get("threshold", 0.82))
        return voice_sensor_pin(blob)
    if kind == "VOICE_SERIAL":
        vocabulary = cfg.get("vocabulary", ["on", "off"])
        if blob is None:
            blob = make_voice_blob(vocabulary, cfg.get("threshold", 0.82))
        return voice_sensor_serial(vocabulary, cfg.get("address", 0x2A), blob)
    return text_reader(cfg.get("address", 0x29), blob)


def _default_wiring(device_id: str, device: SensorDevice) -> dict[str, str]:
    wiring = {}
    signal = set(device.interface.signal_pins())
    for pin in device.interface.pin_names():
        wiring[pin] = f"{device_id}.{pin}" if pin in signal else pin.lower()
    return wiring


def _parse_reading(text: str) -> Reading:
    negative = text.startswith("-")
    body = text[1:] if negative else text
    whole, _, frac = body.partition(".")
    return Reading(negative, whole, frac)


def _feed_stimuli(
    device: SensorDevice, device_id: str, specs: list[dict], seed: int
) -> None:
    for idx, spec in enumerate(specs):
        modality = spec.get("modality")
        at = spec.get("at", 0)
        base = spec.get("seed", derive_seed(seed, device_id, idx))
        if modality == "scene":
            p = spec.get("params", {})
            every = spec.get("every_ms", 100)
            for k in range(spec.get("count", 1)):
                frame = render_scene(
                    SceneParams(
                        person_present=p.get("person_present", False),
                        facing_camera=p.get("facing_camera", False),
                        distance_m=p.get("distance_m", 1.0),
                        illuminance_lux=p.get("illuminance_lux", 500.0),
                        noise_sigma=p.get("noise_sigma", 4.0),
                        seed=derive_seed(base, k),
                        figure=p.get("figure", "person"),
                    )
                )
                device.feed_stimulus(frame, at + k * every)
        elif modality == "imu":
            window = synth_imu(
                spec.get("taps", []),
                spec.get("duration_ms", 1000),
                spec.get("noise_sigma", 0.03),
                base,
            )
            device.feed_stimulus(window, at)
        elif modality == "audio":
            script = [(w, t) for w, t in spec.get("script", [])]
            window = synth_audio(
                script,
                spec.get("vocabulary", ["on", "off"]),
                base,
                spec.get("duration_ms"),
                spec.get("noise_sigma", 0.08),
            )
            device.feed_stimulus(window, at)
        elif modality == "display":
            layout_cfg = spec.get("layout", {})
            layout = DisplayLayout(
                x=layout_cfg.get("x", 8),
                y=layout_cfg.get("y", 8),
                rotation=layout_cfg.get("rotation", 0),
                frame_width=layout_cfg.get("frame_width", 128),
                frame_height=layout_cfg.get("frame_height", 64),
            )
            p = spec.get("params", {})
            every = spec.get("every_ms", 500)
            for k in range(spec.get("count", 1)):
                frame = render_display(
                    _parse_reading(spec["reading"]),
                    layout,
                    DisplayParams(
                        illuminance_lux=p.get("illuminance_lux", 500.0),
                        noise_sigma=p.get("noise_sigma", 2.0),
                        seed=derive_seed(base, k),
                    ),
                )
                device.feed_stimulus(frame, at + k * every)
        else:
            raise ScenarioError(f"unknown stimulus modality {modality!r}")


def _register_composites(result: ScenarioResult, specs: list[dict]) -> None:
    bus = result.bus
    for spec in specs:
        combinator = spec.get("combinator")
        line_id = spec.get("line_id")
        if not line_id:
            raise ScenarioError("composite requires line_id")
        if combinator == "gaze_voice":
            compose_mod.gaze_voice_demo(
                bus,
                result.devices[spec["gaze"]],
                result.devices[spec["voice"]],
                spec.get("window_ms", compose_mod.DEFAULT_GAZE_WINDOW_MS),
                line_id,
            )
        elif combinator == "gated_event":
            bus.add_virtual_line(
                line_id,
                lambda b, s=spec: compose_mod.gated_event(
                    b.trace(s["event"]), b.trace(s["gate"]), s.get("window_ms", 0)
                ),
            )
        elif combinator == "debounce":
            bus.add_virtual_line(
                line_id,
                lambda b, s=spec: compose_mod.debounce(
                    b.trace(s["line"]), s.get("hold_ms", 0)
                ),
            )
        elif combinator == "pulse_stretch":
            bus.add_virtual_line(
                line_id,
                lambda b, s=spec: compose_mod.pulse_stretch(
                    b.trace(s["line"]), s.get("ms", 0)
                ),
            )
        elif combinator == "sr_latch":
            bus.add_virtual_line(
                line_id,
                lambda b, s=spec: compose_mod.sr_latch(
                    b.trace(s["set"]), b.trace(s["reset"])
                ),
            )
        elif combinator == "invert":
            bus.add_virtual_line(
                line_id, lambda b, s=spec: compose_mod.invert(b.trace(s["line"]))
            )
        else:
            raise ScenarioError(f"unknown combinator {combinator!r}")


def run_scenario(doc: dict) -> ScenarioResult:
    """Build and run a scenario document to completion."""
    duration = doc.get("duration_ms", 0)
    if not isinstance(duration, int) or duration < 1:
        raise ScenarioError("duration_ms must be an integer >= 1")
    seed = doc.get("seed", 0)
    bus = Bus()
    result = ScenarioResult(bus, {}, {})
    for spec in doc.get("devices", []):
        device_id = spec.get("id")
        if not device_id or device_id in result.devices:
            raise ScenarioError(f"missing or duplicate device id {device_id!r}")
        device = _build_device(spec)
        wiring = spec.get("wiring") or _default_wiring(device_id, device)
        try:
            power_on(device, bus, wiring)
        except DeviceError as e:
            raise ScenarioError(str(e)) from e
        result.devices[device_id] = device
        result.wiring[device_id] = wiring
        _feed_stimuli(device, device_id, spec.get("stimuli", []), seed)
    _register_composites(result, doc.get("composites", []))
    reads = sorted(doc.get("serial_reads", []), key=lambda r: r["at"])
    clock = 0
    for read in reads:
        at = read["at"]
        if not (0 < at <= duration):
            raise ScenarioError(f"serial read at t={at} outside run (0, {duration}]")
        if at > clock:
            bus.advance(at - clock)
            clock = at
        txn = bus.i2c_transfer(read["address"], Direction.READ, read.get("n", 1))
        result.serial_reads.append((at, read["address"], txn.payload))
    if clock < duration:
        bus.advance(duration - clock)
    return result
