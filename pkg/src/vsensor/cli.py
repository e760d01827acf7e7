"""Command-line surface: simulate, conformance, datasheet, audit,
compose-demo.

Exit codes: 0 success, 1 violations/findings/failed checks, 2 usage or
I/O errors.  All outputs are deterministic functions of their inputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import conformance as conf_mod
from . import datasheet as ds_mod
from .devkit import DeviceError, InterfaceDecl, PinRole, SerialDecl, audit, parse_exposure_csv
from .scenario import ScenarioError, run_scenario
from .vbus import BusError, high_intervals

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2


class _CliError(Exception):
    """Usage or I/O failure; maps to exit code 2."""


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise _CliError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise _CliError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e


def _write(path: Path, text: str, quiet: bool) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as e:
        raise _CliError(f"cannot write {path}: {e}") from e
    if not quiet:
        print(f"wrote {path}")


def _interface_from_datasheet(doc: dict) -> InterfaceDecl:
    pinout = doc.get("comm_spec_pinout")
    if not isinstance(pinout, dict):
        raise _CliError("datasheet has no comm_spec_pinout section")
    try:
        pins = [(p["name"], PinRole(p["role"])) for p in pinout["pins"]]
        serial = pinout.get("serial")
        decl = SerialDecl(
            serial["address"], serial["register_map_len"], serial["packet_spec_id"]
        ) if serial else None
        return InterfaceDecl(pins, decl, pinout.get("declared_outputs", "-"))
    except (KeyError, TypeError, ValueError) as e:
        raise _CliError(f"malformed comm_spec_pinout: {e}") from e


def _cmd_simulate(args) -> int:
    doc = _load_json(args.scenario)
    if args.seed is not None:
        doc["seed"] = args.seed
    try:
        result = run_scenario(doc)
    except (ScenarioError, DeviceError, BusError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    bus = result.bus
    if args.format == "json":
        run_doc = {
            "traces": {
                lid: {
                    "initial_level": int(bus.trace(lid).initial_level),
                    "transitions": [
                        [t, int(lvl)] for t, lvl in bus.trace(lid).transitions
                    ],
                }
                for lid in sorted(list(bus.lines) + list(bus.virtual_lines))
            },
            "i2c": [
                {
                    "time_ms": t,
                    "address": txn.address,
                    "direction": txn.direction.value,
                    "status": txn.status.value,
                    "payload_hex": txn.payload.hex(),
                }
                for t, txn in bus.i2c_log
            ],
            "exposure": [
                {
                    "time_ms": r.at,
                    "channel": r.channel,
                    "detail": r.detail,
                    "bits": r.bits,
                }
                for r in bus.exposure_log
            ],
        }
        _write(out / "run.json", ds_mod.canonical_json(run_doc), args.quiet)
    else:
        _write(out / "trace.csv", bus.trace_csv(), args.quiet)
        _write(out / "i2c.csv", bus.i2c_csv(), args.quiet)
        _write(out / "exposure.csv", bus.exposure_csv(), args.quiet)
    return EXIT_OK


def _cmd_conformance(args) -> int:
    doc = _load_json(args.protocol)
    if args.seed is not None:
        doc["seed"] = args.seed
    try:
        protocol = conf_mod.TestProtocol.from_doc(doc)
    except (KeyError, ValueError) as e:
        print(f"error: bad protocol: {e}", file=sys.stderr)
        return EXIT_USAGE
    from .sensors import gaze_detector, person_detector

    factory = {"PERSON": person_detector, "GAZE": gaze_detector}[
        protocol.sensor_kind.name
    ]
    report = conf_mod.run(factory, protocol)
    _write(Path(args.out), report.to_json(), args.quiet)
    return EXIT_OK


def _cmd_datasheet(args) -> int:
    parsed = ds_mod.parse(Path(args.file).read_text(encoding="utf-8"))
    if isinstance(parsed, list):
        for err in parsed:
            where = f" (line {err.line}, col {err.column})" if err.line else ""
            print(f"parse error: {err.message}{where}", file=sys.stderr)
        return EXIT_FINDINGS
    if args.action == "validate":
        violations = ds_mod.validate(parsed)
        for v in violations:
            print(f"{v.section}: {v.code}: {v.message}")
        if not args.quiet and not violations:
            print("valid")
        return EXIT_FINDINGS if violations else EXIT_OK
    if args.action == "render":
        text = ds_mod.render(parsed, args.mode)
        if args.out:
            _write(Path(args.out), text, args.quiet)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    # crosscheck
    if not args.device_from:
        raise _CliError("crosscheck requires --device-from <scenario>")
    scenario_doc = _load_json(args.device_from)
    result = run_scenario(scenario_doc)
    device_id = args.device or next(iter(result.devices))
    if device_id not in result.devices:
        raise _CliError(f"no device {device_id!r} in scenario")
    findings = ds_mod.cross_check(
        parsed,
        result.devices[device_id],
        result.bus.exposure_log,
        result.wiring[device_id],
    )
    for f in findings:
        print(f"{f.code}: {f.message}")
    if not args.quiet and not findings:
        print("clean")
    return EXIT_FINDINGS if findings else EXIT_OK


def _cmd_audit(args) -> int:
    try:
        records = parse_exposure_csv(Path(args.log).read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise _CliError(f"cannot read exposure log: {e}") from e
    ds_doc = _load_json(args.datasheet)
    interface = _interface_from_datasheet(ds_doc)
    verdict = audit(records, interface)
    for f in verdict.findings:
        print(f"{f.code}: {f.message}")
    if not args.quiet:
        print("pass" if verdict.passed else "fail")
    return EXIT_OK if verdict.passed else EXIT_FINDINGS


_DEMO_SCENARIO = {
    "seed": 2024,
    "duration_ms": 3000,
    "devices": [
        {
            "id": "gaze",
            "kind": "GAZE",
            "stimuli": [
                {
                    "modality": "scene",
                    "at": 0,
                    "every_ms": 100,
                    "count": 30,
                    "params": {
                        "person_present": True,
                        "facing_camera": True,
                        "distance_m": 1.0,
                        "illuminance_lux": 800,
                        "noise_sigma": 4.0,
                    },
                }
            ],
        },
        {
            "id": "voice",
            "kind": "VOICE_PIN",
            "stimuli": [
                {
                    "modality": "audio",
                    "at": 0,
                    "script": [["on", 1000], ["off", 2200]],
                    "vocabulary": ["on", "off"],
                }
            ],
        },
    ],
    "composites": [
        {
            "combinator": "gaze_voice",
            "line_id": "LIGHT_ON",
            "gaze": "gaze",
            "voice": "voice",
            "window_ms": 500,
        }
    ],
}


def _cmd_compose_demo(args) -> int:
    doc = json.loads(json.dumps(_DEMO_SCENARIO))
    if args.seed is not None:
        doc["seed"] = args.seed
    result = run_scenario(doc)
    out = Path(args.out)
    _write(out / "trace.csv", result.bus.trace_csv(), args.quiet)
    trace = result.bus.virtual_trace("LIGHT_ON")
    intervals = high_intervals(trace, doc["duration_ms"])
    if not args.quiet:
        for iv in intervals:
            end = "run end" if iv.open_ended else str(iv.end)
            print(f"LIGHT_ON high [{iv.start}, {end})")
        if not intervals:
            print("LIGHT_ON never asserted")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vsensor", description="Virtual ML-sensor emulation toolkit"
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="suppress chatter")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario file", parents=[common])
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=".")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("conformance", parents=[common], help="run a conformance protocol")
    p.add_argument("protocol")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="report.cfr.json")
    p.set_defaults(fn=_cmd_conformance)

    p = sub.add_parser("datasheet", parents=[common], help="datasheet toolchain")
    p.add_argument("action", choices=("validate", "render", "crosscheck"))
    p.add_argument("file")
    p.add_argument("--mode", choices=("machine", "human"), default="human")
    p.add_argument("--out", default=None)
    p.add_argument("--device-from", dest="device_from", default=None)
    p.add_argument("--device", default=None)
    p.set_defaults(fn=_cmd_datasheet)

    p = sub.add_parser("audit", parents=[common], help="audit an exposure log against a datasheet")
    p.add_argument("log")
    p.add_argument("datasheet")
    p.set_defaults(fn=_cmd_audit)

    p = sub.add_parser("compose-demo", parents=[common], help="run the gaze-gated voice demo")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=".")
    p.set_defaults(fn=_cmd_compose_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except _CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ds_mod.DatasheetError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FINDINGS
    except (DeviceError, BusError, ScenarioError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
