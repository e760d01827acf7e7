import json
from pathlib import Path

import pytest

from vsensor.datasheet import (
    SECTIONS,
    Datasheet,
    DatasheetError,
    Finding,
    attach_performance,
    canonical_json,
    cross_check,
    datasheet_for_device,
    parse,
    render,
    validate,
)
from vsensor.devkit import power_on
from vsensor.sensors import person_detector, tap_sensor, text_reader
from vsensor.stimuli.scene import SceneParams, render_scene
from vsensor.vbus import Bus

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load(name: str) -> Datasheet:
    parsed = parse((FIXTURES / name).read_text())
    assert isinstance(parsed, Datasheet)
    return parsed


class TestParse:
    def test_fixture_has_ten_sections(self):
        ds = load("person.mlsd.json")
        assert all(name in ds.doc for name in SECTIONS)
        assert len(SECTIONS) == 10

    def test_duplicate_section_rejected(self):
        text = '{"schema": 1, "compliance": [], "compliance": []}'
        errors = parse(text)
        assert isinstance(errors, list)
        assert "duplicate key" in errors[0].message

    def test_syntax_error_with_position(self):
        errors = parse('{"schema": 1,,}')
        assert isinstance(errors, list)
        assert errors[0].line == 1 and errors[0].column is not None

    def test_non_object_top_level(self):
        assert isinstance(parse("[1, 2]"), list)


class TestValidate:
    def test_complete_fixture_clean(self):
        assert validate(load("person.mlsd.json")) == []

    def test_empty_document_all_sections_missing(self):
        violations = validate(Datasheet({"schema": 1}))
        missing = [v for v in violations if v.code == "MISSING_SECTION"]
        assert len(missing) == 10

    def test_missing_nutrition_fixture(self):
        violations = validate(load("missing_nutrition.mlsd.json"))
        assert [(v.section, v.code) for v in violations] == [
            ("dataset_nutrition", "MISSING_SECTION")
        ]

    def test_network_capability_forbidden(self):
        violations = validate(load("network_wifi.mlsd.json"))
        assert [(v.section, v.code) for v in violations] == [
            ("privacy_security_label", "FORBIDDEN_VALUE")
        ]

    def test_missing_field(self):
        ds = load("person.mlsd.json")
        del ds.doc["form_factor"]["mounting"]
        violations = validate(ds)
        assert [(v.section, v.code) for v in violations] == [
            ("form_factor", "MISSING_FIELD")
        ]

    def test_violations_sorted(self):
        ds = Datasheet({"schema": 1})
        violations = validate(ds)
        keys = [(v.section, v.code) for v in violations]
        assert keys == sorted(keys)

    def test_duplicate_pin_names_inconsistent(self):
        ds = load("person.mlsd.json")
        ds.doc["comm_spec_pinout"]["pins"].append(
            {"name": "DETECT", "role": "signal_out"}
        )
        assert any(v.code == "INCONSISTENT" for v in validate(ds))


class TestRender:
    def test_machine_canonical_and_stable(self):
        ds = load("person.mlsd.json")
        a, b = render(ds, "machine"), render(ds, "machine")
        assert a == b
        assert a.endswith("\n") and "\r" not in a

    def test_machine_round_trip(self):
        ds = load("person.mlsd.json")
        text = render(ds, "machine")
        again = parse(text)
        assert isinstance(again, Datasheet) and again.doc == ds.doc
        assert render(again, "machine") == text

    def test_fixture_is_canonical_on_disk(self):
        raw = (FIXTURES / "person.mlsd.json").read_text()
        assert render(parse(raw), "machine") == raw

    def test_human_mode_has_all_headings(self):
        text = render(load("person.mlsd.json"), "human")
        assert text.count("\n## ") == 10

    def test_invalid_datasheet_rejected(self):
        with pytest.raises(DatasheetError) as e:
            render(load("missing_nutrition.mlsd.json"))
        assert e.value.code == "INVALID_DATASHEET"


class TestCrossCheck:
    def run_person(self):
        bus = Bus()
        dev = person_detector()
        wiring = {"VDD": "vdd", "GND": "gnd", "DETECT": "p1.DETECT"}
        power_on(dev, bus, wiring)
        frame = render_scene(SceneParams(True, False, 1.0, 800, 4.0, seed=1))
        for k in range(5):
            dev.feed_stimulus(frame, k * 100)
        bus.advance(600)
        return dev, bus, wiring

    def test_honest_fixture_clean(self):
        dev, bus, wiring = self.run_person()
        findings = cross_check(load("person.mlsd.json"), dev, bus.exposure_log, wiring)
        assert findings == []

    def test_pinout_mismatch_fixture(self):
        dev, bus, wiring = self.run_person()
        findings = cross_check(
            load("pinout_mismatch.mlsd.json"), dev, bus.exposure_log, wiring
        )
        assert [f.code for f in findings] == ["PINOUT_MISMATCH"]

    def test_serial_shape_mismatch(self):
        ds = load("person.mlsd.json")
        bus = Bus()
        dev = text_reader()
        power_on(dev, bus, {"VDD": "vdd", "GND": "gnd"})
        findings = cross_check(ds, dev, [], {})
        assert "PINOUT_MISMATCH" in [f.code for f in findings]

    def test_timing_mismatch(self):
        dev, bus, wiring = self.run_person()
        ds = load("person.mlsd.json")
        ds.doc["comm_spec_pinout"]["timing"]["cadence_ms"] = 250
        findings = cross_check(ds, dev, bus.exposure_log, wiring)
        assert [f.code for f in findings] == ["TIMING_MISMATCH"]

    def test_undeclared_exposure(self):
        dev, bus, wiring = self.run_person()
        ds = load("person.mlsd.json")
        ds.doc["privacy_security_label"]["data_exposed"] = []
        findings = cross_check(ds, dev, bus.exposure_log, wiring)
        assert [f.code for f in findings] == ["UNDECLARED_EXPOSURE"]


class TestAttachPerformance:
    REPORT = {
        "protocol": {"sensor_kind": "PERSON", "seed": 1},
        "cells": [{"distance_m": 1.0, "lux": 800, "tpr": 1.0, "fpr": 0.0}],
        "envelope": {"max_distance_m": 1.0, "min_lux": 800,
                     "tpr_min": 0.9, "fpr_max": 0.05},
        "tool_version": "1.0",
    }

    def test_populates_and_validates(self):
        ds = attach_performance(load("person.mlsd.json"), self.REPORT)
        assert ds.doc["end_to_end_performance"]["envelope"]["max_distance_m"] == 1.0
        assert validate(ds) == []

    def test_kind_mismatch(self):
        bad = json.loads(json.dumps(self.REPORT))
        bad["protocol"]["sensor_kind"] = "TAP"
        with pytest.raises(DatasheetError) as e:
            attach_performance(load("person.mlsd.json"), bad)
        assert e.value.code == "KIND_MISMATCH"

    def test_second_attach_replaces_first(self):
        ds = attach_performance(load("person.mlsd.json"), self.REPORT)
        second = json.loads(json.dumps(self.REPORT))
        second["envelope"]["max_distance_m"] = 2.0
        ds2 = attach_performance(ds, second)
        assert ds2.doc["end_to_end_performance"]["envelope"]["max_distance_m"] == 2.0


def test_datasheet_for_device_truthful_for_every_kind():
    from vsensor.sensors import (
        gaze_detector,
        voice_sensor_pin,
        voice_sensor_serial,
    )

    for factory in (person_detector, gaze_detector, tap_sensor, voice_sensor_pin,
                    lambda: voice_sensor_serial(["on", "off"]), text_reader):
        dev = factory()
        ds = Datasheet(datasheet_for_device(dev))
        assert validate(ds) == []
        assert cross_check(ds, dev, []) == []
