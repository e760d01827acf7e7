"""Conformance harness: labeled stimuli across a distance × illuminance
grid, reporting per-cell true/false positive rates and assertion latency.

Every trial runs on a fresh bus and device with an index-derived seed, so
trial execution order cannot influence the report.  The grid axes apply
to the scene-modality kinds (PERSON, GAZE); for a GAZE sensor the
negative trials show a person facing away — the discriminative case —
rather than an empty room.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .datasheet import canonical_json
from .devkit import DeviceError, DeviceKind, SensorDevice, power_on
from .stimuli.scene import SceneParams, render_scene
from .vbus import Bus

TOOL_VERSION = "1.0"
DEFAULT_NOISE_SIGMA = 4.0
GRID_KINDS = (DeviceKind.PERSON, DeviceKind.GAZE)


@dataclass
class TestProtocol:
    __test__ = False  # keep pytest from collecting this as a test class

    sensor_kind: DeviceKind
    distance_levels_m: list[float]
    lux_levels: list[float]
    trials_per_cell: int = 200
    positive_fraction: float = 0.5
    latency_budget_ms: int = 1000
    negative_window_ms: int = 5000
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.distance_levels_m or not self.lux_levels:
            raise ValueError("grids must be non-empty")
        if self.trials_per_cell < 10:
            raise ValueError("trials_per_cell must be >= 10")
        if not (0.0 < self.positive_fraction < 1.0):
            raise ValueError("positive_fraction must be in (0, 1)")
        if self.sensor_kind not in GRID_KINDS:
            raise ValueError(
                f"distance/lux grid applies to {[k.name for k in GRID_KINDS]}, "
                f"not {self.sensor_kind.name}"
            )

    def to_doc(self) -> dict:
        return {
            "sensor_kind": self.sensor_kind.name,
            "distance_levels_m": list(self.distance_levels_m),
            "lux_levels": list(self.lux_levels),
            "trials_per_cell": self.trials_per_cell,
            "positive_fraction": self.positive_fraction,
            "latency_budget_ms": self.latency_budget_ms,
            "negative_window_ms": self.negative_window_ms,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "TestProtocol":
        return cls(
            sensor_kind=DeviceKind[doc["sensor_kind"]],
            distance_levels_m=list(doc["distance_levels_m"]),
            lux_levels=list(doc["lux_levels"]),
            trials_per_cell=doc.get("trials_per_cell", 200),
            positive_fraction=doc.get("positive_fraction", 0.5),
            latency_budget_ms=doc.get("latency_budget_ms", 1000),
            negative_window_ms=doc.get("negative_window_ms", 5000),
            noise_sigma=doc.get("noise_sigma", DEFAULT_NOISE_SIGMA),
            seed=doc.get("seed", 0),
        )


@dataclass
class CellResult:
    distance_m: float
    lux: float
    trials: int
    tpr: float
    fpr: float
    mean_latency_ms: float | None
    p95_latency_ms: int | None

    def to_doc(self) -> dict:
        return {
            "distance_m": self.distance_m,
            "lux": self.lux,
            "trials": self.trials,
            "tpr": self.tpr,
            "fpr": self.fpr,
            "mean_latency_ms": self.mean_latency_ms,
            "p95_latency_ms": self.p95_latency_ms,
        }


@dataclass
class OperatingEnvelope:
    max_distance_m: float
    min_lux: float
    tpr_min: float
    fpr_max: float

    def to_doc(self) -> dict:
        return {
            "max_distance_m": self.max_distance_m,
            "min_lux": self.min_lux,
            "tpr_min": self.tpr_min,
            "fpr_max": self.fpr_max,
        }


@dataclass
class ConformanceReport:
    protocol: TestProtocol
    cells: list[CellResult]
    tool_version: str = TOOL_VERSION
    envelope_summary: OperatingEnvelope | None = None

    def cell(self, distance_m: float, lux: float) -> CellResult:
        for c in self.cells:
            if c.distance_m == distance_m and c.lux == lux:
                return c
        raise KeyError((distance_m, lux))

    def to_doc(self) -> dict:
        return {
            "protocol": self.protocol.to_doc(),
            "cells": [c.to_doc() for c in self.cells],
            "envelope": self.envelope_summary.to_doc()
            if self.envelope_summary
            else None,
            "tool_version": self.tool_version,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_doc())

    @classmethod
    def from_doc(cls, doc: dict) -> "ConformanceReport":
        cells = [
            CellResult(
                c["distance_m"],
                c["lux"],
                c["trials"],
                c["tpr"],
                c["fpr"],
                c["mean_latency_ms"],
                c["p95_latency_ms"],
            )
            for c in doc["cells"]
        ]
        env = doc.get("envelope")
        return cls(
            TestProtocol.from_doc(doc["protocol"]),
            cells,
            doc.get("tool_version", TOOL_VERSION),
            OperatingEnvelope(
                env["max_distance_m"], env["min_lux"], env["tpr_min"], env["fpr_max"]
            )
            if env
            else None,
        )


def trial_seed(protocol_seed: int, cell_index: int, trial_index: int) -> int:
    """Index-derived per-trial seed; execution order cannot matter."""
    digest = hashlib.sha256(
        f"{protocol_seed}:{cell_index}:{trial_index}".encode()
    ).digest()
    return int.from_bytes(digest[:8], "little")


def _run_trial(
    factory, protocol: TestProtocol, distance_m: float, lux: float,
    positive: bool, seed: int,
) -> tuple[bool, int | None]:
    """(asserted within window, first assertion latency ms or None)."""
    rng = np.random.default_rng(seed)
    bus = Bus()
    device = factory()
    pin = device.interface.signal_pins()[0]
    power_on(device, bus, {"VDD": "vdd", "GND": "gnd", pin: "out"})
    frame_period = device.cadence_ms
    window = protocol.latency_budget_ms if positive else protocol.negative_window_ms
    facing = protocol.sensor_kind == DeviceKind.GAZE
    if positive:
        scene = SceneParams(True, facing, distance_m, lux, protocol.noise_sigma, 0)
    elif facing:
        # the discriminative gaze negative: person present, facing away
        scene = SceneParams(True, False, distance_m, lux, protocol.noise_sigma, 0)
    else:
        scene = SceneParams(False, False, distance_m, lux, protocol.noise_sigma, 0)
    t = 0
    trace = None
    while t < window:
        frame_seed = int(rng.integers(0, 2**63))
        device.feed_stimulus(
            render_scene(
                SceneParams(
                    scene.person_present,
                    scene.facing_camera,
                    scene.distance_m,
                    scene.illuminance_lux,
                    scene.noise_sigma,
                    frame_seed,
                )
            ),
            t,
        )
        bus.advance(frame_period)
        t += frame_period
        trace = bus.trace("out")
        if positive and trace.rising_edges():
            break  # early stop: assertion observed
    edges = trace.rising_edges() if trace is not None else []
    if not edges:
        return False, None
    latency = edges[0]
    if positive and latency > protocol.latency_budget_ms:
        return False, latency
    return True, latency


def run(
    factory,
    protocol: TestProtocol,
    execution_order: list[tuple[int, int]] | None = None,
) -> ConformanceReport:
    """Run the full grid; deterministic given the protocol (incl. seed).

    ``execution_order`` may permute the (cell index, trial index) pairs;
    trials are isolated and index-seeded, so the assembled report is
    identical for every permutation.
    """
    probe = factory()
    if probe.kind != protocol.sensor_kind:
        raise DeviceError(
            "FACTORY_KIND_MISMATCH",
            f"factory builds {probe.kind.name}, protocol wants "
            f"{protocol.sensor_kind.name}",
        )
    grid = [
        (d, lux)
        for d in protocol.distance_levels_m
        for lux in protocol.lux_levels
    ]
    n_pos = round(protocol.trials_per_cell * protocol.positive_fraction)
    pairs = [
        (ci, ti)
        for ci in range(len(grid))
        for ti in range(protocol.trials_per_cell)
    ]
    if execution_order is None:
        execution_order = pairs
    elif sorted(execution_order) != pairs:
        raise ValueError("execution_order must permute the full trial set")
    outcomes: dict[tuple[int, int], tuple[bool, int | None]] = {}
    for ci, ti in execution_order:
        distance_m, lux = grid[ci]
        outcomes[(ci, ti)] = _run_trial(
            factory,
            protocol,
            distance_m,
            lux,
            ti < n_pos,
            trial_seed(protocol.seed, ci, ti),
        )
    cells: list[CellResult] = []
    n_neg = protocol.trials_per_cell - n_pos
    for ci, (distance_m, lux) in enumerate(grid):
        tp = fp = 0
        latencies: list[int] = []
        for ti in range(protocol.trials_per_cell):
            asserted, latency = outcomes[(ci, ti)]
            if ti < n_pos and asserted:
                tp += 1
                latencies.append(latency)
            elif ti >= n_pos and asserted:
                fp += 1
        latencies.sort()
        cells.append(
            CellResult(
                distance_m=distance_m,
                lux=lux,
                trials=protocol.trials_per_cell,
                tpr=round(tp / n_pos, 6),
                fpr=round(fp / n_neg, 6),
                mean_latency_ms=round(sum(latencies) / len(latencies), 2)
                if latencies
                else None,
                p95_latency_ms=latencies[max(0, -(-95 * len(latencies) // 100) - 1)]
                if latencies
                else None,
            )
        )
    report = ConformanceReport(protocol, cells)
    report.envelope_summary = envelope(report)
    return report


def envelope(
    report: ConformanceReport, tpr_min: float = 0.9, fpr_max: float = 0.05
) -> OperatingEnvelope | None:
    """Largest (max distance, min lux) box whose cells all meet thresholds.

    Among qualifying boxes the maximum distance wins, then the minimum
    lux; None when no cell qualifies.
    """
    distances = sorted(set(c.distance_m for c in report.cells))
    luxes = sorted(set(c.lux for c in report.cells), reverse=True)
    best: tuple[float, float] | None = None
    for max_d in distances:
        for min_lux in luxes:
            box = [
                c
                for c in report.cells
                if c.distance_m <= max_d and c.lux >= min_lux
            ]
            if all(c.tpr >= tpr_min and c.fpr <= fpr_max for c in box):
                if (
                    best is None
                    or max_d > best[0]
                    or (max_d == best[0] and min_lux < best[1])
                ):
                    best = (max_d, min_lux)
    if best is None:
        return None
    return OperatingEnvelope(best[0], best[1], tpr_min, fpr_max)


@dataclass
class CellDelta:
    distance_m: float
    lux: float
    tpr_delta: float
    fpr_delta: float
    latency_delta_ms: float | None


@dataclass
class Comparison:
    deltas: list[CellDelta]
    dominated_cells: int = 0  # cells where b is no better on any metric

    def to_doc(self) -> dict:
        return {
            "deltas": [
                {
                    "distance_m": d.distance_m,
                    "lux": d.lux,
                    "tpr_delta": d.tpr_delta,
                    "fpr_delta": d.fpr_delta,
                    "latency_delta_ms": d.latency_delta_ms,
                }
                for d in self.deltas
            ],
            "dominated_cells": self.dominated_cells,
        }


def compare(a: ConformanceReport, b: ConformanceReport) -> Comparison:
    """Cellwise b-minus-a deltas; reports must share the grid shape."""
    grid_a = [(c.distance_m, c.lux) for c in a.cells]
    grid_b = [(c.distance_m, c.lux) for c in b.cells]
    if grid_a != grid_b:
        raise DeviceError("SHAPE_MISMATCH", "reports cover different grids")
    deltas = []
    dominated = 0
    for ca, cb in zip(a.cells, b.cells):
        lat = (
            round(cb.mean_latency_ms - ca.mean_latency_ms, 2)
            if ca.mean_latency_ms is not None and cb.mean_latency_ms is not None
            else None
        )
        deltas.append(
            CellDelta(
                ca.distance_m,
                ca.lux,
                round(cb.tpr - ca.tpr, 6),
                round(cb.fpr - ca.fpr, 6),
                lat,
            )
        )
        if cb.tpr <= ca.tpr and cb.fpr >= ca.fpr:
            dominated += 1
    return Comparison(deltas, dominated)
