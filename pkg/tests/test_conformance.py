import pytest

from vsensor.conformance import (
    ConformanceReport,
    TestProtocol,
    compare,
    envelope,
    run,
    trial_seed,
)
from vsensor.devkit import DeviceError, DeviceKind
from vsensor.sensors import make_person_blob, person_detector, tap_sensor

SMALL = TestProtocol(
    DeviceKind.PERSON,
    [1.0, 2.0],
    [200, 800],
    trials_per_cell=10,
    negative_window_ms=2000,
    seed=7,
)


@pytest.fixture(scope="module")
def small_report():
    return run(person_detector, SMALL)


class TestProtocolValidation:
    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            TestProtocol(DeviceKind.PERSON, [], [800])

    def test_too_few_trials(self):
        with pytest.raises(ValueError):
            TestProtocol(DeviceKind.PERSON, [1.0], [800], trials_per_cell=5)

    def test_fraction_bounds(self):
        with pytest.raises(ValueError):
            TestProtocol(DeviceKind.PERSON, [1.0], [800], positive_fraction=1.0)

    def test_grid_kinds_only(self):
        with pytest.raises(ValueError):
            TestProtocol(DeviceKind.TAP, [1.0], [800])

    def test_doc_round_trip(self):
        doc = SMALL.to_doc()
        assert TestProtocol.from_doc(doc).to_doc() == doc


class TestRun:
    def test_grid_shape(self, small_report):
        assert len(small_report.cells) == 4
        assert all(c.trials == 10 for c in small_report.cells)

    def test_nominal_cell_perfect(self, small_report):
        cell = small_report.cell(1.0, 800)
        assert cell.tpr == 1.0 and cell.fpr == 0.0

    def test_reproducible(self, small_report):
        again = run(person_detector, SMALL)
        assert again.to_json() == small_report.to_json()

    def test_trial_order_permutation_invariant(self, small_report):
        import random

        pairs = [(ci, ti) for ci in range(4) for ti in range(10)]
        random.Random(123).shuffle(pairs)
        shuffled = run(person_detector, SMALL, execution_order=pairs)
        assert shuffled.to_json() == small_report.to_json()

    def test_bad_execution_order_rejected(self):
        with pytest.raises(ValueError):
            run(person_detector, SMALL, execution_order=[(0, 0)])

    def test_factory_kind_mismatch(self):
        with pytest.raises(DeviceError) as e:
            run(tap_sensor, SMALL)
        assert e.value.code == "FACTORY_KIND_MISMATCH"

    def test_trial_seeds_index_derived(self):
        assert trial_seed(7, 0, 0) != trial_seed(7, 0, 1)
        assert trial_seed(7, 0, 0) == trial_seed(7, 0, 0)

    def test_report_doc_round_trip(self, small_report):
        doc = small_report.to_doc()
        assert ConformanceReport.from_doc(doc).to_doc() == doc


class TestEnvelope:
    def report_with(self, rates):
        # rates: {(d, lux): (tpr, fpr)}
        from vsensor.conformance import CellResult

        cells = [
            CellResult(d, lux, 10, tpr, fpr, 200.0, 200)
            for (d, lux), (tpr, fpr) in rates.items()
        ]
        return ConformanceReport(SMALL, cells)

    def test_partial_qualification(self):
        rep = self.report_with({
            (1.0, 200): (1.0, 0.0), (1.0, 800): (1.0, 0.0),
            (2.0, 200): (0.95, 0.0), (2.0, 800): (1.0, 0.0),
            (3.0, 200): (0.5, 0.0), (3.0, 800): (0.7, 0.0),
        })
        env = envelope(rep)
        assert (env.max_distance_m, env.min_lux) == (2.0, 200)

    def test_trivial_thresholds_cover_grid(self, small_report):
        env = envelope(small_report, tpr_min=0.0, fpr_max=1.0)
        assert env.max_distance_m == 2.0 and env.min_lux == 200

    def test_impossible_thresholds(self, small_report):
        assert envelope(small_report, tpr_min=1.01) is None


class TestCompare:
    def test_self_comparison_zero(self, small_report):
        cmpres = compare(small_report, small_report)
        assert all(d.tpr_delta == 0 and d.fpr_delta == 0 for d in cmpres.deltas)

    def test_raised_threshold_never_raises_fpr(self, small_report):
        strict = lambda: person_detector(params=make_person_blob(threshold=0.9))
        rep = run(strict, SMALL)
        cmpres = compare(small_report, rep)
        assert all(d.fpr_delta <= 0 for d in cmpres.deltas)

    def test_shape_mismatch(self, small_report):
        other = TestProtocol(
            DeviceKind.PERSON, [1.0], [800], trials_per_cell=10, seed=7,
            negative_window_ms=1000,
        )
        rep = run(person_detector, other)
        with pytest.raises(DeviceError) as e:
            compare(small_report, rep)
        assert e.value.code == "SHAPE_MISMATCH"
