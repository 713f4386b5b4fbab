import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from swlink.decompose import CoefficientRole, CoefficientVector
from swlink.ensemble import (
    DEFAULT_THRESHOLD_DB,
    LinkCell,
    ScenarioEnsemble,
    ScenarioEntry,
    apply_calibration,
    calibration_factor,
    evaluate_ensemble,
    kpi,
    kpi_from_cells,
    measurement_stats,
)
from swlink.errors import (
    DimensionMismatchError,
    EmptyEnsembleError,
    InconsistentFrequencyError,
    ValidationError,
    ZeroMeasurementError,
)
from swlink.network import ChannelKind, ChannelMatrix

FREQ = 2.45e9


def _vec(values, role=CoefficientRole.RECEIVE, frequency=FREQ):
    return CoefficientVector(
        role=role, values=np.asarray(values, dtype=complex),
        origin=(0, 0, 0), frequency=frequency,
    )


def _channel(values, frequency=FREQ):
    return ChannelMatrix(
        kind=ChannelKind.TRANSMISSION_EQUIVALENT,
        values=np.asarray(values, dtype=complex),
        tx_origin=(0, 0, 0), rx_origin=(1, 0, 0), frequency=frequency,
    )


def _entry(tag, weight, gain, frequency=FREQ):
    return ScenarioEntry(
        tag=tag,
        weight=weight,
        m21=_channel(gain * np.eye(6), frequency=frequency),
        receive=_vec(np.eye(6)[3], frequency=frequency),
    )


def _transmit(values=None):
    if values is None:
        values = np.eye(6)[3]
    return _vec(values, role=CoefficientRole.TRANSMIT)


def test_weights_must_sum_to_one():
    entries = (_entry(("a", "c", "FL"), 0.5, 1.0), _entry(("a", "c", "FR"), 0.4, 1.0))
    with pytest.raises(ValidationError):
        ScenarioEnsemble(entries=entries, frequency=FREQ)


def test_empty_ensemble_rejected():
    with pytest.raises(EmptyEnsembleError):
        ScenarioEnsemble(entries=(), frequency=FREQ)


def test_mixed_frequencies_rejected():
    entries = (
        _entry(("a", "c", "FL"), 0.5, 1.0),
        _entry(("a", "c", "FR"), 0.5, 1.0, frequency=2.0 * FREQ),
    )
    with pytest.raises(InconsistentFrequencyError):
        ScenarioEnsemble(entries=entries, frequency=FREQ)


def test_evaluate_matches_hand_link():
    # diagonal channel, e4 receiver, e4 transmit: S21 equals the diagonal gain
    entries = (
        _entry(("a", "c", "FL"), 0.5, 3e-4),
        _entry(("a", "c", "FR"), 0.5, 1e-4),
    )
    ens = ScenarioEnsemble(entries=entries, frequency=FREQ)
    report = evaluate_ensemble(ens, _transmit())
    assert_allclose([s.s21 for s in report.samples], [3e-4, 1e-4])
    assert_allclose(
        [s.magnitude_db for s in report.samples],
        [20.0 * math.log10(3e-4), 20.0 * math.log10(1e-4)],
    )
    assert report.threshold_db == DEFAULT_THRESHOLD_DB


def test_evaluate_accepts_bare_excitation_role():
    entries = (_entry(("a", "c", "FL"), 1.0, 1.0),)
    ens = ScenarioEnsemble(entries=entries, frequency=FREQ)
    report = evaluate_ensemble(ens, _vec(np.eye(6)[3], role=CoefficientRole.OUTGOING))
    assert_allclose(abs(report.samples[0].s21), 1.0)
    with pytest.raises(ValidationError):
        evaluate_ensemble(ens, _vec(np.eye(6)[3], role=CoefficientRole.RAW_OUTGOING))


def test_evaluate_checks_truncation():
    entries = (_entry(("a", "c", "FL"), 1.0, 1.0),)
    ens = ScenarioEnsemble(entries=entries, frequency=FREQ)
    with pytest.raises(DimensionMismatchError):
        evaluate_ensemble(ens, _vec(np.ones(16), role=CoefficientRole.TRANSMIT))


def test_identical_channels_average_to_single_value():
    entries = tuple(
        _entry((a, "c", "FL"), 1.0 / 3.0, 2e-4) for a in ("s", "m", "l")
    )
    ens = ScenarioEnsemble(entries=entries, frequency=FREQ)
    report = evaluate_ensemble(ens, _transmit())
    assert len(report.cells) == 1
    assert_allclose(report.cells[0].magnitude_db, 20.0 * math.log10(2e-4))
    assert report.cells[0].n_anatomy == 3


def test_all_zero_channels_floor_and_full_kpi():
    entries = (_entry(("a", "c", "FL"), 0.5, 0.0), _entry(("a", "c", "FR"), 0.5, 0.0))
    ens = ScenarioEnsemble(entries=entries, frequency=FREQ)
    report = evaluate_ensemble(ens, _transmit())
    assert report.kpi_fraction == 1.0
    assert report.kpi_count == 2
    assert all(np.isfinite(c.magnitude_db) for c in report.cells)


def test_single_anatomy_cells_equal_samples():
    entries = (
        _entry(("solo", "c", "FL"), 0.5, 1e-3),
        _entry(("solo", "c", "FR"), 0.5, 2e-3),
    )
    ens = ScenarioEnsemble(entries=entries, frequency=FREQ)
    report = evaluate_ensemble(ens, _transmit())
    for sample, cell in zip(report.samples, report.cells):
        assert_allclose(cell.magnitude_db, sample.magnitude_db, rtol=1e-15)
        assert cell.n_anatomy == 1


def test_linear_vs_db_averaging():
    entries = (
        _entry(("s", "c", "FL"), 0.5, 1e-3),
        _entry(("l", "c", "FL"), 0.5, 1e-5),
    )
    ens = ScenarioEnsemble(entries=entries, frequency=FREQ)
    linear = evaluate_ensemble(ens, _transmit())
    in_db = evaluate_ensemble(ens, _transmit(), db_average=True)
    assert_allclose(
        linear.cells[0].magnitude_db, 20.0 * math.log10(0.5 * (1e-3 + 1e-5))
    )
    assert_allclose(in_db.cells[0].magnitude_db, 0.5 * (-60.0 - 100.0))
    assert linear.cells[0].magnitude_db > in_db.cells[0].magnitude_db


def test_duplicated_entry_with_halved_weight_is_invariant():
    base = (
        _entry(("s", "c", "FL"), 0.5, 1e-3),
        _entry(("l", "c", "FL"), 0.5, 4e-3),
    )
    split = (
        _entry(("s", "c", "FL"), 0.5, 1e-3),
        _entry(("l", "c", "FL"), 0.25, 4e-3),
        _entry(("l", "c", "FL"), 0.25, 4e-3),
    )
    r1 = evaluate_ensemble(ScenarioEnsemble(entries=base, frequency=FREQ), _transmit())
    r2 = evaluate_ensemble(ScenarioEnsemble(entries=split, frequency=FREQ), _transmit())
    assert_allclose(
        r1.cells[0].magnitude_db, r2.cells[0].magnitude_db, atol=1e-12
    )


def test_cell_lookup():
    entries = (
        _entry(("s", "c", "FL"), 0.5, 1e-3),
        _entry(("s", "r", "BL"), 0.5, 1e-4),
    )
    report = evaluate_ensemble(
        ScenarioEnsemble(entries=entries, frequency=FREQ), _transmit()
    )
    cell = report.cell("r", "BL")
    assert_allclose(cell.magnitude_db, -80.0)
    with pytest.raises(KeyError):
        report.cell("r", "FR")


def test_kpi_strictly_below_and_monotone():
    cells = [
        LinkCell(pose="c", rx="FL", magnitude_db=-70.0, n_anatomy=1),
        LinkCell(pose="c", rx="FR", magnitude_db=-71.0, n_anatomy=1),
        LinkCell(pose="c", rx="BL", magnitude_db=-69.0, n_anatomy=1),
    ]
    fraction, count = kpi_from_cells(cells, -70.0)
    assert (fraction, count) == (1.0 / 3.0, 1)  # exactly at threshold not counted
    prev = 0
    for thr in (-80.0, -70.5, -70.0, -69.5, -60.0):
        _, c = kpi_from_cells(cells, thr)
        assert c >= prev
        prev = c


def test_kpi_minus_infinity_threshold():
    entries = (_entry(("a", "c", "FL"), 1.0, 1e-3),)
    report = evaluate_ensemble(
        ScenarioEnsemble(entries=entries, frequency=FREQ), _transmit()
    )
    fraction, count = kpi(report, float("-inf"))
    assert (fraction, count) == (0.0, 0)


def test_kpi_paper_table_fractions():
    def cells_with(n_below):
        cells = []
        for i in range(20):
            db = -75.0 if i < n_below else -65.0
            cells.append(LinkCell(pose=f"p{i // 4}", rx=f"r{i % 4}",
                                  magnitude_db=db, n_anatomy=3))
        return cells

    assert kpi_from_cells(cells_with(1)) == (0.05, 1)
    assert kpi_from_cells(cells_with(4)) == (0.20, 4)
    assert kpi_from_cells(cells_with(3)) == (0.15, 3)


def test_calibration_factor():
    assert_allclose(calibration_factor(1e-3, 1e-3), 1.0)
    assert_allclose(calibration_factor(2e-3, 1e-3), 2.0)
    with pytest.raises(ZeroMeasurementError):
        calibration_factor(1e-3, 0.0)
    with pytest.raises(ValidationError):
        calibration_factor(0.0, 1e-3)


def test_apply_calibration_shifts_db():
    shifted = apply_calibration([-80.0, -60.0], 2.0)
    assert_allclose(shifted, [-80.0 + 20.0 * math.log10(2.0),
                              -60.0 + 20.0 * math.log10(2.0)])
    # calibrating by the simulated/measured ratio equalizes the means
    simulated, measured = 4e-4, 1e-4
    factor = calibration_factor(simulated, measured)
    out = apply_calibration([20.0 * math.log10(measured)], factor)
    assert_allclose(out[0], 20.0 * math.log10(simulated), rtol=1e-12)


def test_measurement_stats_quartiles():
    samples = [-81.0, -79.0, -78.0, -77.0, -76.0, -75.0, -74.0, -40.0]
    stats = measurement_stats(samples)
    assert stats.n == 8
    assert_allclose(stats.mean, np.mean(samples))
    assert_allclose(stats.median, np.percentile(samples, 50))
    assert_allclose(stats.q1, np.percentile(samples, 25))
    assert_allclose(stats.q3, np.percentile(samples, 75))
    # -40 lies far above the 1.5 IQR fence
    assert stats.outliers == (-40.0,)
    assert stats.whisker_high == -74.0
    assert stats.whisker_low == -81.0


def test_measurement_stats_requires_samples():
    with pytest.raises(ValidationError):
        measurement_stats([])
