import math
import zipfile

import numpy as np
import pytest
from numpy.testing import assert_allclose

from swlink import fileio
from swlink.decompose import (
    BoxGeometry,
    CoefficientRole,
    CoefficientVector,
    SphereGeometry,
)
from swlink.ensemble import ScenarioEnsemble, ScenarioEntry, evaluate_ensemble
from swlink.errors import MissingColumnError, ParseError
from swlink.modes import Medium, WaveKind, mode_fields
from swlink.network import ChannelKind, ChannelMatrix
from swlink.decompose import FieldSurface

MED = Medium.free_space(frequency=299792458.0)
LAM = 2.0 * math.pi / MED.k


def _surface(geometry=None):
    rng = np.random.default_rng(51)
    if geometry is None:
        geometry = SphereGeometry(center=(0.1, 0.0, -0.2), radius=0.9 * LAM,
                                  n_theta=8, n_phi=16)
    pts, normals, weights = geometry.quadrature()
    b = rng.normal(size=6) + 1j * rng.normal(size=6)
    e, h = mode_fields(b, WaveKind.OUTGOING, MED, pts,
                       origin=np.asarray(geometry.center))
    return FieldSurface(geometry=geometry, points=pts, normals=normals,
                        weights=weights, e=e, h=h, frequency=MED.frequency)


def _coefficients(accepted_power=None):
    rng = np.random.default_rng(52)
    values = rng.normal(size=16) + 1j * rng.normal(size=16)
    return CoefficientVector(
        role=CoefficientRole.OUTGOING, values=values,
        origin=(0.5, -0.25, 1.0), frequency=MED.frequency,
        accepted_power=accepted_power,
    )


def _channel(tag="small/c/FL"):
    rng = np.random.default_rng(53)
    return ChannelMatrix(
        kind=ChannelKind.TRANSMISSION_EQUIVALENT,
        values=rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)),
        tx_origin=(0, 0, 0), rx_origin=(0.11, -0.07, 0.2),
        frequency=MED.frequency, scenario_tag=tag,
    )


def _ensemble():
    rng = np.random.default_rng(54)
    entries = []
    for i, rx in enumerate(("FL", "FR")):
        m21 = ChannelMatrix(
            kind=ChannelKind.TRANSMISSION_EQUIVALENT,
            values=rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)),
            tx_origin=(0, 0, 0), rx_origin=(0.1 * (i + 1), 0, 0),
            frequency=MED.frequency, scenario_tag=f"small/c/{rx}",
        )
        m11 = ChannelMatrix(
            kind=ChannelKind.REFLECTION,
            values=np.zeros((6, 6), dtype=complex),
            tx_origin=(0, 0, 0), rx_origin=(0, 0, 0),
            frequency=MED.frequency,
        )
        receive = CoefficientVector(
            role=CoefficientRole.RECEIVE, values=np.eye(6)[3] + 0j,
            origin=(0.1 * (i + 1), 0, 0), frequency=MED.frequency,
            accepted_power=0.5,
        )
        entries.append(ScenarioEntry(tag=("small", "c", rx), weight=0.5,
                                     m21=m21, receive=receive,
                                     m11=m11 if i == 0 else None))
    return ScenarioEnsemble(entries=tuple(entries), frequency=MED.frequency)


def test_field_surface_round_trip_sphere(tmp_path):
    surf = _surface()
    path = str(tmp_path / "probe.nf")
    fileio.write_field_surface(surf, path)
    back = fileio.read_field_surface(path)
    assert isinstance(back.geometry, SphereGeometry)
    assert back.geometry == surf.geometry
    assert back.frequency == surf.frequency
    assert np.array_equal(back.points, surf.points)
    assert np.array_equal(back.e, surf.e)
    assert np.array_equal(back.h, surf.h)
    assert np.array_equal(back.weights, surf.weights)


def test_field_surface_round_trip_box(tmp_path):
    geom = BoxGeometry(center=(0.0, 0.1, 0.0),
                       half_extents=(0.6 * LAM, 0.7 * LAM, 0.8 * LAM),
                       n_axis=(6, 7, 8))
    surf = _surface(geom)
    path = str(tmp_path / "box.nf")
    fileio.write_field_surface(surf, path)
    back = fileio.read_field_surface(path)
    assert isinstance(back.geometry, BoxGeometry)
    assert back.geometry == surf.geometry
    assert np.array_equal(back.e, surf.e)


def test_field_surface_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.nf"
    path.write_text("NOT A FORMAT\n")
    with pytest.raises(ParseError, match=":1:"):
        fileio.read_field_surface(str(path))


def test_field_surface_names_offending_record(tmp_path):
    surf = _surface()
    path = tmp_path / "probe.nf"
    fileio.write_field_surface(surf, str(path))
    lines = path.read_text().splitlines()
    lines[6] = "0.1 0.2 corrupted"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError, match=":7:"):
        fileio.read_field_surface(str(path))


def test_field_surface_record_count_checked(tmp_path):
    surf = _surface()
    path = tmp_path / "probe.nf"
    fileio.write_field_surface(surf, str(path))
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ParseError):
        fileio.read_field_surface(str(path))


def test_coefficients_round_trip(tmp_path):
    cv = _coefficients(accepted_power=0.37)
    path = str(tmp_path / "antenna.swfcv")
    fileio.write_coefficients(cv, path, surface="sphere 0.5 0.0 0.0 0.0")
    back = fileio.read_coefficients(path)
    assert back.role is cv.role
    assert back.origin == cv.origin
    assert back.frequency == cv.frequency
    assert back.accepted_power == cv.accepted_power
    assert np.array_equal(back.values, cv.values)


def test_coefficients_round_trip_without_optionals(tmp_path):
    cv = _coefficients()
    path = str(tmp_path / "antenna.swfcv")
    fileio.write_coefficients(cv, path)
    back = fileio.read_coefficients(path)
    assert back.accepted_power is None
    assert np.array_equal(back.values, cv.values)


def test_coefficients_reject_shuffled_modes(tmp_path):
    cv = _coefficients()
    path = tmp_path / "antenna.swfcv"
    fileio.write_coefficients(cv, str(path))
    lines = path.read_text().splitlines()
    lines[5], lines[6] = lines[6], lines[5]  # swap two mode rows
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError):
        fileio.read_coefficients(str(path))


def test_coefficients_reject_unknown_role(tmp_path):
    cv = _coefficients()
    path = tmp_path / "antenna.swfcv"
    fileio.write_coefficients(cv, str(path))
    text = path.read_text().replace("role b_prime", "role mystery")
    path.write_text(text)
    with pytest.raises(ParseError, match=":4:"):
        fileio.read_coefficients(str(path))


def test_channel_archive_round_trip(tmp_path):
    channels = [_channel("small/c/FL"), _channel("small/c/FR").scaled(0.25)]
    path = str(tmp_path / "channels.swfca")
    fileio.write_channel_archive(channels, path)
    back = fileio.read_archive(path)
    assert isinstance(back, list)
    assert len(back) == 2
    for orig, readback in zip(channels, back):
        assert readback.kind is orig.kind
        assert readback.scenario_tag == orig.scenario_tag
        assert readback.tx_origin == orig.tx_origin
        assert readback.rx_origin == orig.rx_origin
        assert readback.frequency == orig.frequency
        assert np.array_equal(readback.values, orig.values)


def test_ensemble_archive_round_trip(tmp_path):
    ens = _ensemble()
    path = str(tmp_path / "catalog.swfca")
    fileio.write_ensemble_archive(ens, path)
    back = fileio.read_archive(path)
    assert isinstance(back, ScenarioEnsemble)
    assert back.frequency == ens.frequency
    assert len(back) == len(ens)
    for orig, readback in zip(ens.entries, back.entries):
        assert readback.tag == orig.tag
        assert readback.weight == orig.weight
        assert np.array_equal(readback.m21.values, orig.m21.values)
        assert readback.receive.role is CoefficientRole.RECEIVE
        assert readback.receive.accepted_power == orig.receive.accepted_power
        assert np.array_equal(readback.receive.values, orig.receive.values)
        if orig.m11 is None:
            assert readback.m11 is None
        else:
            assert np.array_equal(readback.m11.values, orig.m11.values)


def test_archive_bytes_deterministic(tmp_path):
    ens = _ensemble()
    p1, p2 = str(tmp_path / "a.swfca"), str(tmp_path / "b.swfca")
    fileio.write_ensemble_archive(ens, p1)
    fileio.write_ensemble_archive(ens, p2)
    with open(p1, "rb") as f1, open(p2, "rb") as f2:
        assert f1.read() == f2.read()


def test_archive_rejects_non_zip(tmp_path):
    path = tmp_path / "notzip.swfca"
    path.write_bytes(b"hello world")
    with pytest.raises(ParseError, match="not a zip"):
        fileio.read_archive(str(path))


def test_archive_rejects_missing_manifest(tmp_path):
    path = tmp_path / "empty.swfca"
    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr("README", "no manifest here")
    with pytest.raises(ParseError, match="manifest"):
        fileio.read_archive(str(path))


def test_link_and_cell_tables(tmp_path):
    ens = _ensemble()
    transmit = CoefficientVector(
        role=CoefficientRole.TRANSMIT, values=np.eye(6)[3] + 0j,
        origin=(0, 0, 0), frequency=MED.frequency, accepted_power=0.5,
    )
    report = evaluate_ensemble(ens, transmit)
    links = str(tmp_path / "links.tsv")
    cells = str(tmp_path / "cells.tsv")
    fileio.write_link_table(report, links)
    fileio.write_cell_table(report, cells)

    with open(links) as fh:
        lines = fh.read().splitlines()
    assert lines[0] == "anatomy\tpose\trx\tre_s21\tim_s21\tmag_db"
    assert len(lines) == 1 + len(report.samples)

    back = fileio.read_cell_table(cells)
    assert [(c.pose, c.rx) for c in back] == [(c.pose, c.rx) for c in report.cells]
    assert_allclose([c.magnitude_db for c in back],
                    [c.magnitude_db for c in report.cells], rtol=1e-15)


def test_cell_table_rejects_wrong_header(tmp_path):
    path = tmp_path / "cells.tsv"
    path.write_text("foo\tbar\n")
    with pytest.raises(ParseError):
        fileio.read_cell_table(str(path))


def test_format_kpi():
    assert fileio.format_kpi(0.05, 1, -70.0, 20) == \
        "KPI: 5% (1) of 20 cells below -70 dB"
    assert fileio.format_kpi(0.20, 4, -70.0, 20) == \
        "KPI: 20% (4) of 20 cells below -70 dB"
    assert fileio.format_kpi(0.15, 3, -70.0, 20) == \
        "KPI: 15% (3) of 20 cells below -70 dB"


def test_measurements_round_trip(tmp_path):
    records = [
        fileio.MeasurementRecord(subject="s1", pose="c", rx="FL", rssi_db=-72.5),
        fileio.MeasurementRecord(subject="s2", pose="ll", rx="BR", rssi_db=-81.25),
    ]
    path = str(tmp_path / "meas.csv")
    fileio.write_measurements(records, path)
    back = fileio.read_measurements(path)
    assert back == records


def test_measurements_require_header(tmp_path):
    path = tmp_path / "meas.csv"
    path.write_text("subject,pose,rssi_db\ns1,c,-70\n")
    with pytest.raises(MissingColumnError):
        fileio.read_measurements(str(path))


def test_measurements_name_bad_line(tmp_path):
    path = tmp_path / "meas.csv"
    path.write_text("subject,pose,rx,rssi_db\ns1,c,FL,-70\ns2,c,FL,strong\n")
    with pytest.raises(ParseError, match=":3:"):
        fileio.read_measurements(str(path))


def test_surface_descriptor():
    sphere = SphereGeometry(center=(0, 0, 0), radius=0.5, n_theta=4, n_phi=8)
    assert fileio.surface_descriptor(sphere).startswith("sphere 0.5")
    box = BoxGeometry(center=(0, 0, 0), half_extents=(1, 2, 3), n_axis=(4, 4, 4))
    assert fileio.surface_descriptor(box).startswith("box 1.0 2.0 3.0")


def test_atomic_write_replaces_existing(tmp_path):
    path = tmp_path / "out.txt"
    path.write_text("old")
    fileio.atomic_write_text(str(path), "new contents\n")
    assert path.read_text() == "new contents\n"
    assert list(tmp_path.iterdir()) == [path]  # no temp files left behind
