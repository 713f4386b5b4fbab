"""Versioned on-disk formats: near-field surfaces, coefficients, archives.

Three formats are normative for interchange with field solvers and between
pipeline stages, plus delimited report tables and a measurement CSV:

* ``SWFNF v1`` - near-field surface recording, flat text, one 19-field
  record per sample (position, normal, weight, Re/Im of E and H).
* ``SWFCV v1`` - coefficient vector, flat text, one record per mode.
* ``SWFCA v1`` - channel archive, a zip container holding a JSON manifest
  plus one binary blob per matrix/vector (interleaved real/imag float64,
  little endian, row-major).

All writes are atomic (temp file + rename) and byte-deterministic for
identical inputs: floats are serialized with shortest round-trip repr and
archive members carry a fixed timestamp.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import zipfile
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .decompose import (
    BoxGeometry,
    CoefficientRole,
    CoefficientVector,
    FieldSurface,
    SphereGeometry,
)
from .ensemble import LinkCell, LinkReport, ScenarioEnsemble, ScenarioEntry
from .errors import MissingColumnError, ParseError, ValidationError
from .modes import ModeIndex
from .network import ChannelKind, ChannelMatrix

__all__ = [
    "atomic_write_text",
    "MeasurementRecord",
    "surface_descriptor",
    "write_field_surface",
    "read_field_surface",
    "write_coefficients",
    "read_coefficients",
    "write_channel_archive",
    "write_ensemble_archive",
    "read_archive",
    "write_link_table",
    "write_cell_table",
    "read_cell_table",
    "format_kpi",
    "write_measurements",
    "read_measurements",
]

_NF_MAGIC = "SWFNF v1"
_CV_MAGIC = "SWFCV v1"
_CA_FORMAT = "SWFCA"
_CA_VERSION = 1

# fixed member timestamp keeps archives byte-identical across runs
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def _f(x: float) -> str:
    return repr(float(x))


def _atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".swlink-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    _atomic_write(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# SWFNF v1: near-field surfaces


def write_field_surface(surface: FieldSurface, path: str) -> None:
    geometry = surface.geometry
    lines = [_NF_MAGIC, f"frequency_hz {_f(surface.frequency)}"]
    if isinstance(geometry, SphereGeometry):
        c = geometry.center
        lines.append(
            f"surface sphere {_f(geometry.radius)} {_f(c[0])} {_f(c[1])} {_f(c[2])}"
        )
        lines.append(f"grid {geometry.n_theta} {geometry.n_phi}")
    else:
        h = geometry.half_extents
        c = geometry.center
        lines.append(
            "surface box "
            f"{_f(h[0])} {_f(h[1])} {_f(h[2])} {_f(c[0])} {_f(c[1])} {_f(c[2])}"
        )
        n = geometry.n_axis
        lines.append(f"grid {n[0]} {n[1]} {n[2]}")
    for i in range(surface.points.shape[0]):
        fields = [
            *surface.points[i],
            *surface.normals[i],
            surface.weights[i],
            surface.e[i, 0].real, surface.e[i, 0].imag,
            surface.e[i, 1].real, surface.e[i, 1].imag,
            surface.e[i, 2].real, surface.e[i, 2].imag,
            surface.h[i, 0].real, surface.h[i, 0].imag,
            surface.h[i, 1].real, surface.h[i, 1].imag,
            surface.h[i, 2].real, surface.h[i, 2].imag,
        ]
        lines.append(" ".join(_f(v) for v in fields))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _parse_floats(path: str, lineno: int, tokens: list[str], count: int) -> list[float]:
    if len(tokens) != count:
        raise ParseError(
            f"{path}:{lineno}: expected {count} fields, found {len(tokens)}"
        )
    out = []
    for pos, tok in enumerate(tokens, start=1):
        try:
            out.append(float(tok))
        except ValueError:
            raise ParseError(
                f"{path}:{lineno}: field {pos} is not a number: {tok!r}"
            ) from None
    return out


def _header_line(path: str, lines: list[str], lineno: int, key: str) -> list[str]:
    if lineno > len(lines):
        raise ParseError(f"{path}:{lineno}: missing {key!r} header line")
    tokens = lines[lineno - 1].split()
    if not tokens or tokens[0] != key:
        raise ParseError(f"{path}:{lineno}: expected {key!r} header, got {lines[lineno - 1]!r}")
    return tokens[1:]


def read_field_surface(path: str) -> FieldSurface:
    with open(path, "r", encoding="utf-8") as handle:
        lines = [ln.rstrip("\n") for ln in handle]
    if not lines or lines[0].strip() != _NF_MAGIC:
        raise ParseError(f"{path}:1: not a {_NF_MAGIC} file")
    freq_tok = _header_line(path, lines, 2, "frequency_hz")
    frequency = _parse_floats(path, 2, freq_tok, 1)[0]
    surf_tok = _header_line(path, lines, 3, "surface")
    grid_tok = _header_line(path, lines, 4, "grid")
    if not surf_tok:
        raise ParseError(f"{path}:3: surface line names no shape")
    shape = surf_tok[0]
    if shape == "sphere":
        vals = _parse_floats(path, 3, surf_tok[1:], 4)
        dims = _parse_floats(path, 4, grid_tok, 2)
        geometry: SphereGeometry | BoxGeometry = SphereGeometry(
            center=(vals[1], vals[2], vals[3]),
            radius=vals[0],
            n_theta=int(dims[0]),
            n_phi=int(dims[1]),
        )
        expected = int(dims[0]) * int(dims[1])
    elif shape == "box":
        vals = _parse_floats(path, 3, surf_tok[1:], 6)
        dims = _parse_floats(path, 4, grid_tok, 3)
        nx, ny, nz = (int(v) for v in dims)
        geometry = BoxGeometry(
            center=(vals[3], vals[4], vals[5]),
            half_extents=(vals[0], vals[1], vals[2]),
            n_axis=(nx, ny, nz),
        )
        expected = 2 * (ny * nz + nz * nx + nx * ny)
    else:
        raise ParseError(f"{path}:3: unknown surface shape {shape!r}")

    records = [ln for ln in lines[4:] if ln.strip()]
    if len(records) != expected:
        raise ParseError(
            f"{path}: grid declares {expected} samples, file has {len(records)}"
        )
    data = np.empty((expected, 19), dtype=float)
    for i, ln in enumerate(records):
        data[i] = _parse_floats(path, 5 + i, ln.split(), 19)
    e = data[:, 7:13:2] + 1j * data[:, 8:13:2]
    h = data[:, 13::2] + 1j * data[:, 14::2]
    return FieldSurface(
        geometry=geometry,
        points=data[:, 0:3],
        normals=data[:, 3:6],
        weights=data[:, 6],
        e=e,
        h=h,
        frequency=frequency,
    )


# ---------------------------------------------------------------------------
# SWFCV v1: coefficient vectors


def surface_descriptor(geometry: SphereGeometry | BoxGeometry) -> str:
    """One-line provenance text for the surface a vector was extracted from."""
    c = geometry.center
    if isinstance(geometry, SphereGeometry):
        return f"sphere {_f(geometry.radius)} {_f(c[0])} {_f(c[1])} {_f(c[2])}"
    h = geometry.half_extents
    return f"box {_f(h[0])} {_f(h[1])} {_f(h[2])} {_f(c[0])} {_f(c[1])} {_f(c[2])}"


def write_coefficients(
    coefficients: CoefficientVector, path: str, surface: str | None = None
) -> None:
    o = coefficients.origin
    lines = [
        _CV_MAGIC,
        f"frequency_hz {_f(coefficients.frequency)}",
        f"origin {_f(o[0])} {_f(o[1])} {_f(o[2])}",
        f"role {coefficients.role.value}",
    ]
    if surface is not None:
        lines.append(f"surface {surface}")
    if coefficients.accepted_power is not None:
        lines.append(f"accepted_power {_f(coefficients.accepted_power)}")
    lines.append(f"modes {coefficients.truncation}")
    for mode, value in zip(
        (ModeIndex.from_flat(j) for j in range(1, coefficients.truncation + 1)),
        coefficients.values,
    ):
        lines.append(
            f"{mode.flat} {mode.s} {mode.m} {mode.n} {_f(value.real)} {_f(value.imag)}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_coefficients(path: str) -> CoefficientVector:
    with open(path, "r", encoding="utf-8") as handle:
        lines = [ln.rstrip("\n") for ln in handle]
    if not lines or lines[0].strip() != _CV_MAGIC:
        raise ParseError(f"{path}:1: not a {_CV_MAGIC} file")
    frequency = _parse_floats(path, 2, _header_line(path, lines, 2, "frequency_hz"), 1)[0]
    origin = _parse_floats(path, 3, _header_line(path, lines, 3, "origin"), 3)
    role_tok = _header_line(path, lines, 4, "role")
    if len(role_tok) != 1:
        raise ParseError(f"{path}:4: role line must carry one token")
    try:
        role = CoefficientRole(role_tok[0])
    except ValueError:
        raise ParseError(f"{path}:4: unknown role {role_tok[0]!r}") from None
    lineno = 5
    accepted_power = None
    while lineno <= len(lines):
        tokens = lines[lineno - 1].split()
        if tokens and tokens[0] == "surface":
            lineno += 1  # provenance only; not needed to rebuild the vector
        elif tokens and tokens[0] == "accepted_power":
            accepted_power = _parse_floats(path, lineno, tokens[1:], 1)[0]
            lineno += 1
        else:
            break
    count_tok = _header_line(path, lines, lineno, "modes")
    truncation = int(_parse_floats(path, lineno, count_tok, 1)[0])
    lineno += 1
    records = [ln for ln in lines[lineno - 1 :] if ln.strip()]
    if len(records) != truncation:
        raise ParseError(
            f"{path}: header declares {truncation} modes, file has {len(records)}"
        )
    values = np.zeros(truncation, dtype=complex)
    for i, ln in enumerate(records):
        row = _parse_floats(path, lineno + i, ln.split(), 6)
        j, s, m, n = (int(v) for v in row[:4])
        if j != i + 1:
            raise ParseError(f"{path}:{lineno + i}: mode rows out of order (j={j})")
        mode = ModeIndex.from_flat(j)
        if (mode.s, mode.m, mode.n) != (s, m, n):
            raise ParseError(
                f"{path}:{lineno + i}: (s,m,n)=({s},{m},{n}) inconsistent with j={j}"
            )
        values[i] = complex(row[4], row[5])
    return CoefficientVector(
        role=role,
        values=values,
        origin=np.asarray(origin),
        frequency=frequency,
        accepted_power=accepted_power,
    )


# ---------------------------------------------------------------------------
# SWFCA v1: channel archives (zip container)


def _complex_blob(values: np.ndarray) -> bytes:
    flat = np.asarray(values, dtype=complex).ravel()
    out = np.empty(2 * flat.size, dtype="<f8")
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out.tobytes()


def _blob_complex(data: bytes, shape: tuple[int, ...]) -> np.ndarray:
    raw = np.frombuffer(data, dtype="<f8")
    expected = 2 * int(np.prod(shape))
    if raw.size != expected:
        raise ParseError(f"archive blob holds {raw.size} floats, expected {expected}")
    return (raw[0::2] + 1j * raw[1::2]).reshape(shape)


def _channel_record(channel: ChannelMatrix, name: str) -> tuple[dict, bytes]:
    record = {
        "name": name,
        "kind": channel.kind.value,
        "rows": channel.rx_truncation,
        "cols": channel.tx_truncation,
        "tx_origin": list(channel.tx_origin),
        "rx_origin": list(channel.rx_origin),
        "scenario_tag": channel.scenario_tag,
        "data": f"{name}.bin",
    }
    return record, _complex_blob(channel.values)


def _record_channel(record: dict, blobs: dict[str, bytes], frequency: float) -> ChannelMatrix:
    values = _blob_complex(
        blobs[record["data"]], (int(record["rows"]), int(record["cols"]))
    )
    return ChannelMatrix(
        kind=ChannelKind(record["kind"]),
        values=values,
        tx_origin=tuple(record["tx_origin"]),
        rx_origin=tuple(record["rx_origin"]),
        frequency=frequency,
        scenario_tag=record.get("scenario_tag", ""),
    )


def _vector_record(vector: CoefficientVector, name: str) -> tuple[dict, bytes]:
    record = {
        "name": name,
        "role": vector.role.value,
        "modes": vector.truncation,
        "origin": [float(v) for v in vector.origin],
        "accepted_power": vector.accepted_power,
        "data": f"{name}.bin",
    }
    return record, _complex_blob(vector.values)


def _record_vector(record: dict, blobs: dict[str, bytes], frequency: float) -> CoefficientVector:
    values = _blob_complex(blobs[record["data"]], (int(record["modes"]),))
    return CoefficientVector(
        role=CoefficientRole(record["role"]),
        values=values,
        origin=np.asarray(record["origin"], dtype=float),
        frequency=frequency,
        accepted_power=record.get("accepted_power"),
    )


def _write_archive(path: str, manifest: dict, blobs: dict[str, bytes]) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".swlink-")
    os.close(fd)
    try:
        with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_STORED) as archive:
            payload = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
            info = zipfile.ZipInfo("manifest.json", date_time=_ZIP_EPOCH)
            archive.writestr(info, payload)
            for name in sorted(blobs):
                info = zipfile.ZipInfo(name, date_time=_ZIP_EPOCH)
                archive.writestr(info, blobs[name])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_channel_archive(channels: Sequence[ChannelMatrix], path: str) -> None:
    """Store a list of channel matrices sharing one frequency."""
    if not channels:
        raise ValidationError("no channels to store")
    frequency = channels[0].frequency
    for ch in channels:
        if not math.isclose(ch.frequency, frequency, rel_tol=1e-9):
            raise ValidationError("archived channels must share a frequency")
    records = []
    blobs: dict[str, bytes] = {}
    for i, ch in enumerate(channels):
        record, blob = _channel_record(ch, f"ch{i:04d}")
        records.append(record)
        blobs[record["data"]] = blob
    manifest = {
        "format": _CA_FORMAT,
        "version": _CA_VERSION,
        "frequency_hz": frequency,
        "payload": "channels",
        "channels": records,
    }
    _write_archive(path, manifest, blobs)


def write_ensemble_archive(ensemble: ScenarioEnsemble, path: str) -> None:
    """Store a scenario ensemble: tagged weighted channels plus receivers."""
    records = []
    blobs: dict[str, bytes] = {}
    for i, entry in enumerate(ensemble.entries):
        m21, m21_blob = _channel_record(entry.m21, f"e{i:04d}_m21")
        blobs[m21["data"]] = m21_blob
        receive, rx_blob = _vector_record(entry.receive, f"e{i:04d}_rx")
        blobs[receive["data"]] = rx_blob
        m11 = None
        if entry.m11 is not None:
            m11, m11_blob = _channel_record(entry.m11, f"e{i:04d}_m11")
            blobs[m11["data"]] = m11_blob
        records.append(
            {
                "tag": list(entry.tag),
                "weight": entry.weight,
                "m21": m21,
                "m11": m11,
                "receive": receive,
            }
        )
    manifest = {
        "format": _CA_FORMAT,
        "version": _CA_VERSION,
        "frequency_hz": ensemble.frequency,
        "payload": "ensemble",
        "entries": records,
    }
    _write_archive(path, manifest, blobs)


def read_archive(path: str) -> list[ChannelMatrix] | ScenarioEnsemble:
    """Load a channel archive; returns the payload the manifest declares."""
    try:
        with zipfile.ZipFile(path, "r") as archive:
            names = archive.namelist()
            if "manifest.json" not in names:
                raise ParseError(f"{path}: archive has no manifest.json")
            manifest = json.loads(archive.read("manifest.json"))
            blobs = {n: archive.read(n) for n in names if n != "manifest.json"}
    except zipfile.BadZipFile:
        raise ParseError(f"{path}: not a zip archive") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: manifest.json is invalid: {exc}") from None
    if manifest.get("format") != _CA_FORMAT or manifest.get("version") != _CA_VERSION:
        raise ParseError(f"{path}: not a {_CA_FORMAT} v{_CA_VERSION} archive")
    frequency = float(manifest["frequency_hz"])
    payload = manifest.get("payload")
    try:
        if payload == "channels":
            return [_record_channel(r, blobs, frequency) for r in manifest["channels"]]
        if payload == "ensemble":
            entries = []
            for r in manifest["entries"]:
                entries.append(
                    ScenarioEntry(
                        tag=tuple(r["tag"]),
                        weight=float(r["weight"]),
                        m21=_record_channel(r["m21"], blobs, frequency),
                        receive=_record_vector(r["receive"], blobs, frequency),
                        m11=(
                            _record_channel(r["m11"], blobs, frequency)
                            if r.get("m11")
                            else None
                        ),
                    )
                )
            return ScenarioEnsemble(entries=tuple(entries), frequency=frequency)
    except KeyError as exc:
        raise ParseError(f"{path}: manifest is missing key {exc}") from None
    raise ParseError(f"{path}: unknown archive payload {payload!r}")


# ---------------------------------------------------------------------------
# Report tables (tab-separated) and the KPI line


def write_link_table(report: LinkReport, path: str) -> None:
    lines = ["anatomy\tpose\trx\tre_s21\tim_s21\tmag_db"]
    for s in report.samples:
        lines.append(
            "\t".join(
                (
                    s.tag[0],
                    s.tag[1],
                    s.tag[2],
                    _f(s.s21.real),
                    _f(s.s21.imag),
                    _f(s.magnitude_db),
                )
            )
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_cell_table(report: LinkReport, path: str) -> None:
    lines = ["pose\trx\tmean_db\tn_anatomy"]
    for c in report.cells:
        lines.append("\t".join((c.pose, c.rx, _f(c.magnitude_db), str(c.n_anatomy))))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_cell_table(path: str) -> list[LinkCell]:
    with open(path, "r", encoding="utf-8") as handle:
        lines = [ln.rstrip("\n") for ln in handle if ln.strip()]
    if not lines or lines[0].split("\t") != ["pose", "rx", "mean_db", "n_anatomy"]:
        raise ParseError(f"{path}:1: not a cell table")
    cells = []
    for lineno, ln in enumerate(lines[1:], start=2):
        tok = ln.split("\t")
        if len(tok) != 4:
            raise ParseError(f"{path}:{lineno}: expected 4 columns, found {len(tok)}")
        try:
            cells.append(
                LinkCell(
                    pose=tok[0],
                    rx=tok[1],
                    magnitude_db=float(tok[2]),
                    n_anatomy=int(tok[3]),
                )
            )
        except ValueError:
            raise ParseError(f"{path}:{lineno}: malformed numeric column") from None
    if not cells:
        raise ParseError(f"{path}: cell table has no rows")
    return cells


def format_kpi(fraction: float, count: int, threshold_db: float, total: int) -> str:
    pct = fraction * 100.0
    pct_text = f"{pct:g}"
    return f"KPI: {pct_text}% ({count}) of {total} cells below {threshold_db:g} dB"


# ---------------------------------------------------------------------------
# Measurement series CSV


@dataclass(frozen=True)
class MeasurementRecord:
    subject: str
    pose: str
    rx: str
    rssi_db: float


_MEASUREMENT_COLUMNS = ("subject", "pose", "rx", "rssi_db")


def write_measurements(records: Sequence[MeasurementRecord], path: str) -> None:
    lines = [",".join(_MEASUREMENT_COLUMNS)]
    for r in records:
        lines.append(f"{r.subject},{r.pose},{r.rx},{_f(r.rssi_db)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_measurements(path: str) -> list[MeasurementRecord]:
    with open(path, "r", encoding="utf-8") as handle:
        lines = [ln.rstrip("\n") for ln in handle if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: empty measurement file")
    header = [c.strip() for c in lines[0].split(",")]
    missing = [c for c in _MEASUREMENT_COLUMNS if c not in header]
    if missing:
        raise MissingColumnError(f"{path}: missing columns {missing}")
    index = {c: header.index(c) for c in _MEASUREMENT_COLUMNS}
    records = []
    for lineno, ln in enumerate(lines[1:], start=2):
        tok = [c.strip() for c in ln.split(",")]
        if len(tok) != len(header):
            raise ParseError(
                f"{path}:{lineno}: expected {len(header)} columns, found {len(tok)}"
            )
        try:
            rssi = float(tok[index["rssi_db"]])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: rssi_db is not a number") from None
        records.append(
            MeasurementRecord(
                subject=tok[index["subject"]],
                pose=tok[index["pose"]],
                rx=tok[index["rx"]],
                rssi_db=rssi,
            )
        )
    return records
