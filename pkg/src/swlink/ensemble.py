"""Ensemble evaluation: scenario catalogs, link reports, KPIs, calibration.

A scenario ensemble is a weighted list of channels, each tagged with an
(anatomy, pose, receiver) triple and paired with the receive vector of the
receiver at that location.  Evaluating an antenna against the ensemble
yields one complex S21 per scenario; anatomy-averaged per-(pose, receiver)
cells feed the connection-loss KPI and calibration against measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .decompose import CoefficientRole, CoefficientVector
from .errors import (
    DimensionMismatchError,
    EmptyEnsembleError,
    InconsistentFrequencyError,
    ValidationError,
    ZeroMeasurementError,
)
from .network import ChannelMatrix, link

__all__ = [
    "DEFAULT_THRESHOLD_DB",
    "ScenarioEntry",
    "ScenarioEnsemble",
    "LinkSample",
    "LinkCell",
    "LinkReport",
    "evaluate_ensemble",
    "kpi",
    "kpi_from_cells",
    "calibration_factor",
    "apply_calibration",
    "MeasurementStats",
    "measurement_stats",
]

DEFAULT_THRESHOLD_DB = -70.0

_FLOOR_DB = -300.0  # stands in for -inf when a magnitude underflows to zero


@dataclass(frozen=True)
class ScenarioEntry:
    """One catalog scenario: tagged channel plus its receiver."""

    tag: tuple[str, str, str]  # (anatomy, pose, rx location)
    weight: float
    m21: ChannelMatrix
    receive: CoefficientVector
    m11: ChannelMatrix | None = None

    def __post_init__(self) -> None:
        if len(self.tag) != 3:
            raise ValidationError(f"scenario tag must be (anatomy, pose, rx), got {self.tag!r}")
        if not (self.weight > 0.0 and math.isfinite(self.weight)):
            raise ValidationError(f"scenario weight must be positive, got {self.weight!r}")
        if self.receive.truncation != self.m21.rx_truncation:
            raise DimensionMismatchError(
                f"receive vector has {self.receive.truncation} modes, "
                f"channel expects {self.m21.rx_truncation}"
            )
        if self.m11 is not None and self.m11.tx_truncation != self.m21.tx_truncation:
            raise DimensionMismatchError("reflection matrix truncation differs from channel")


@dataclass(frozen=True)
class ScenarioEnsemble:
    """Weighted scenario catalog sharing one frequency and tx truncation."""

    entries: tuple[ScenarioEntry, ...]
    frequency: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise EmptyEnsembleError("ensemble has no scenarios")
        total = math.fsum(e.weight for e in self.entries)
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"scenario weights must sum to 1, got {total!r}")
        first = self.entries[0]
        for e in self.entries:
            if not math.isclose(e.m21.frequency, self.frequency, rel_tol=1e-9):
                raise InconsistentFrequencyError(
                    f"scenario {e.tag} frequency {e.m21.frequency} != ensemble {self.frequency}"
                )
            if e.m21.tx_truncation != first.m21.tx_truncation:
                raise DimensionMismatchError("scenarios disagree on tx truncation")

    @property
    def tx_truncation(self) -> int:
        return self.entries[0].m21.tx_truncation

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class LinkSample:
    tag: tuple[str, str, str]
    weight: float
    s21: complex

    @property
    def magnitude_db(self) -> float:
        mag = abs(self.s21)
        return 20.0 * math.log10(mag) if mag > 0.0 else _FLOOR_DB


@dataclass(frozen=True)
class LinkCell:
    """Anatomy-averaged transmission for one (pose, rx) cell."""

    pose: str
    rx: str
    magnitude_db: float
    n_anatomy: int


@dataclass(frozen=True)
class LinkReport:
    """Per-scenario S21 samples, averaged cells, and the connection-loss KPI."""

    samples: tuple[LinkSample, ...]
    cells: tuple[LinkCell, ...]
    threshold_db: float
    kpi_fraction: float
    kpi_count: int
    db_average: bool = False

    def cell(self, pose: str, rx: str) -> LinkCell:
        for c in self.cells:
            if c.pose == pose and c.rx == rx:
                return c
        raise KeyError((pose, rx))


def _average_cells(
    samples: Sequence[LinkSample], db_average: bool
) -> tuple[LinkCell, ...]:
    order: list[tuple[str, str]] = []
    groups: dict[tuple[str, str], list[LinkSample]] = {}
    for s in samples:
        key = (s.tag[1], s.tag[2])
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(s)
    cells = []
    for pose, rx in order:
        members = groups[(pose, rx)]
        wsum = math.fsum(m.weight for m in members)
        if db_average:
            value = math.fsum(m.weight * m.magnitude_db for m in members) / wsum
        else:
            mean_mag = math.fsum(m.weight * abs(m.s21) for m in members) / wsum
            value = 20.0 * math.log10(mean_mag) if mean_mag > 0.0 else _FLOOR_DB
        cells.append(
            LinkCell(pose=pose, rx=rx, magnitude_db=value, n_anatomy=len(members))
        )
    return tuple(cells)


def _kpi_from_cells(
    cells: Sequence[LinkCell], threshold_db: float
) -> tuple[float, int]:
    count = sum(1 for c in cells if c.magnitude_db < threshold_db)
    return count / len(cells), count


def evaluate_ensemble(
    ensemble: ScenarioEnsemble,
    transmit: CoefficientVector,
    threshold_db: float = DEFAULT_THRESHOLD_DB,
    db_average: bool = False,
) -> LinkReport:
    """Embed an antenna (its T' vector) into every scenario of the ensemble.

    S21 per scenario is the bilinear link product of the scenario's receive
    vector, channel matrix, and the given transmit vector.  Cells average
    the anatomy axis per (pose, rx) pair on linear magnitude by default;
    ``db_average=True`` switches to averaging the dB values instead, for
    comparison of the two conventions.
    """
    if transmit.role not in (CoefficientRole.TRANSMIT, CoefficientRole.OUTGOING):
        raise ValidationError(
            f"transmit vector must have a transmit-side role, got {transmit.role.value}"
        )
    if transmit.truncation != ensemble.tx_truncation:
        raise DimensionMismatchError(
            f"antenna has {transmit.truncation} modes, "
            f"ensemble expects {ensemble.tx_truncation}"
        )
    samples = tuple(
        LinkSample(tag=e.tag, weight=e.weight, s21=link(e.receive, e.m21, transmit))
        for e in ensemble.entries
    )
    cells = _average_cells(samples, db_average)
    fraction, count = _kpi_from_cells(cells, threshold_db)
    return LinkReport(
        samples=samples,
        cells=cells,
        threshold_db=threshold_db,
        kpi_fraction=fraction,
        kpi_count=count,
        db_average=db_average,
    )


def kpi(report: LinkReport, threshold_db: float = DEFAULT_THRESHOLD_DB) -> tuple[float, int]:
    """Fraction and count of averaged cells strictly below the threshold."""
    return kpi_from_cells(report.cells, threshold_db)


def kpi_from_cells(
    cells: Sequence[LinkCell], threshold_db: float = DEFAULT_THRESHOLD_DB
) -> tuple[float, int]:
    """KPI over bare cells, e.g. re-read from a stored table."""
    if not cells:
        raise EmptyEnsembleError("no cells to evaluate")
    return _kpi_from_cells(cells, threshold_db)


def calibration_factor(simulated_avg: float, measured_avg: float) -> float:
    """Ratio of simulated to measured average linear magnitude.

    Multiplying every measured sample of an antenna by this factor makes the
    measured ensemble mean coincide with the simulated one.
    """
    if not (measured_avg > 0.0 and math.isfinite(measured_avg)):
        raise ZeroMeasurementError(f"measured average must be positive, got {measured_avg!r}")
    if not (simulated_avg > 0.0 and math.isfinite(simulated_avg)):
        raise ValidationError(f"simulated average must be positive, got {simulated_avg!r}")
    return simulated_avg / measured_avg


def apply_calibration(samples_db: Iterable[float], factor: float) -> np.ndarray:
    """Shift dB samples by the calibration factor (multiplicative in linear units)."""
    if not (factor > 0.0 and math.isfinite(factor)):
        raise ValidationError(f"calibration factor must be positive, got {factor!r}")
    return np.asarray(list(samples_db), dtype=float) + 20.0 * math.log10(factor)


@dataclass(frozen=True)
class MeasurementStats:
    """Boxplot statistics of one measurement group."""

    n: int
    mean: float
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...] = field(default_factory=tuple)


def measurement_stats(samples: Iterable[float]) -> MeasurementStats:
    """Quartiles and 1.5*IQR whiskers of repeated measurements.

    Whiskers sit on the most extreme samples still inside 1.5*IQR beyond the
    quartiles; everything outside is reported as outliers.
    """
    x = np.sort(np.asarray(list(samples), dtype=float))
    if x.size == 0:
        raise ZeroMeasurementError("no measurement samples")
    if not np.all(np.isfinite(x)):
        raise ValidationError("measurement samples must be finite")
    q1, med, q3 = np.percentile(x, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    return MeasurementStats(
        n=int(x.size),
        mean=float(x.mean()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=tuple(float(v) for v in x[(x < lo_fence) | (x > hi_fence)]),
    )
