"""Near-field surfaces and wave-coefficient extraction.

A closed surface carrying sampled E and H fields is decomposed into spherical
wave coefficients through the bilinear surface bracket

    <u, v> = oint { u x (curl v) - v x (curl u) } . n dXi .

Pairing the sampled field against conjugated regular waves isolates the
difference b' = b - a of outgoing and incoming coefficients, which is exactly
the equivalent-source excitation of the antenna-removed problem; pairing
against conjugated outgoing or incoming waves isolates b or a alone.  The
curl of the sampled field is never approximated numerically: it is supplied
by Maxwell's equations from the H samples, while the curl of the analytic
wave function uses the TE/TM pairing curl F = k Fdual.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import (
    DimensionMismatchError,
    IncompleteShellError,
    InconsistentFrequencyError,
    OpenSurfaceError,
    UndersampledSurfaceError,
    ValidationError,
    ZeroNormError,
)
from .modes import Medium, WaveKind, dual_order, max_degree, mode_basis, mode_count

__all__ = [
    "SphereGeometry",
    "BoxGeometry",
    "FieldSurface",
    "CoefficientRole",
    "CoefficientVector",
    "surface_inner_product",
    "extract_coefficients",
    "convergence_metric",
    "shell_norms",
    "convergence_table",
]

log = logging.getLogger(__name__)

_WEIGHT_AREA_RTOL = 1e-10


@dataclass(frozen=True)
class SphereGeometry:
    """Spherical sampling surface with a Gauss-Legendre x uniform grid."""

    center: tuple[float, float, float]
    radius: float
    n_theta: int
    n_phi: int

    kind = "sphere"

    def __post_init__(self) -> None:
        if self.radius <= 0.0:
            raise ValidationError(f"sphere radius {self.radius} must be positive")
        if self.n_theta < 2 or self.n_phi < 2:
            raise ValidationError("sphere grid needs at least 2 nodes per direction")

    @property
    def area(self) -> float:
        return 4.0 * math.pi * self.radius**2

    def quadrature(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sample points, outward unit normals, and area weights."""
        x, w = np.polynomial.legendre.leggauss(self.n_theta)
        theta = np.arccos(x)[::-1]
        w = w[::-1]
        phi = 2.0 * math.pi * np.arange(self.n_phi) / self.n_phi
        st, ct = np.sin(theta), np.cos(theta)
        cp, sp = np.cos(phi), np.sin(phi)

        normals = np.empty((self.n_theta, self.n_phi, 3))
        normals[..., 0] = st[:, None] * cp[None, :]
        normals[..., 1] = st[:, None] * sp[None, :]
        normals[..., 2] = ct[:, None]
        normals = normals.reshape(-1, 3)
        points = np.asarray(self.center) + self.radius * normals
        weights = np.broadcast_to(
            (self.radius**2 * 2.0 * math.pi / self.n_phi) * w[:, None],
            (self.n_theta, self.n_phi),
        ).ravel()
        return points, normals, weights.copy()

    def contains(self, point: np.ndarray) -> bool:
        return np.linalg.norm(np.asarray(point) - self.center) < self.radius


@dataclass(frozen=True)
class BoxGeometry:
    """Axis-aligned box surface with per-face tensor Gauss-Legendre grids.

    ``n_axis`` gives the node count along each Cartesian axis; a face normal
    to x is gridded with n_axis[1] x n_axis[2] nodes, and so on.
    """

    center: tuple[float, float, float]
    half_extents: tuple[float, float, float]
    n_axis: tuple[int, int, int]

    kind = "box"

    def __post_init__(self) -> None:
        if min(self.half_extents) <= 0.0:
            raise ValidationError("box half extents must be positive")
        if min(self.n_axis) < 2:
            raise ValidationError("box grid needs at least 2 nodes per axis")

    @property
    def area(self) -> float:
        hx, hy, hz = self.half_extents
        return 8.0 * (hx * hy + hy * hz + hz * hx)

    def quadrature(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        nodes, wts = [], []
        for h, n in zip(self.half_extents, self.n_axis):
            x, w = np.polynomial.legendre.leggauss(n)
            nodes.append(h * x)
            wts.append(h * w)
        pts, nrm, wgt = [], [], []
        for axis in range(3):
            u, v = (axis + 1) % 3, (axis + 2) % 3
            gu, gv = np.meshgrid(nodes[u], nodes[v], indexing="ij")
            wu, wv = np.meshgrid(wts[u], wts[v], indexing="ij")
            for sign in (+1.0, -1.0):
                p = np.zeros((gu.size, 3))
                p[:, axis] = sign * self.half_extents[axis]
                p[:, u] = gu.ravel()
                p[:, v] = gv.ravel()
                n_f = np.zeros((gu.size, 3))
                n_f[:, axis] = sign
                pts.append(p + np.asarray(self.center))
                nrm.append(n_f)
                wgt.append((wu * wv).ravel())
        return np.concatenate(pts), np.concatenate(nrm), np.concatenate(wgt)

    def contains(self, point: np.ndarray) -> bool:
        d = np.abs(np.asarray(point) - self.center)
        return bool(np.all(d < self.half_extents))


@dataclass(frozen=True)
class FieldSurface:
    """Closed quadrature surface carrying complex E and H samples.

    ``e`` is in V/m and ``h`` in A/m, both as (P, 3) Cartesian arrays aligned
    with ``points``; ``weights`` are area weights in m**2 that must sum to
    the geometric surface area.
    """

    geometry: SphereGeometry | BoxGeometry
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    e: np.ndarray
    h: np.ndarray
    frequency: float

    def __post_init__(self) -> None:
        p = self.points.shape[0]
        for name in ("points", "normals", "e", "h"):
            arr = getattr(self, name)
            if arr.shape != (p, 3):
                raise DimensionMismatchError(
                    f"{name} has shape {arr.shape}, expected ({p}, 3)"
                )
        if self.weights.shape != (p,):
            raise DimensionMismatchError("weights must be one scalar per sample")
        if not (
            np.all(np.isfinite(self.e))
            and np.all(np.isfinite(self.h))
            and np.all(np.isfinite(self.points))
        ):
            raise ValidationError("field surface contains non-finite samples")
        norms = np.linalg.norm(self.normals, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise OpenSurfaceError("surface normals are not unit vectors")
        if np.any(self.weights <= 0.0):
            raise OpenSurfaceError("surface weights must be positive")
        area = float(np.sum(self.weights))
        if not math.isclose(area, self.geometry.area, rel_tol=_WEIGHT_AREA_RTOL):
            raise OpenSurfaceError(
                f"weights sum to {area}, geometry area is {self.geometry.area}; "
                "surface does not close"
            )

    @classmethod
    def from_fields(
        cls,
        geometry: SphereGeometry | BoxGeometry,
        frequency: float,
        e: np.ndarray,
        h: np.ndarray,
    ) -> "FieldSurface":
        points, normals, weights = geometry.quadrature()
        return cls(
            geometry=geometry,
            points=points,
            normals=normals,
            weights=weights,
            e=np.asarray(e, dtype=complex),
            h=np.asarray(h, dtype=complex),
            frequency=float(frequency),
        )


class CoefficientRole(Enum):
    """What a coefficient vector represents in the link model."""

    OUTGOING = "b_prime"  # equivalent-source excitation b' = b - a
    INCOMING = "a_prime"  # incoming waves of the antenna-removed problem
    RAW_OUTGOING = "b"
    RAW_INCOMING = "a"
    TRANSMIT = "transmit"
    RECEIVE = "receive"


@dataclass(frozen=True)
class CoefficientVector:
    """Spherical-mode coefficient vector over complete shells.

    ``accepted_power`` (watts) is carried along when known so transmit
    vectors can be normalized without re-supplying it.
    """

    role: CoefficientRole
    values: np.ndarray
    origin: tuple[float, float, float]
    frequency: float
    accepted_power: float | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=complex).ravel()
        object.__setattr__(self, "values", v)
        max_degree(v.size)  # raises IncompleteShellError on partial shells
        if not np.all(np.isfinite(v)):
            raise ValidationError("coefficient vector contains non-finite entries")
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))

    @property
    def truncation(self) -> int:
        return self.values.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def with_role(self, role: CoefficientRole) -> "CoefficientVector":
        return replace(self, role=role)


_EXTRACT_PARTS = {
    # pairing kind and prefactor applied to the bracket, per extracted part
    "difference": (WaveKind.REGULAR, CoefficientRole.OUTGOING, 1.0),
    "outgoing": (WaveKind.OUTGOING, CoefficientRole.RAW_OUTGOING, 0.5),
    "incoming": (WaveKind.INCOMING, CoefficientRole.RAW_INCOMING, -0.5),
}


def _check_frequency(surface: FieldSurface, medium: Medium) -> None:
    if not math.isclose(surface.frequency, medium.frequency, rel_tol=1e-9):
        raise InconsistentFrequencyError(
            f"surface at {surface.frequency} Hz, medium at {medium.frequency} Hz"
        )


def _check_sampling(surface: FieldSurface, truncation: int, medium: Medium) -> None:
    """Reject grids below 2 samples/wavelength or too coarse for the shell."""
    n = max_degree(truncation)
    lam = medium.wavelength
    g = surface.geometry
    if isinstance(g, SphereGeometry):
        need_theta = max(2 * n + 2, math.ceil(math.pi * g.radius / (lam / 2.0)))
        need_phi = max(2 * n + 2, math.ceil(2.0 * math.pi * g.radius / (lam / 2.0)))
        if g.n_theta < need_theta or g.n_phi < need_phi:
            raise UndersampledSurfaceError(
                f"sphere grid {g.n_theta}x{g.n_phi} below required "
                f"{need_theta}x{need_phi} for degree {n} at radius {g.radius}"
            )
    else:
        for h, count in zip(g.half_extents, g.n_axis):
            need = max(2 * n + 2, math.ceil(2.0 * h / (lam / 2.0)))
            if count < need:
                raise UndersampledSurfaceError(
                    f"box grid count {count} below required {need} along an axis"
                )


def _bracket_terms(surface: FieldSurface, medium: Medium) -> tuple[np.ndarray, np.ndarray]:
    # weighted (n x E) and (H x n); the bracket against a conjugated mode F is
    # k * sum w (n x E).conj(Fdual)  +  j*k*eta * sum w (H x n).conj(F)
    w = surface.weights[:, None]
    nxe = w * np.cross(surface.normals, surface.e)
    hxn = w * np.cross(surface.h, surface.normals)
    return nxe, hxn


def surface_inner_product(
    surface: FieldSurface,
    mode_flat: int,
    kind: WaveKind,
    medium: Medium,
    origin: np.ndarray | None = None,
) -> complex:
    """Bracket of the sampled field against the conjugated wave function.

    Evaluates <E, F_j^(kind)*> with curl E taken from the H samples and
    curl F = k Fdual analytically.  ``mode_flat`` is the 1-based flat index.
    """
    _check_frequency(surface, medium)
    truncation = mode_count(max_degree_at_least(mode_flat))
    basis = mode_basis(surface.points, truncation, kind, medium, origin=origin)
    f = np.conj(basis[mode_flat - 1])
    fdual = np.conj(basis[dual_order(truncation)[mode_flat - 1]])
    nxe, hxn = _bracket_terms(surface, medium)
    k, eta = medium.k, medium.eta
    return complex(
        k * np.einsum("pc,pc->", nxe, fdual) + 1j * k * eta * np.einsum("pc,pc->", hxn, f)
    )


def max_degree_at_least(mode_flat: int) -> int:
    """Smallest complete-shell degree containing the flat index."""
    n = 1
    while mode_count(n) < mode_flat:
        n += 1
    return n


def extract_coefficients(
    surface: FieldSurface,
    truncation: int,
    medium: Medium,
    origin: np.ndarray | None = None,
    part: str = "difference",
) -> CoefficientVector:
    """Decompose a sampled closed surface into wave coefficients.

    Parameters
    ----------
    surface : FieldSurface
        Closed surface with E and H samples enclosing the expansion origin.
    truncation : int
        Number of modes to extract; must close a degree shell and be
        resolvable by the surface grid.
    origin : (3,) array, optional
        Expansion origin.  Defaults to the surface center; a different
        origin is allowed (noncentered phase center) and logged.
    part : {"difference", "outgoing", "incoming"}
        Which coefficients to isolate: b' = b - a via regular-wave pairing,
        b via outgoing-wave pairing, or a via incoming-wave pairing.

    Returns
    -------
    CoefficientVector
        With role OUTGOING (b'), RAW_OUTGOING (b) or RAW_INCOMING (a).
    """
    if part not in _EXTRACT_PARTS:
        raise ValidationError(f"unknown extraction part {part!r}")
    _check_frequency(surface, medium)
    _check_sampling(surface, truncation, medium)

    center = np.asarray(surface.geometry.center, dtype=float)
    if origin is None:
        origin_arr = center
    else:
        origin_arr = np.asarray(origin, dtype=float)
        if not np.allclose(origin_arr, center, atol=1e-15):
            if not surface.geometry.contains(origin_arr):
                raise ValidationError(
                    "expansion origin lies outside the sampling surface"
                )
            log.warning(
                "expansion origin %s off the surface center %s; "
                "higher-degree content will grow",
                origin_arr.tolist(),
                center.tolist(),
            )

    kind, role, half = _EXTRACT_PARTS[part]
    basis = mode_basis(surface.points, truncation, kind, medium, origin=origin_arr)
    conj_basis = np.conj(basis)
    conj_dual = conj_basis[dual_order(truncation)]
    nxe, hxn = _bracket_terms(surface, medium)

    k, eta = medium.k, medium.eta
    bracket = k * np.einsum("pc,jpc->j", nxe, conj_dual) + 1j * k * eta * np.einsum(
        "pc,jpc->j", hxn, conj_basis
    )
    # bracket of a unit mode against its own conjugated regular wave is
    # j_imag*sqrt(eta)*(b-a); outgoing/incoming pairings carry an extra +-2
    values = (half / (1j * math.sqrt(eta))) * bracket
    return CoefficientVector(
        role=role,
        values=values,
        origin=tuple(origin_arr.tolist()),
        frequency=surface.frequency,
    )


def shell_norms(coefficients: CoefficientVector | np.ndarray) -> list[tuple[int, float]]:
    """Norm of every complete-shell prefix: [(6, ||b_1..6||), (16, ...), ...]."""
    v = (
        coefficients.values
        if isinstance(coefficients, CoefficientVector)
        else np.asarray(coefficients)
    )
    n_max = max_degree(v.size)
    return [
        (mode_count(n), float(np.linalg.norm(v[: mode_count(n)])))
        for n in range(1, n_max + 1)
    ]


def convergence_metric(
    previous: CoefficientVector, current: CoefficientVector
) -> float:
    """Relative norm growth (||b_next|| - ||b_prev||) / ||b_next||.

    Both vectors must share origin and frequency, and ``current`` must be a
    strictly larger complete shell.
    """
    if current.truncation <= previous.truncation:
        raise IncompleteShellError(
            f"truncation must grow: {previous.truncation} -> {current.truncation}"
        )
    if not math.isclose(previous.frequency, current.frequency, rel_tol=1e-9):
        raise InconsistentFrequencyError("convergence metric across frequencies")
    if not np.allclose(previous.origin, current.origin, atol=1e-12):
        raise ValidationError("convergence metric across different origins")
    norm_next = current.norm
    if norm_next == 0.0:
        raise ZeroNormError("cannot normalize by a zero-norm coefficient vector")
    return (norm_next - previous.norm) / norm_next


def convergence_table(coefficients: CoefficientVector) -> list[tuple[int, float, float]]:
    """Per-shell (truncation, norm, delta-vs-previous-shell) rows.

    The delta of the first shell is NaN since there is no smaller shell.
    """
    rows: list[tuple[int, float, float]] = []
    prev_norm = None
    for trunc, norm in shell_norms(coefficients):
        if prev_norm is None:
            delta = math.nan
        else:
            delta = math.nan if norm == 0.0 else (norm - prev_norm) / norm
        rows.append((trunc, norm, delta))
        prev_norm = norm
    return rows
