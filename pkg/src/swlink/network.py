"""Mode-space network algebra: port waves, channels, and the link equation.

All powers follow the root-power convention of the wave expansion: a
transmit vector T' = b'/sqrt(2*P_a) carries unit norm for a lossless
matched antenna, and the end-to-end transmission coefficient is the
bilinear triple product S21 = R'_2 M'_21 T'_1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .decompose import CoefficientRole, CoefficientVector
from .errors import (
    DimensionMismatchError,
    InconsistentFrequencyError,
    MissingColumnError,
    SingularLoopError,
    SingularResponseError,
    ValidationError,
    ZeroPowerError,
)
from .modes import max_degree, mode_range

__all__ = [
    "ChannelKind",
    "ChannelMatrix",
    "RECIPROCITY_CONSTANT",
    "transmit_vector",
    "receive_vector_from_transmit",
    "link",
    "reflection_matrix_from_responses",
    "accepted_power_in_channel",
    "convert_channel",
]

# Global constant of the receive/transmit reciprocity map
# R'_{s,m,n} = c_r * (-1)^m * T'_{s,-m,n}.  Fixed to +1 by the free-space
# two-dipole oracle: the Friis level pins |c_r| and the signed S21 = S12
# equality over generic antenna pairs pins the phase.
RECIPROCITY_CONSTANT = 1.0

_COND_LIMIT = 1e12


class ChannelKind(Enum):
    TRANSMISSION = "transmission"  # raw M21: outgoing at tx -> incoming at rx
    TRANSMISSION_EQUIVALENT = "transmission_prime"  # M'21 with loops folded in
    REFLECTION = "reflection"  # M11: outgoing -> incoming at the same port


@dataclass(frozen=True)
class ChannelMatrix:
    """Mode-space channel block between two expansion origins."""

    kind: ChannelKind
    values: np.ndarray
    tx_origin: tuple[float, float, float]
    rx_origin: tuple[float, float, float]
    frequency: float
    scenario_tag: str = ""

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 2:
            raise DimensionMismatchError(f"channel must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("channel matrix contains non-finite entries")
        if self.kind is ChannelKind.REFLECTION and v.shape[0] != v.shape[1]:
            raise DimensionMismatchError("reflection matrices must be square")
        max_degree(v.shape[0])
        max_degree(v.shape[1])
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "tx_origin", tuple(float(x) for x in self.tx_origin))
        object.__setattr__(self, "rx_origin", tuple(float(x) for x in self.rx_origin))

    @property
    def rx_truncation(self) -> int:
        return self.values.shape[0]

    @property
    def tx_truncation(self) -> int:
        return self.values.shape[1]

    def scaled(self, factor: complex) -> "ChannelMatrix":
        return replace(self, values=self.values * factor)


def _require_same_frequency(*freqs: float) -> None:
    f0 = freqs[0]
    for f in freqs[1:]:
        if not math.isclose(f, f0, rel_tol=1e-9):
            raise InconsistentFrequencyError(f"frequencies differ: {freqs}")


def transmit_vector(
    b_prime: CoefficientVector, accepted_power: float | None = None
) -> CoefficientVector:
    """Normalize an equivalent-source excitation to its accepted power.

    T' = b'/sqrt(2*P_a); for a lossless antenna ||T'|| = 1 and for a
    partially dissipative one ||T'||**2 equals the radiation efficiency.
    """
    p_a = accepted_power if accepted_power is not None else b_prime.accepted_power
    if p_a is None:
        raise ZeroPowerError("accepted power unknown; cannot normalize excitation")
    if not (p_a > 0.0 and math.isfinite(p_a)):
        raise ZeroPowerError(f"accepted power {p_a} must be positive and finite")
    return CoefficientVector(
        role=CoefficientRole.TRANSMIT,
        values=b_prime.values / math.sqrt(2.0 * p_a),
        origin=b_prime.origin,
        frequency=b_prime.frequency,
        accepted_power=float(p_a),
    )


def receive_vector_from_transmit(transmit: CoefficientVector) -> CoefficientVector:
    """Receive vector of a reciprocal antenna: R'_{s,m,n} = (-1)^m T'_{s,-m,n}."""
    r = _reciprocal_map(transmit.values)
    return CoefficientVector(
        role=CoefficientRole.RECEIVE,
        values=r,
        origin=transmit.origin,
        frequency=transmit.frequency,
        accepted_power=transmit.accepted_power,
    )


def _reciprocal_map(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    for mode in mode_range(t.size):
        flipped = 2 * (mode.n * (mode.n + 1) - mode.m - 1) + mode.s
        out[mode.flat - 1] = (
            RECIPROCITY_CONSTANT * (-1.0) ** mode.m * t[flipped - 1]
        )
    return out


def link(
    receive: CoefficientVector,
    channel: ChannelMatrix,
    transmit: CoefficientVector,
) -> complex:
    """Transmission coefficient S21 = R'_2 M'_21 T'_1 (bilinear, no conjugation)."""
    if transmit.truncation != channel.tx_truncation:
        raise DimensionMismatchError(
            f"transmit vector ({transmit.truncation}) does not match channel "
            f"tx side ({channel.tx_truncation})"
        )
    if receive.truncation != channel.rx_truncation:
        raise DimensionMismatchError(
            f"receive vector ({receive.truncation}) does not match channel "
            f"rx side ({channel.rx_truncation})"
        )
    _require_same_frequency(receive.frequency, channel.frequency, transmit.frequency)
    return complex(receive.values @ (channel.values @ transmit.values))


def reflection_matrix_from_responses(
    responses: Sequence[CoefficientVector],
) -> ChannelMatrix:
    """Recover M11 from per-mode total-field recordings.

    ``responses[j]`` must be the total outgoing coefficient vector (raw b,
    excitation plus backscatter) recorded when unit mode j+1 is excited.
    The stacked response matrix Bhat = (I - M11)^-1 is inverted to give
    M11 = I - Bhat^-1.
    """
    if not responses:
        raise MissingColumnError("no response recordings supplied")
    truncation = responses[0].truncation
    if len(responses) != truncation:
        raise MissingColumnError(
            f"need one recording per mode: got {len(responses)} of {truncation}"
        )
    _require_same_frequency(*[r.frequency for r in responses])
    origin = responses[0].origin
    for r in responses:
        if r.truncation != truncation:
            raise DimensionMismatchError("response truncations differ")
        if not np.allclose(r.origin, origin, atol=1e-12):
            raise ValidationError("response recordings use different origins")

    bhat = np.column_stack([r.values for r in responses])
    if not np.all(np.isfinite(bhat)):
        raise ValidationError("response matrix contains non-finite entries")
    if np.linalg.cond(bhat) >= _COND_LIMIT:
        raise SingularResponseError(
            "response matrix is too ill-conditioned to invert"
        )
    m11 = np.eye(truncation) - np.linalg.inv(bhat)
    return ChannelMatrix(
        kind=ChannelKind.REFLECTION,
        values=m11,
        tx_origin=origin,
        rx_origin=origin,
        frequency=responses[0].frequency,
    )


def accepted_power_in_channel(
    b_prime: CoefficientVector | np.ndarray, reflection: ChannelMatrix
) -> float:
    """Accepted power of a unit-norm excitation inside a reflective channel.

    P_a = 1/2 + Re{ ((I - M11)^-1 M11 b')^H b' }, the closed form of the
    net flux 0.5*(||bhat||^2 - ||ahat||^2) after summing the excitation
    loop bhat = b' + M11 bhat.
    """
    b = b_prime.values if isinstance(b_prime, CoefficientVector) else np.asarray(b_prime)
    b = b.astype(complex).ravel()
    if abs(np.linalg.norm(b) - 1.0) > 1e-6:
        raise ValidationError(
            f"excitation must be unit norm, got ||b'|| = {np.linalg.norm(b)}"
        )
    m11 = reflection.values
    if m11.shape[0] != b.size:
        raise DimensionMismatchError(
            f"reflection matrix {m11.shape} does not match excitation ({b.size})"
        )
    loop = np.eye(b.size) - m11
    if np.linalg.cond(loop) >= _COND_LIMIT:
        raise SingularLoopError("(I - M11) is singular; excitation loop diverges")
    x = np.linalg.solve(loop, m11 @ b)
    return float(0.5 + np.real(np.vdot(x, b)))


def convert_channel(
    m21: ChannelMatrix,
    m11: ChannelMatrix | None = None,
    m22: ChannelMatrix | None = None,
) -> ChannelMatrix:
    """Fold the port reflections into the raw channel.

    M'21 = (I - M22)^-1 M21 (I - M11)^-1 for unit-reflection equivalent
    sources; omitted reflections default to zero.  The rx->tx backscatter
    path is neglected by construction.
    """
    values = m21.values
    if m11 is not None:
        if m11.values.shape[0] != m21.tx_truncation:
            raise DimensionMismatchError("M11 does not match the channel tx side")
        _require_same_frequency(m21.frequency, m11.frequency)
        loop = np.eye(m21.tx_truncation) - m11.values
        if np.linalg.cond(loop) >= _COND_LIMIT:
            raise SingularLoopError("(I - M11) is singular")
        values = np.linalg.solve(loop.T, values.T).T
    if m22 is not None:
        if m22.values.shape[0] != m21.rx_truncation:
            raise DimensionMismatchError("M22 does not match the channel rx side")
        _require_same_frequency(m21.frequency, m22.frequency)
        loop = np.eye(m21.rx_truncation) - m22.values
        if np.linalg.cond(loop) >= _COND_LIMIT:
            raise SingularLoopError("(I - M22) is singular")
        values = np.linalg.solve(loop, values)
    return replace(m21, kind=ChannelKind.TRANSMISSION_EQUIVALENT, values=values)
