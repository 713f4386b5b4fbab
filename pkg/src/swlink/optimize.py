"""Excitation optimization against mode-space channels.

The best unit-norm excitation of a channel M' maximizes ||M' b'||_2, i.e.
it is the dominant right singular direction; the maximized received power
ratio is the largest eigenvalue lambda_max of M'^H M'.  Restricting the
excitation to the TE or TM columns optimizes realizable single-polarization
antennas, and a phase-aligned weighted superposition of per-scenario optima
gives a single robust excitation for a whole scenario ensemble.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .decompose import CoefficientRole, CoefficientVector
from .errors import (
    CancellationCollapseError,
    DimensionMismatchError,
    EmptyEnsembleError,
    InconsistentFrequencyError,
    ValidationError,
    ZeroChannelError,
)
from .modes import mode_range
from .network import ChannelMatrix, accepted_power_in_channel, transmit_vector

__all__ = [
    "SUBSPACES",
    "OptimalExcitation",
    "DipoleWeights",
    "subspace_columns",
    "optimal_excitation",
    "optimal_transmit_vector",
    "global_optimum",
    "dipole_weights",
    "subspace_summary",
]

log = logging.getLogger(__name__)

SUBSPACES = ("te", "tm", "full")

# eigenvalues within this relative band of the top one count as degenerate
_DEGENERACY_RTOL = 1e-9


@dataclass(frozen=True)
class OptimalExcitation:
    """Optimal unit-norm excitation of one channel.

    ``excitation`` has role OUTGOING (a b'-type equivalent source) and unit
    norm; ``lambda_max`` is the received-power gain ||M' b'||**2 of that
    excitation.
    """

    excitation: CoefficientVector
    lambda_max: float
    subspace: str
    scenario_tag: str = ""

    @property
    def singular_value(self) -> float:
        return math.sqrt(self.lambda_max)


def subspace_columns(truncation: int, subspace: str) -> np.ndarray:
    """0-based column indices of the requested polarization subspace."""
    if subspace not in SUBSPACES:
        raise ValidationError(f"subspace must be one of {SUBSPACES}, got {subspace!r}")
    if subspace == "full":
        return np.arange(truncation)
    s_want = 1 if subspace == "te" else 2
    return np.array([m.flat - 1 for m in mode_range(truncation) if m.s == s_want])


def _phase_convention(v: np.ndarray) -> np.ndarray:
    """Rotate so the largest-magnitude entry is real and positive."""
    idx = int(np.argmax(np.abs(v)))
    pivot = v[idx]
    if pivot == 0.0:
        return v
    return v * (np.conj(pivot) / abs(pivot))


def optimal_excitation(
    channel: ChannelMatrix, subspace: str = "full"
) -> OptimalExcitation:
    """Unit-norm excitation maximizing received power through the channel.

    Works on the Gram matrix of the selected columns; rows are first sorted
    into a canonical order so permuting the receive modes of the input
    cannot change the result, even bitwise.  A degenerate top eigenvalue is
    resolved deterministically toward the lexicographically first mode with
    support in the dominant subspace.
    """
    cols = subspace_columns(channel.tx_truncation, subspace)
    sub = channel.values[:, cols]
    # row order is irrelevant to M^H M in exact arithmetic; canonicalize it so
    # floating-point summation order is reproducible too
    order = np.lexsort(
        tuple(sub.imag[:, c] for c in range(sub.shape[1] - 1, -1, -1))
        + tuple(sub.real[:, c] for c in range(sub.shape[1] - 1, -1, -1))
    )
    gram = sub[order].conj().T @ sub[order]

    eigvals, eigvecs = np.linalg.eigh(gram)
    lam = float(eigvals[-1])
    if lam <= 0.0:
        raise ZeroChannelError(
            "channel is zero on the selected subspace; every excitation is optimal"
        )
    degenerate = eigvals >= lam * (1.0 - _DEGENERACY_RTOL)
    if np.count_nonzero(degenerate) > 1:
        basis = eigvecs[:, degenerate]
        v = None
        for i in range(basis.shape[0]):
            proj = basis @ np.conj(basis[i, :])
            if np.linalg.norm(proj) > 1e-8:
                v = proj / np.linalg.norm(proj)
                break
        log.info(
            "top eigenvalue of the channel Gram matrix is %d-fold degenerate; "
            "tie broken toward the first supported mode",
            int(np.count_nonzero(degenerate)),
        )
    else:
        v = eigvecs[:, -1]

    full = np.zeros(channel.tx_truncation, dtype=complex)
    full[cols] = v
    full = _phase_convention(full)
    excitation = CoefficientVector(
        role=CoefficientRole.OUTGOING,
        values=full,
        origin=channel.tx_origin,
        frequency=channel.frequency,
    )
    return OptimalExcitation(
        excitation=excitation,
        lambda_max=lam,
        subspace=subspace,
        scenario_tag=channel.scenario_tag,
    )


def optimal_transmit_vector(
    optimum: OptimalExcitation, reflection: ChannelMatrix | None = None
) -> CoefficientVector:
    """Transmit vector of an optimal excitation, normalized to its accepted power.

    With no reflective environment the accepted power of a unit-norm
    excitation is exactly 1/2 and T' = b'_opt; inside a reflective channel
    the loop-corrected accepted power is used.
    """
    if reflection is None:
        p_a = 0.5
    else:
        p_a = accepted_power_in_channel(optimum.excitation, reflection)
    return transmit_vector(optimum.excitation, p_a)


def global_optimum(
    optima: Sequence[OptimalExcitation],
    weights: Sequence[float] | None = None,
) -> CoefficientVector:
    """Phase-aligned weighted superposition of per-scenario optima.

    Each excitation is rotated so its projection onto the running sum is
    real and positive before being added; this removes the arbitrary global
    phases of the individual eigenvectors so that similar optima reinforce
    instead of cancel.  The result is normalized to unit norm.
    """
    if not optima:
        raise EmptyEnsembleError("no per-scenario optima to combine")
    k = len(optima)
    w = np.full(k, 1.0 / k) if weights is None else np.asarray(weights, dtype=float)
    if w.size != k:
        raise DimensionMismatchError(f"{k} optima but {w.size} weights")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ValidationError(f"weights must sum to 1, got {w.sum()!r}")

    first = optima[0]
    for opt in optima[1:]:
        if opt.excitation.truncation != first.excitation.truncation:
            raise DimensionMismatchError("optima truncations differ")
        if opt.subspace != first.subspace:
            raise ValidationError("optima come from different subspaces")
        if not math.isclose(
            opt.excitation.frequency, first.excitation.frequency, rel_tol=1e-9
        ):
            raise InconsistentFrequencyError("optima frequencies differ")

    acc = w[0] * first.excitation.values.copy()
    for wk, opt in zip(w[1:], optima[1:]):
        b = opt.excitation.values
        z = np.vdot(acc, b)  # conjugates acc
        if abs(z) > 1e-30:
            b = b * (np.conj(z) / abs(z))
        acc = acc + wk * b
    norm = np.linalg.norm(acc)
    if norm < 1e-6:
        raise CancellationCollapseError(
            f"weighted superposition collapsed to norm {norm:.3e}"
        )
    return CoefficientVector(
        role=CoefficientRole.OUTGOING,
        values=_phase_convention(acc / norm),
        origin=first.excitation.origin,
        frequency=first.excitation.frequency,
    )


@dataclass(frozen=True)
class DipoleWeights:
    """Cartesian dipole weights of the degree-1 shell of an excitation.

    ``magnetic`` collects the TE modes and ``electric`` the TM modes; the
    map is unitary, so the summed squared magnitudes equal the power of the
    degree-1 shell.
    """

    magnetic: np.ndarray
    electric: np.ndarray

    @property
    def power(self) -> float:
        return float(
            np.sum(np.abs(self.magnetic) ** 2) + np.sum(np.abs(self.electric) ** 2)
        )


# rows map (m=-1, m=0, m=+1) onto (x, y, z); unitary by construction
_DIPOLE_MAP = np.array(
    [
        [1.0 / math.sqrt(2.0), 0.0, -1.0 / math.sqrt(2.0)],
        [1.0 / math.sqrt(2.0), 0.0, 1.0 / math.sqrt(2.0)],
        [0.0, 1.0, 0.0],
    ],
    dtype=complex,
)


def dipole_weights(excitation: CoefficientVector | np.ndarray) -> DipoleWeights:
    """Project the degree-1 shell onto x/y/z magnetic and electric dipoles.

    The x and y weights combine the m = -1 and m = +1 modes with the phases
    that synthesize the corresponding linearly polarized dipole far field;
    a unit (s, m=0, n=1) mode maps to a pure z dipole of the same kind.
    """
    v = (
        excitation.values
        if isinstance(excitation, CoefficientVector)
        else np.asarray(excitation, dtype=complex).ravel()
    )
    if v.size < 6:
        raise DimensionMismatchError("need at least the degree-1 shell (6 modes)")
    te = v[[0, 2, 4]]  # (1,-1,1), (1,0,1), (1,+1,1)
    tm = v[[1, 3, 5]]
    return DipoleWeights(magnetic=_DIPOLE_MAP @ te, electric=_DIPOLE_MAP @ tm)


def subspace_summary(optima: Sequence[OptimalExcitation]) -> dict[str, float]:
    """Ensemble-average figures of merit: mean lambda_max and mean singular value."""
    if not optima:
        raise EmptyEnsembleError("no optima to summarize")
    lam = np.array([o.lambda_max for o in optima])
    return {
        "mean_lambda_max": float(lam.mean()),
        "mean_singular_value": float(np.sqrt(lam).mean()),
    }
