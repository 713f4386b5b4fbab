"""Power-normalized spherical vector wave functions and mode bookkeeping.

Fields radiated or received by an antenna are expanded as

    E(r) = k*sqrt(eta) * sum_j [ b_j F_j^(outgoing)(r) + a_j F_j^(incoming)(r) ]

with the time convention exp(+j*omega*t), so outgoing waves carry spherical
Hankel functions of the second kind and decay as exp(-j*k*r)/r.  The wave
functions are normalized such that a purely outgoing field radiates the power
P = 0.5 * ||b||**2, which makes the coefficients directly comparable to
root-power port waves.

A single flat index j enumerates polarization s (1 TE, 2 TM), azimuthal order
m and degree n as j = 2*(n*(n+1) + m - 1) + s.  Complete shells up to degree
N therefore hold 2*N*(N+2) modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache

import numpy as np
from scipy.constants import c as _C0, epsilon_0 as _EPS0, mu_0 as _MU0
from scipy.special import gammaln, lpmv, spherical_jn, spherical_yn

from .errors import (
    DimensionMismatchError,
    IncompleteShellError,
    OriginSingularityError,
    ZeroPowerError,
)

__all__ = [
    "WaveKind",
    "ModeIndex",
    "Medium",
    "FarFieldPattern",
    "mode_count",
    "max_degree",
    "mode_range",
    "dual_order",
    "mode_basis",
    "evaluate_swf",
    "mode_fields",
    "far_field_pattern",
]

# kr below this is treated as "at the expansion origin"
_ORIGIN_KR = 1e-12
# sin(theta) below this switches the angular functions to their polar limits
_POLAR_SIN = 1e-7


class WaveKind(IntEnum):
    """Radial behavior of a wave function.

    REGULAR uses the spherical Bessel function j_n and is finite everywhere,
    INCOMING uses h_n^(1) and OUTGOING uses h_n^(2); the latter two are
    singular at the expansion origin.
    """

    REGULAR = 1
    INCOMING = 3
    OUTGOING = 4


def mode_count(max_degree: int) -> int:
    """Number of modes in all complete shells up to degree ``max_degree``."""
    return 2 * max_degree * (max_degree + 2)


def max_degree(truncation: int) -> int:
    """Degree N of the complete shell holding ``truncation`` modes.

    Raises
    ------
    IncompleteShellError
        If ``truncation`` is not 2*N*(N+2) for an integer N >= 1.
    """
    if truncation >= 6:
        n = math.isqrt(truncation // 2 + 1) - 1
        if mode_count(n) == truncation:
            return n
    raise IncompleteShellError(
        f"truncation {truncation} does not close a degree shell; "
        "expected 2*N*(N+2), e.g. 6, 16, 30"
    )


@dataclass(frozen=True, order=True)
class ModeIndex:
    """Single spherical mode (s, m, n); s=1 is TE, s=2 is TM."""

    s: int
    m: int
    n: int

    def __post_init__(self) -> None:
        if self.s not in (1, 2):
            raise DimensionMismatchError(f"polarization index s={self.s} not in (1, 2)")
        if self.n < 1:
            raise DimensionMismatchError(f"degree n={self.n} must be >= 1")
        if abs(self.m) > self.n:
            raise DimensionMismatchError(f"order m={self.m} exceeds degree n={self.n}")

    @property
    def flat(self) -> int:
        """1-based flat index j."""
        return 2 * (self.n * (self.n + 1) + self.m - 1) + self.s

    @classmethod
    def from_flat(cls, j: int) -> "ModeIndex":
        if j < 1:
            raise DimensionMismatchError(f"flat mode index {j} must be >= 1")
        s = 2 - (j % 2)
        p = (j - s) // 2 + 1
        n = math.isqrt(p)
        return cls(s=s, m=p - n * (n + 1), n=n)

    def dual(self) -> "ModeIndex":
        """Mode with the opposite polarization; curl pairs TE with TM."""
        return ModeIndex(s=3 - self.s, m=self.m, n=self.n)


@lru_cache(maxsize=32)
def mode_range(truncation: int) -> tuple[ModeIndex, ...]:
    """All modes of the complete shells up to ``truncation``, in flat order."""
    max_degree(truncation)
    return tuple(ModeIndex.from_flat(j) for j in range(1, truncation + 1))


def dual_order(truncation: int) -> np.ndarray:
    """Permutation p with p[j] = flat index (0-based) of the dual of mode j."""
    return np.array([m.dual().flat - 1 for m in mode_range(truncation)])


@dataclass(frozen=True)
class Medium:
    """Lossless propagation medium: wavenumber, wave impedance, frequency."""

    k: float
    eta: float
    frequency: float

    def __post_init__(self) -> None:
        # only free space is supported; the triple must be self-consistent
        k0 = 2.0 * math.pi * self.frequency / _C0
        eta0 = math.sqrt(_MU0 / _EPS0)
        if not math.isclose(self.k, k0, rel_tol=1e-9):
            raise DimensionMismatchError(
                f"wavenumber {self.k} inconsistent with frequency {self.frequency}"
            )
        if not math.isclose(self.eta, eta0, rel_tol=1e-9):
            raise DimensionMismatchError(f"impedance {self.eta} is not free space")

    @classmethod
    def free_space(cls, frequency: float) -> "Medium":
        if frequency <= 0.0:
            raise DimensionMismatchError(f"frequency {frequency} must be positive")
        return cls(
            k=2.0 * math.pi * frequency / _C0,
            eta=math.sqrt(_MU0 / _EPS0),
            frequency=frequency,
        )

    @property
    def wavelength(self) -> float:
        return 2.0 * math.pi / self.k


@lru_cache(maxsize=4096)
def _legendre_norm(am: int, n: int) -> float:
    # sqrt((2n+1)/2 * (n-m)!/(n+m)!), log-gamma form to stay finite at high n
    return math.sqrt(
        (2 * n + 1) / 2.0 * math.exp(gammaln(n - am + 1) - gammaln(n + am + 1))
    )


def _angular_functions(
    am: int, n: int, ct: np.ndarray, st: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalized Legendre triple for order ``am`` >= 0 and degree ``n``.

    Returns (Pbar, pi, tau) with Pbar the fully normalized associated
    Legendre function without the Condon-Shortley phase, pi = am*Pbar/sin
    and tau = dPbar/dtheta.  The polar directions are evaluated through
    their analytic limits instead of dividing by sin(theta).
    """
    c = _legendre_norm(am, n)
    sgn = (-1.0) ** am  # cancel the Condon-Shortley phase built into lpmv
    pbar = sgn * c * lpmv(am, n, ct)

    if am == 0:
        # dP_n/dtheta = -P_n^1 with Condon-Shortley absorbed: equals lpmv(1,n,x)
        tau = c * lpmv(1, n, ct)
        return pbar, np.zeros_like(pbar), tau

    polar = st < _POLAR_SIN
    safe_st = np.where(polar, 1.0, st)

    pi_f = am * pbar / safe_st
    if n > am:
        pnm1 = (-1.0) ** am * _legendre_norm(am, n - 1) * lpmv(am, n - 1, ct)
        gamma = math.sqrt((2 * n + 1) * (n * n - am * am) / (2 * n - 1))
        tau = (n * ct * pbar - gamma * pnm1) / safe_st
    else:
        tau = n * ct * pbar / safe_st

    if np.any(polar):
        if am == 1:
            # P_n^1/sin -> P_n'(+-1) = (+-1)^(n-1) * n(n+1)/2
            lim = c * n * (n + 1) / 2.0
            north = ct > 0
            pi_f = np.where(polar, np.where(north, lim, (-1.0) ** (n - 1) * lim), pi_f)
            tau = np.where(polar, np.where(north, lim, (-1.0) ** n * lim), tau)
        else:
            pi_f = np.where(polar, 0.0, pi_f)
            tau = np.where(polar, 0.0, tau)
        pbar = np.where(polar, 0.0, pbar) if am >= 1 else pbar
    return pbar, pi_f, tau


def _radial_functions(
    n: int, kr: np.ndarray, kind: WaveKind
) -> tuple[np.ndarray, np.ndarray]:
    """Radial factor z_n(kr) and (1/kr) d(kr*z_n)/d(kr) for one degree."""
    jn = spherical_jn(n, kr)
    jnp = spherical_jn(n, kr, derivative=True)
    if kind is WaveKind.REGULAR:
        z, zp = jn, jnp
    else:
        yn = spherical_yn(n, kr)
        ynp = spherical_yn(n, kr, derivative=True)
        if kind is WaveKind.INCOMING:
            z, zp = jn + 1j * yn, jnp + 1j * ynp
        else:
            z, zp = jn - 1j * yn, jnp - 1j * ynp
    return z, zp + z / kr


def _spherical_frame(pts: np.ndarray, kind: WaveKind, k: float):
    """Per-point spherical angles and unit vectors; guards the origin."""
    r = np.linalg.norm(pts, axis=1)
    if kind is not WaveKind.REGULAR and np.any(k * r < _ORIGIN_KR):
        raise OriginSingularityError(
            "outgoing/incoming wave functions are singular at the expansion origin"
        )
    if np.any(k * r < _ORIGIN_KR):
        # regular waves are finite at the origin; evaluate the limit along +z,
        # which is direction-independent
        pts = pts.copy()
        pts[k * r < _ORIGIN_KR] = (0.0, 0.0, _ORIGIN_KR / k * 10.0)
        r = np.linalg.norm(pts, axis=1)

    ct = np.clip(pts[:, 2] / r, -1.0, 1.0)
    rho = np.hypot(pts[:, 0], pts[:, 1])
    st = rho / r
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    cp, sp = np.cos(phi), np.sin(phi)

    e_r = np.stack([st * cp, st * sp, ct], axis=1)
    e_t = np.stack([ct * cp, ct * sp, -st], axis=1)
    e_p = np.stack([-sp, cp, np.zeros_like(cp)], axis=1)
    return r, ct, st, phi, e_r, e_t, e_p


def mode_basis(
    points: np.ndarray,
    truncation: int,
    kind: WaveKind,
    medium: Medium,
    origin: np.ndarray | None = None,
) -> np.ndarray:
    """Evaluate all wave functions up to ``truncation`` at Cartesian points.

    Parameters
    ----------
    points : (P, 3) array
        Evaluation positions in meters.
    truncation : int
        Number of modes; must close a degree shell.
    kind : WaveKind
        Radial behavior.
    medium : Medium
        Supplies the wavenumber.
    origin : (3,) array, optional
        Expansion origin; defaults to the coordinate origin.

    Returns
    -------
    (truncation, P, 3) complex array
        Cartesian components of F_j at every point, dimensionless.
    """
    n_max = max_degree(truncation)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 3:
        raise DimensionMismatchError(f"points must be (P, 3), got {pts.shape}")
    if origin is not None:
        pts = pts - np.asarray(origin, dtype=float)

    r, ct, st, phi, e_r, e_t, e_p = _spherical_frame(pts, kind, medium.k)
    kr = medium.k * r

    out = np.empty((truncation, pts.shape[0], 3), dtype=complex)
    for n in range(1, n_max + 1):
        z, rtm = _radial_functions(n, kr, kind)
        z_over_kr = z / kr
        pref_n = 1.0 / math.sqrt(2.0 * math.pi * n * (n + 1))
        for m in range(-n, n + 1):
            pbar, pi_f, tau = _angular_functions(abs(m), n, ct, st)
            cs = (-1.0) ** m if m > 0 else 1.0
            common = (cs * pref_n) * np.exp(1j * m * phi)
            m_pi = np.sign(m) * pi_f

            f_te = common[:, None] * (
                (1j * z)[:, None] * (m_pi[:, None] * e_t)
                - z[:, None] * (tau[:, None] * e_p)
            )
            f_tm = common[:, None] * (
                (n * (n + 1) * z_over_kr * pbar)[:, None] * e_r
                + rtm[:, None] * (tau[:, None] * e_t + 1j * m_pi[:, None] * e_p)
            )
            base = 2 * (n * (n + 1) + m - 1)
            out[base] = f_te
            out[base + 1] = f_tm
    return out


def evaluate_swf(
    mode: ModeIndex,
    kind: WaveKind,
    medium: Medium,
    points: np.ndarray,
    origin: np.ndarray | None = None,
) -> np.ndarray:
    """Cartesian components of a single wave function F at the given points."""
    truncation = mode_count(mode.n)
    basis = mode_basis(points, truncation, kind, medium, origin=origin)
    return basis[mode.flat - 1]


def mode_fields(
    coefficients: np.ndarray,
    kind: WaveKind,
    medium: Medium,
    points: np.ndarray,
    origin: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Electric and magnetic fields of a coefficient vector of one wave kind.

    E = k*sqrt(eta) * sum_j c_j F_j and H = (j_imag*k/sqrt(eta)) * sum_j c_j
    Fdual_j, which satisfies both Maxwell curl equations under exp(+j*omega*t).

    Returns
    -------
    (E, H) : two (P, 3) complex arrays in V/m and A/m.
    """
    c = np.asarray(coefficients, dtype=complex).ravel()
    basis = mode_basis(points, c.size, kind, medium, origin=origin)
    scale_e = medium.k * math.sqrt(medium.eta)
    scale_h = 1j * medium.k / math.sqrt(medium.eta)
    e = scale_e * np.einsum("j,jpc->pc", c, basis)
    h = scale_h * np.einsum("j,jpc->pc", c[dual_order(c.size)], basis)
    return e, h


@dataclass(frozen=True)
class FarFieldPattern:
    """Far-field samples A(theta, phi) with E ~ exp(-j*k*r)/r * A.

    ``e_theta``/``e_phi`` hold the components of A in volts on the
    (theta, phi) product grid; ``gain_dbi`` is the realized gain relative to
    the accepted power.  ``theta_weights`` are Gauss-Legendre weights in
    cos(theta) so that full-sphere integrals are exact up to the grid degree.
    """

    theta: np.ndarray
    phi: np.ndarray
    e_theta: np.ndarray
    e_phi: np.ndarray
    gain_dbi: np.ndarray
    accepted_power: float
    eta: float
    theta_weights: np.ndarray = field(repr=False, default=None)

    def radiated_power(self) -> float:
        """Total radiated power by quadrature over the sphere, in watts."""
        u = (np.abs(self.e_theta) ** 2 + np.abs(self.e_phi) ** 2) / (2.0 * self.eta)
        return float(
            np.sum(u * self.theta_weights[:, None]) * (2.0 * math.pi / self.phi.size)
        )

    @property
    def peak_gain_dbi(self) -> float:
        return float(np.max(self.gain_dbi))


def far_field_pattern(
    coefficients: np.ndarray,
    medium: Medium,
    accepted_power: float,
    n_theta: int = 64,
    n_phi: int = 128,
) -> FarFieldPattern:
    """Far-field pattern of an outgoing coefficient vector.

    The asymptotic forms h_n^(2)(kr) -> j^(n+1) exp(-j*k*r)/(kr) reduce each
    mode to an angular factor; the radial phase and 1/r are factored out.

    Parameters
    ----------
    coefficients : (J,) complex array
        Outgoing-wave coefficients, complete shells only.
    accepted_power : float
        Power accepted at the port, used as the gain reference; must be > 0.
    """
    if accepted_power <= 0.0:
        raise ZeroPowerError(f"accepted power {accepted_power} must be positive")
    b = np.asarray(coefficients, dtype=complex).ravel()
    n_max = max_degree(b.size)

    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)[::-1]  # ascending theta
    w = w[::-1]
    ct, st = np.cos(theta), np.sin(theta)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    expmphi = {m: np.exp(1j * m * phi) for m in range(-n_max, n_max + 1)}

    a_t = np.zeros((n_theta, n_phi), dtype=complex)
    a_p = np.zeros((n_theta, n_phi), dtype=complex)
    sq_eta = math.sqrt(medium.eta)
    for idx, mode in enumerate(mode_range(b.size)):
        if b[idx] == 0.0:
            continue
        s, m, n = mode.s, mode.m, mode.n
        pbar, pi_f, tau = _angular_functions(abs(m), n, ct, st)
        cs = (-1.0) ** m if m > 0 else 1.0
        pref = cs / math.sqrt(2.0 * math.pi * n * (n + 1))
        m_pi = np.sign(m) * pi_f
        if s == 1:
            c_asym = 1j ** (n + 1)
            f_t, f_p = 1j * m_pi, -tau
        else:
            c_asym = 1j**n
            f_t, f_p = tau, 1j * m_pi
        scale = sq_eta * b[idx] * c_asym * pref
        a_t += scale * np.outer(f_t, expmphi[m])
        a_p += scale * np.outer(f_p, expmphi[m])

    u = (np.abs(a_t) ** 2 + np.abs(a_p) ** 2) / (2.0 * medium.eta)
    with np.errstate(divide="ignore"):
        gain_dbi = 10.0 * np.log10(4.0 * math.pi * u / accepted_power)
    return FarFieldPattern(
        theta=theta,
        phi=phi,
        e_theta=a_t,
        e_phi=a_p,
        gain_dbi=gain_dbi,
        accepted_power=float(accepted_power),
        eta=medium.eta,
        theta_weights=w,
    )
