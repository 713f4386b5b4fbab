import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from swlink.decompose import CoefficientRole, CoefficientVector
from swlink.errors import (
    CancellationCollapseError,
    DimensionMismatchError,
    EmptyEnsembleError,
    ValidationError,
    ZeroChannelError,
)
from swlink.network import ChannelKind, ChannelMatrix
from swlink.optimize import (
    SUBSPACES,
    OptimalExcitation,
    dipole_weights,
    global_optimum,
    optimal_excitation,
    optimal_transmit_vector,
    subspace_columns,
    subspace_summary,
)
from swlink.synth import dipole_coefficients
from swlink.modes import Medium

FREQ = 2.45e9
MED = Medium.free_space(frequency=FREQ)


def _channel(values):
    return ChannelMatrix(
        kind=ChannelKind.TRANSMISSION_EQUIVALENT,
        values=np.asarray(values, dtype=complex),
        tx_origin=(0, 0, 0),
        rx_origin=(1, 0, 0),
        frequency=FREQ,
    )


def _excitation(values):
    values = np.asarray(values, dtype=complex)
    return CoefficientVector(
        role=CoefficientRole.OUTGOING, values=values / np.linalg.norm(values),
        origin=(0, 0, 0), frequency=FREQ,
    )


def test_subspace_columns():
    assert subspace_columns(6, "te").tolist() == [0, 2, 4]
    assert subspace_columns(6, "tm").tolist() == [1, 3, 5]
    assert subspace_columns(6, "full").tolist() == [0, 1, 2, 3, 4, 5]
    assert subspace_columns(16, "te").tolist() == list(range(0, 16, 2))
    assert subspace_columns(16, "tm").tolist() == list(range(1, 16, 2))
    assert SUBSPACES == ("te", "tm", "full")


def test_subspace_columns_rejects_unknown():
    with pytest.raises(ValidationError):
        subspace_columns(6, "huygens")


def test_identity_channel_degenerate_tie_break():
    # fully degenerate spectrum: the tie-break picks the first basis direction
    opt = optimal_excitation(_channel(np.eye(6)), subspace="te")
    assert_allclose(opt.lambda_max, 1.0, rtol=1e-12)
    expected = np.zeros(6)
    expected[0] = 1.0
    assert_allclose(opt.excitation.values, expected, atol=1e-12)

    full = optimal_excitation(_channel(np.eye(6)), subspace="full")
    assert_allclose(full.excitation.values, expected, atol=1e-12)


def test_rank_one_channel_recovers_right_vector():
    rng = np.random.default_rng(41)
    u = rng.normal(size=6) + 1j * rng.normal(size=6)
    v = rng.normal(size=6) + 1j * rng.normal(size=6)
    v /= np.linalg.norm(v)
    m = np.outer(u, v.conj())
    opt = optimal_excitation(_channel(m))
    assert_allclose(opt.lambda_max, np.linalg.norm(u) ** 2, rtol=1e-10)
    overlap = abs(np.vdot(opt.excitation.values, v))
    assert_allclose(overlap, 1.0, rtol=1e-10)


def test_singular_value_matches_dense_svd():
    rng = np.random.default_rng(42)
    for _ in range(10):
        m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        opt = optimal_excitation(_channel(m))
        sv = np.linalg.svd(m, compute_uv=False)[0]
        assert_allclose(opt.singular_value, sv, rtol=1e-12)
        assert_allclose(
            np.linalg.norm(m @ opt.excitation.values), sv, rtol=1e-12
        )


def test_phase_convention_real_positive():
    rng = np.random.default_rng(43)
    m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    opt = optimal_excitation(_channel(m))
    peak = opt.excitation.values[np.argmax(np.abs(opt.excitation.values))]
    assert peak.imag == pytest.approx(0.0, abs=1e-12)
    assert peak.real > 0

    # rotating the channel by a global phase leaves the reported optimum fixed
    opt2 = optimal_excitation(_channel(np.exp(0.7j) * m))
    assert_allclose(opt2.excitation.values, opt.excitation.values, atol=1e-10)


def test_subspace_optimum_stays_in_subspace():
    rng = np.random.default_rng(44)
    m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    for sub in ("te", "tm"):
        opt = optimal_excitation(_channel(m), subspace=sub)
        idx = subspace_columns(6, sub)
        outside = np.delete(opt.excitation.values, idx)
        assert_allclose(outside, 0.0, atol=1e-15)
        assert opt.lambda_max <= optimal_excitation(_channel(m)).lambda_max + 1e-12
        # restriction really is the best within the subspace
        sv = np.linalg.svd(m[:, idx], compute_uv=False)[0]
        assert_allclose(opt.singular_value, sv, rtol=1e-12)


def test_zero_channel_rejected():
    with pytest.raises(ZeroChannelError):
        optimal_excitation(_channel(np.zeros((6, 6))))


def test_row_order_of_responses_is_canonicalized():
    # the Gram matrix is invariant under receiver-side row permutations,
    # and the canonical ordering keeps the answer bit-stable
    rng = np.random.default_rng(45)
    m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    perm = rng.permutation(6)
    opt1 = optimal_excitation(_channel(m))
    opt2 = optimal_excitation(_channel(m[perm]))
    assert_allclose(opt1.lambda_max, opt2.lambda_max, rtol=1e-12)
    assert_allclose(opt1.excitation.values, opt2.excitation.values, atol=1e-10)


def test_optimal_transmit_vector_assumes_half_watt():
    opt = optimal_excitation(_channel(np.eye(6)))
    t = optimal_transmit_vector(opt)
    assert t.role is CoefficientRole.TRANSMIT
    assert_allclose(t.accepted_power, 0.5)
    assert_allclose(t.norm, 1.0)


def test_optimal_transmit_vector_with_reflection():
    opt = optimal_excitation(_channel(np.eye(6)))
    m11 = ChannelMatrix(
        kind=ChannelKind.REFLECTION, values=0.5 * np.eye(6, dtype=complex),
        tx_origin=(0, 0, 0), rx_origin=(0, 0, 0), frequency=FREQ,
    )
    t = optimal_transmit_vector(opt, reflection=m11)
    # I - M11 = 0.5 I: bhat = 2 b, ahat = bhat/2 = b, P = (4 - 1)/2 * |b|^2
    assert_allclose(t.accepted_power, 1.5, rtol=1e-12)


def test_global_optimum_of_identical_optima():
    opt = optimal_excitation(_channel(np.diag([3.0, 1, 1, 1, 1, 1])))
    combined = global_optimum([opt, opt, opt])
    assert_allclose(combined.values, opt.excitation.values, atol=1e-12)
    assert_allclose(combined.norm, 1.0, rtol=1e-12)


def test_global_optimum_aligns_phases():
    base = _excitation(np.array([1.0, 1j, 0, 0, 0, 0]))
    rotated = _excitation(np.exp(2.3j) * base.values)
    optima = [
        OptimalExcitation(excitation=base, lambda_max=1.0, subspace="full"),
        OptimalExcitation(excitation=rotated, lambda_max=1.0, subspace="full"),
    ]
    combined = global_optimum(optima)
    overlap = abs(np.vdot(combined.values, base.values))
    assert_allclose(overlap, 1.0, rtol=1e-12)


def test_global_optimum_weights():
    e1 = _excitation(np.eye(6)[0])
    e2 = _excitation(np.eye(6)[1])
    optima = [
        OptimalExcitation(excitation=e1, lambda_max=1.0, subspace="full"),
        OptimalExcitation(excitation=e2, lambda_max=1.0, subspace="full"),
    ]
    combined = global_optimum(optima, weights=[0.9, 0.1])
    expected = np.array([0.9, 0.1, 0, 0, 0, 0])
    expected /= np.linalg.norm(expected)
    assert_allclose(combined.values, expected, rtol=1e-12)
    with pytest.raises(ValidationError):
        global_optimum(optima, weights=[0.9, 0.2])
    with pytest.raises(DimensionMismatchError):
        global_optimum(optima, weights=[1.0])


def test_global_optimum_rejects_empty_and_mixed():
    with pytest.raises(EmptyEnsembleError):
        global_optimum([])
    opt6 = OptimalExcitation(excitation=_excitation(np.eye(6)[0]),
                             lambda_max=1.0, subspace="full")
    opt16 = OptimalExcitation(excitation=_excitation(np.eye(16)[0]),
                              lambda_max=1.0, subspace="full")
    with pytest.raises(DimensionMismatchError):
        global_optimum([opt6, opt16])
    opt_te = OptimalExcitation(excitation=_excitation(np.eye(6)[0]),
                               lambda_max=1.0, subspace="te")
    with pytest.raises(ValidationError):
        global_optimum([opt6, opt_te])


def test_global_optimum_collapse_detected():
    # negative weight tuned so the aligned superposition cancels exactly
    x = (2.0 + math.sqrt(2.0)) / 2.0
    e1 = _excitation(np.eye(6)[0])
    e2 = _excitation(np.eye(6)[1])
    diag = _excitation(np.array([1.0, 1.0, 0, 0, 0, 0]))
    optima = [
        OptimalExcitation(excitation=v, lambda_max=1.0, subspace="full")
        for v in (e1, e2, diag)
    ]
    with pytest.raises(CancellationCollapseError):
        global_optimum(optima, weights=[x, x, 1.0 - 2.0 * x])


def test_dipole_weights_recover_axes():
    for kind, attr in (("magnetic", "magnetic"), ("electric", "electric")):
        for i, axis in enumerate(("x", "y", "z")):
            b = dipole_coefficients(kind, axis, MED)
            dw = dipole_weights(b)
            got = getattr(dw, attr)
            other = dw.electric if attr == "magnetic" else dw.magnetic
            assert_allclose(np.abs(got), np.eye(3)[i], atol=1e-12)
            assert_allclose(other, 0.0, atol=1e-12)
            assert_allclose(dw.power, 1.0, rtol=1e-12)


def test_dipole_weights_projects_first_shell():
    rng = np.random.default_rng(46)
    v = rng.normal(size=16) + 1j * rng.normal(size=16)
    dw_full = dipole_weights(v)
    dw_dipole = dipole_weights(v[:6])
    assert_allclose(dw_full.magnetic, dw_dipole.magnetic)
    assert_allclose(dw_full.electric, dw_dipole.electric)
    with pytest.raises(DimensionMismatchError):
        dipole_weights(np.ones(5, dtype=complex))


def test_subspace_summary_means():
    optima = [
        OptimalExcitation(excitation=_excitation(np.eye(6)[0]),
                          lambda_max=4.0, subspace="full"),
        OptimalExcitation(excitation=_excitation(np.eye(6)[1]),
                          lambda_max=16.0, subspace="full"),
    ]
    summary = subspace_summary(optima)
    assert_allclose(summary["mean_lambda_max"], 10.0)
    assert_allclose(summary["mean_singular_value"], 3.0)
