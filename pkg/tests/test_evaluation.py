import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cran_adf import adf, coordination, evaluation, scenario
from cran_adf.errors import EvaluationError
from conftest import brute_force_sinrs, random_psi


def _net(rng, N, J, M, noise=1.0):
    K = N * J
    h = rng.standard_normal((N, K, M)) + 1j * rng.standard_normal((N, K, M))
    v = rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))
    assoc = rng.permutation(np.repeat(np.arange(N), J))
    return (scenario.ChannelSet(h, noise), coordination.PrecoderSet(np.arange(K), v, 1.0),
            assoc)


def test_isolated_matched_filter(rng):
    h = rng.standard_normal((1, 1, 3)) + 1j * rng.standard_normal((1, 1, 3))
    P_t, noise = 2.0, 0.3
    v = np.sqrt(P_t) * h[0, 0][None] / np.linalg.norm(h)
    sinr = evaluation.compute_sinr(0, coordination.PrecoderSet(np.arange(1), v, P_t),
                                   scenario.ChannelSet(h, noise), [0])
    assert sinr == pytest.approx(P_t * np.linalg.norm(h) ** 2 / noise, rel=1e-12)


def test_two_user_scalar_by_hand():
    # RRH 0 serves user 0, RRH 1 serves user 1
    h = np.array([[[2.0], [0.5]], [[1.0], [3.0]]], dtype=complex)
    v = np.array([[1.0], [0.5]], dtype=complex)
    noise = 0.25
    sinrs = evaluation.compute_sinrs(coordination.PrecoderSet(np.arange(2), v, 1.0),
                                     scenario.ChannelSet(h, noise), [0, 1])
    # user 0: signal |2*1|^2 = 4, interference |h(1->0) * 0.5|^2 = 0.25
    # user 1: signal |3*0.5|^2 = 2.25, interference |h(0->1) * 1|^2 = 0.25
    np.testing.assert_allclose(sinrs, [4 / 0.5, 2.25 / 0.5])


def test_zero_noise_rejected(rng):
    ch, pre, assoc = _net(rng, 2, 1, 1)
    with pytest.raises(ValueError):
        evaluation.compute_sinrs(pre, scenario.ChannelSet(ch.h, 0.0), assoc)


def test_missing_precoder(rng):
    ch, pre, assoc = _net(rng, 2, 1, 2)
    partial = coordination.PrecoderSet(np.array([0]), pre.v[:1], 1.0)
    with pytest.raises(EvaluationError):
        evaluation.compute_sinrs(partial, ch, assoc)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 2), st.integers(1, 3), st.integers(0, 10 ** 6))
def test_matches_brute_force(N, J, M, seed):
    rng = np.random.default_rng(seed)
    ch, pre, assoc = _net(rng, N, J, M, noise=float(rng.uniform(0.1, 2)))
    fast = evaluation.compute_sinrs(pre, ch, assoc)
    slow = brute_force_sinrs(ch.h, pre.v, assoc, ch.noise_power)
    np.testing.assert_allclose(fast, slow, rtol=1e-9)
    assert np.all(fast >= 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(0, 10 ** 6), st.floats(0.1, 10.0))
def test_joint_rescaling_invariance(N, seed, t):
    rng = np.random.default_rng(seed)
    ch, pre, assoc = _net(rng, N, 1, 2)
    base = evaluation.compute_sinrs(pre, ch, assoc)
    scaled = evaluation.compute_sinrs(coordination.PrecoderSet(pre.users, t * pre.v, 1.0),
                                      scenario.ChannelSet(ch.h, ch.noise_power * t ** 2), assoc)
    np.testing.assert_allclose(scaled, base, rtol=1e-9)


def test_removing_interferer_never_hurts(rng):
    ch, pre, assoc = _net(rng, 3, 2, 2)
    base = evaluation.compute_sinrs(pre, ch, assoc)
    for s in range(6):
        v = pre.v.copy()
        v[s] = 0
        after = evaluation.compute_sinrs(coordination.PrecoderSet(pre.users, v, 1.0), ch, assoc)
        others = np.arange(6) != s
        assert np.all(after[others] >= base[others] * (1 - 1e-12))


def test_sum_rate_examples():
    assert evaluation.sum_rate(np.ones(32)) == pytest.approx(32.0)
    assert evaluation.sum_rate([]) == 0.0
    assert evaluation.sum_rate([1.0, 3.0]) < evaluation.sum_rate([1.0, 3.5])


def test_leakage_delegates(rng):
    psi = random_psi(rng, 4)
    x = adf.Assignment.from_labels([0, 1, 1, 0], 2)
    assert evaluation.leakage_report(psi, x) == adf.objective(psi, x)
    assert evaluation.leakage_report(psi, adf.Assignment.from_labels([0] * 4, 1)) == 0.0


def test_evaluate_report(rng):
    ch, pre, assoc = _net(rng, 2, 2, 2)
    psi = random_psi(rng, 2)
    x = adf.Assignment.from_labels([0, 1], 2)
    rep = evaluation.evaluate(pre, ch, assoc, psi, x, "bcd", 10.0)
    assert rep.sum_rate == pytest.approx(np.sum(np.log2(1 + rep.per_user_sinr)), rel=1e-9)
    assert rep.leakage_f == adf.objective(psi, x)
    assert rep.scheme_label == "bcd" and rep.snr_db == 10.0
