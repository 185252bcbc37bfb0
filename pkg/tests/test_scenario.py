import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cran_adf import scenario
from cran_adf.errors import ConfigError


def test_full_size_drop():
    dep = scenario.drop_deployment(7, N=16, K=32, M=4, J=2)
    assert dep.n_rrh == 16 and dep.n_users == 32
    assert np.all(np.bincount(dep.association, minlength=16) == 2)
    assert np.all((dep.rrh_positions >= 0) & (dep.rrh_positions <= dep.area_side))
    assert np.all((dep.user_positions >= 0) & (dep.user_positions <= dep.area_side))


def test_single_rrh_single_user():
    dep = scenario.drop_deployment(3, N=1, K=1, M=2, J=1)
    assert dep.association.tolist() == [0]


def test_drop_is_deterministic():
    a = scenario.drop_deployment(11, 4, 8, 2, 2)
    b = scenario.drop_deployment(11, 4, 8, 2, 2)
    assert np.array_equal(a.rrh_positions, b.rrh_positions)
    assert np.array_equal(a.user_positions, b.user_positions)
    assert np.array_equal(a.association, b.association)
    assert scenario.dump(a) == scenario.dump(b)


def test_quota_mismatch_rejected():
    with pytest.raises(ConfigError):
        scenario.drop_deployment(0, N=4, K=7, M=2, J=2)


def _brute_association(energy, J):
    """Quota-feasible association maximizing total own-link energy."""
    N, K = energy.shape
    best, best_val = None, -np.inf
    for assoc in itertools.product(range(N), repeat=K):
        if np.any(np.bincount(assoc, minlength=N) > J):
            continue
        val = sum(energy[i, u] for u, i in enumerate(assoc))
        if val > best_val:
            best, best_val = list(assoc), val
    return best


def test_association_two_by_two_example():
    # rows: RRH, columns: users a, b
    energy = np.array([[9.0, 4.0], [1.0, 3.0]])
    assoc = scenario.associate_users(energy, 1)
    assert assoc.tolist() == [0, 1]
    assert assoc.tolist() == _brute_association(energy, 1)


def test_association_single_rrh():
    assert scenario.associate_users(np.ones((1, 3)), 3).tolist() == [0, 0, 0]


def test_association_equal_energies_tie_break():
    assoc = scenario.associate_users(np.ones((3, 6)), 2)
    assert assoc.tolist() == [0, 0, 1, 1, 2, 2]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(0, 10 ** 6))
def test_association_quota_property(N, J, seed):
    energy = np.random.default_rng(seed).random((N, N * J))
    assoc = scenario.associate_users(energy, J)
    assert assoc.shape == (N * J,)
    assert np.all(np.bincount(assoc, minlength=N) == J)


def test_pathloss_values():
    dep = scenario.Deployment(100.0, np.array([[0.0, 0.0]]),
                              np.array([[1.0, 0.0], [10.0, 0.0], [0.0, 0.0]]), 1, 3,
                              np.zeros(3, dtype=int))
    g = scenario.compute_pathloss(dep, exponent=3.5, reference_gain=1.0).g
    assert g[0, 0] == pytest.approx(1.0)
    assert g[0, 2] == pytest.approx(1.0)  # clamped at d_min
    g2 = scenario.compute_pathloss(dep, exponent=2.0, reference_gain=1.0).g
    assert g2[0, 1] == pytest.approx(0.01)
    g3 = scenario.compute_pathloss(dep, exponent=2.0, reference_gain=5.0).g
    assert g3[0, 2] == pytest.approx(5.0)
    assert np.all(g > 0)


def test_pathloss_rejects_nonpositive_exponent():
    dep = scenario.drop_deployment(0, 2, 2, 1, 1)
    with pytest.raises(ConfigError):
        scenario.compute_pathloss(dep, exponent=0.0)


def test_channel_shapes_and_determinism():
    dep = scenario.drop_deployment(5, 3, 6, 4, 2)
    a = scenario.draw_channels(9, dep, "iid", realization_index=2)
    b = scenario.draw_channels(9, dep, "iid", realization_index=2)
    c = scenario.draw_channels(9, dep, "iid", realization_index=3)
    assert a.h.shape == (3, 6, 4)
    assert np.array_equal(a.h, b.h)
    assert not np.array_equal(a.h, c.h)
    assert a.realization_index == 2
    json.loads(scenario.dump(a))


def test_iid_unit_variance():
    dep = scenario.drop_deployment(1, 8, 16, 4, 2)
    samples = np.concatenate([scenario.draw_channels(2, dep, "iid", r).h.ravel()
                              for r in range(40)])
    assert np.mean(np.abs(samples) ** 2) == pytest.approx(1.0, abs=0.03)
    assert abs(np.mean(samples)) < 0.03


def test_iid_pathloss_with_unit_gain_matches_iid():
    dep = scenario.drop_deployment(1, 2, 4, 2, 2)
    ones = scenario.PathlossSet(np.ones((2, 4)))
    a = scenario.draw_channels(4, dep, "iid", 1)
    b = scenario.draw_channels(4, dep, "iid_pathloss", 1, pathloss=ones)
    assert np.array_equal(a.h, b.h)


def test_iid_pathloss_scales_by_root_gain():
    dep = scenario.drop_deployment(1, 2, 4, 2, 2)
    g = scenario.PathlossSet(np.full((2, 4), 4.0))
    a = scenario.draw_channels(4, dep, "iid", 0)
    b = scenario.draw_channels(4, dep, "iid_pathloss", 0, pathloss=g)
    np.testing.assert_allclose(b.h, 2.0 * a.h)


def test_bad_fading_mode():
    dep = scenario.drop_deployment(1, 2, 2, 1, 1)
    with pytest.raises(ConfigError):
        scenario.draw_channels(0, dep, "rician")


def test_channelset_rejects_nonfinite():
    h = np.ones((1, 1, 1), dtype=complex)
    h[0, 0, 0] = np.nan
    with pytest.raises(ConfigError):
        scenario.ChannelSet(h, 1.0)
