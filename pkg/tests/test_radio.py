from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from favorsim.deployment import Layout, PathlossModel, UserDrop, build_snapshot, generate_snapshot
from favorsim.radio import (AllocationState, InvalidQueryError, RadioParams, full_rate,
                            link_rates, noise_power_per_cc, sinr, state_rates)


def _watt_to_dbm(w):
    return 10 * np.log10(w) + 30


def test_default_noise_power():
    n = noise_power_per_cc(RadioParams())
    assert _watt_to_dbm(n) == pytest.approx(-90.99, abs=0.01)
    assert n == pytest.approx(7.96e-13, rel=1e-3)


def test_noise_identity_and_bandwidth_doubling():
    assert _watt_to_dbm(noise_power_per_cc(RadioParams(noise_figure_db=0, cc_bandwidth=1))) == \
        pytest.approx(-174.0)
    a = noise_power_per_cc(RadioParams())
    b = noise_power_per_cc(RadioParams(cc_bandwidth=40e6))
    assert _watt_to_dbm(b) - _watt_to_dbm(a) == pytest.approx(3.0103, abs=1e-4)


@pytest.mark.parametrize("gamma, rate", [(2.0, 20e6), (0.0, 0.0), (6.0, 40e6)])
def test_full_rate_examples(gamma, rate):
    assert full_rate(gamma, RadioParams()) == pytest.approx(rate)


def _single_bs_snapshot(user=(20.0, 20.0)):
    layout = Layout(bs_positions={"A": ((10.0, 20.0),), "B": ((30.0, 20.0),)})
    drops = {"A": UserDrop("A", np.array([user])), "B": UserDrop("B", np.zeros((0, 2)))}
    return build_snapshot(drops, layout)


def test_dedicated_carrier_sinr_is_snr():
    snap = _single_bs_snapshot()
    p = RadioParams(pool_size=2)
    expected = p.tx_power * snap.gains["A"][0, 0] / noise_power_per_cc(p)
    assert sinr(0, 2, snap, "A", AllocationState.default(2), p) == pytest.approx(expected)


def test_unit_sinr_when_signal_equals_noise():
    p = RadioParams(pool_size=1)
    n0 = noise_power_per_cc(p)
    # choose a distance where the received power equals the noise power
    d = (p.tx_power * 1e-4 / n0) ** (1 / 3.7)
    layout = Layout(bs_positions={"A": ((0.0, 0.0),), "B": ((50.0, 50.0),)})
    drops = {"A": UserDrop("A", np.array([[d, 0.0]])), "B": UserDrop("B", np.zeros((0, 2)))}
    snap = build_snapshot(drops, layout)
    assert sinr(0, 1, snap, "A", AllocationState.default(1), p) == pytest.approx(1.0, rel=1e-9)


def test_vacated_pool_carrier_matches_dedicated():
    snap = _single_bs_snapshot()
    p = RadioParams(pool_size=2)
    alloc = AllocationState.vacated(2, "B", 1)
    assert sinr(0, 0, snap, "A", alloc, p) == pytest.approx(sinr(0, 2, snap, "A", alloc, p))
    assert sinr(0, 1, snap, "A", alloc, p) < sinr(0, 2, snap, "A", alloc, p)


def test_inactive_carrier_query_raises():
    snap = _single_bs_snapshot()
    p = RadioParams(pool_size=2)
    with pytest.raises(InvalidQueryError):
        sinr(0, 0, snap, "A", AllocationState.vacated(2, "A", 1), p)


def _scalar_rates(snap, op, alloc, p):
    K = p.pool_size
    c = np.zeros((snap.n_users(op), K + 1))
    for u in range(snap.n_users(op)):
        for k in range(K + 1):
            if k == K or k in alloc.pool(op):
                c[u, k] = full_rate(sinr(u, k, snap, op, alloc, p), p)
    return c


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_link_rates_match_scalar_sinr_and_state_stack(seed, K):
    p = RadioParams(pool_size=K)
    snap = generate_snapshot({"A": 4, "B": 4}, Layout(), PathlossModel(), seed)
    c_states, active = state_rates(snap, "A", p)
    allocs = ([AllocationState.default(K)]
              + [AllocationState.vacated(K, "B", k) for k in range(1, K + 1)]
              + [AllocationState.vacated(K, "A", k) for k in range(1, K + 1)])
    for s, alloc in enumerate(allocs):
        lr = link_rates(snap, "A", alloc, p)
        np.testing.assert_allclose(lr.c, _scalar_rates(snap, "A", alloc, p), rtol=1e-12)
        np.testing.assert_allclose(c_states[s], lr.c, rtol=1e-12)
        np.testing.assert_array_equal(active[s], lr.active)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.data())
def test_interference_monotonicity(seed, K, data):
    p = RadioParams(pool_size=K)
    k = data.draw(st.integers(1, K))
    snap = generate_snapshot({"A": 5, "B": 5}, Layout(), PathlossModel(), seed)
    base = link_rates(snap, "A", AllocationState.default(K), p)
    freed = link_rates(snap, "A", AllocationState.vacated(K, "B", k), p)
    assert np.all(freed.c >= base.c)
    # dedicated carrier does not depend on the allocation
    np.testing.assert_array_equal(freed.c[:, K], base.c[:, K])
    own_cut = link_rates(snap, "A", AllocationState.vacated(K, "A", k), p)
    np.testing.assert_array_equal(own_cut.c[:, K], base.c[:, K])


@given(st.floats(1e-3, 1e3))
def test_sinr_homogeneous(scale):
    snap = _single_bs_snapshot((22.0, 27.0))
    p = RadioParams(pool_size=1)
    ref = sinr(0, 0, snap, "A", AllocationState.default(1), p)
    db = 10 * np.log10(scale)
    scaled = RadioParams(pool_size=1, tx_power_dbm=p.tx_power_dbm + db,
                         noise_density_dbm_hz=p.noise_density_dbm_hz + db)
    assert sinr(0, 0, snap, "A", AllocationState.default(1), scaled) == pytest.approx(ref, rel=1e-9)
