from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from favorsim.radio import LinkRates
from favorsim.scheduler import (ConvergenceWarning, InfeasibleUtilityError, kkt_violation,
                                optimize_weights, solve_states, utility)

from oracles import pf_grid_oracle, pf_grid_oracle_full


def _lr(c, active=None):
    c = np.asarray(c, dtype=float)
    return LinkRates(c, np.ones(c.shape[1], bool) if active is None else np.asarray(active))


def test_single_user_takes_everything():
    c = [[3e6, 1e6, 2e6]]
    w, u = optimize_weights(_lr(c))
    np.testing.assert_allclose(w, 1.0)
    assert u.value == pytest.approx(np.log(6e6))


def test_identical_users_split_evenly():
    w, _ = optimize_weights(_lr([[5e6], [5e6]]))
    np.testing.assert_allclose(w, 0.5, atol=1e-9)


def test_two_by_two_identity_assignment():
    c = np.array([[2.0, 1.0], [1.0, 2.0]]) * 1e6
    w, u = optimize_weights(_lr(c))
    np.testing.assert_allclose(w, np.eye(2), atol=1e-9)
    assert u.value == pytest.approx(2 * np.log(2e6), abs=1e-9)
    assert u.value == pytest.approx(pf_grid_oracle(c), abs=1e-3)


def test_utility_examples():
    assert utility(np.zeros((0, 2)), _lr(np.zeros((0, 2)))).value == 0.0
    assert utility([[1.0]], _lr([[1e6]])).value == pytest.approx(13.8155, abs=1e-4)
    with pytest.raises(InfeasibleUtilityError):
        utility([[0.0, 1.0]], _lr([[1e6, 0.0]]))


@given(st.floats(1e-3, 1e3))
def test_rate_scaling_adds_log(alpha):
    c = np.array([[2e6, 1e6], [1e6, 3e6], [4e6, 4e6]])
    w = np.full((3, 2), 1 / 3)
    base = utility(w, _lr(c)).value
    assert utility(w, _lr(alpha * c)).value == pytest.approx(base + 3 * np.log(alpha), abs=1e-9)


def test_zero_rate_user_is_infeasible():
    with pytest.raises(InfeasibleUtilityError):
        optimize_weights(_lr([[1e6, 1e6], [0.0, 0.0]]))


def test_convergence_warning_on_tiny_budget():
    rng = np.random.default_rng(3)
    c = rng.uniform(1, 10, size=(6, 3)) * 1e6
    with pytest.warns(ConvergenceWarning):
        w, u = optimize_weights(_lr(c), tolerance=1e-12, max_iters=1)
    assert np.isfinite(u.value)


def _random_instance(rng, max_users=6, max_carriers=4):
    n = int(rng.integers(1, max_users + 1))
    m = int(rng.integers(1, max_carriers + 1))
    c = rng.uniform(0.1, 10, size=(n, m)) * 1e6
    c[rng.random((n, m)) < 0.2] = 0.0
    c[:, -1] = np.maximum(c[:, -1], 1e5)  # an always-usable carrier, like the dedicated one
    return c


def _group_sums(w, groups, active):
    out = []
    for g in np.unique(groups):
        out.append(w[groups == g][:, active].sum(axis=0))
    return np.concatenate(out)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_feasibility_kkt_and_improvement(seed, grouped):
    rng = np.random.default_rng(seed)
    c = _random_instance(rng)
    n, m = c.shape
    active = np.ones(m, bool)
    if m > 1:
        active[: int(rng.integers(0, m))] = False
    c[:, ~active] = 0.0
    groups = rng.integers(0, 2, size=n) if grouped else np.zeros(n, int)
    lr = _lr(c, active)
    with warnings.catch_warnings():
        warnings.simplefilter("error", ConvergenceWarning)
        w, u = optimize_weights(lr, groups)
    assert np.all(w >= 0)
    np.testing.assert_allclose(_group_sums(w, groups, active), 1.0, atol=1e-9)
    assert np.all(w[:, ~active] == 0)
    assert kkt_violation(w, lr, groups) <= 1e-3
    # never worse than the equal split it starts from
    sizes = np.bincount(groups)[groups]
    w0 = np.where(active[None, :], 1.0 / sizes[:, None], 0.0)
    assert u.value >= utility(w0, lr).value - 1e-12


def test_matches_grid_oracle_on_small_instances():
    rng = np.random.default_rng(2024)
    for _ in range(25):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 3))
        c = rng.uniform(0.5, 10, size=(n, m)) * 1e6
        _, u = optimize_weights(_lr(c))
        assert u.value == pytest.approx(pf_grid_oracle(c), abs=1e-3)


def test_solve_states_matches_individual_solves():
    rng = np.random.default_rng(5)
    c = rng.uniform(1, 10, size=(3, 4, 3)) * 1e6
    active = np.ones((3, 3), bool)
    active[2, 0] = False
    c[2, :, 0] = 0.0
    groups = np.array([0, 0, 1, 1])
    u, r = solve_states(c, active, groups)
    for s in range(3):
        _, ref = optimize_weights(_lr(c[s], active[s]), groups)
        assert u[s] == pytest.approx(ref.value, abs=1e-9)
        np.testing.assert_allclose(r[s], ref.per_user_rates, rtol=1e-9)


def test_waterfilling_oracle_agrees_with_plain_grid():
    rng = np.random.default_rng(11)
    for _ in range(10):
        c = rng.uniform(0.5, 10, size=(2, 2)) * 1e6
        closed = pf_grid_oracle(c)
        plain = pf_grid_oracle_full(c)
        assert plain <= closed + 1e-12
        assert closed - plain < 1e-5
