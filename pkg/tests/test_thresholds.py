from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from favorsim.gainloss import SampleStore
from favorsim.thresholds import (OpponentStats, SolverConfig, ThresholdSet, constraint_residual,
                                 excess_utility, excess_utility_factored, p_ask, p_grant,
                                 solve_thresholds)

from oracles import (exponential_stores, monte_carlo_excess, symmetric_fixed_point,
                     threshold_grid_oracle)

INF = np.inf


def _stores(direction, *sample_lists):
    return [SampleStore("A", direction, k, list(s)) for k, s in enumerate(sample_lists, start=1)]


def test_p_ask_examples():
    g = _stores("gain", [0.5, 1.5], [1.0, 3.0])
    np.testing.assert_array_equal(p_ask(ThresholdSet([INF, INF], [0, 0]), g), [0, 0])
    np.testing.assert_array_equal(p_ask(ThresholdSet([0.1, 5.0], [0, 0]), g), [1, 0])
    assert p_ask(ThresholdSet([1.0, 2.0], [0, 0]), g)[0] == pytest.approx(0.25)


def test_p_grant_examples():
    g = _stores("gain", [1.0, 3.0])
    l = _stores("loss", [0.5, 2.0])
    assert p_grant(ThresholdSet([INF], [0.0]), g, l)[0] == 0.0
    assert p_grant(ThresholdSet([INF], [INF]), g, l)[0] == 1.0
    assert p_grant(ThresholdSet([2.0], [1.0]), g, l)[0] == pytest.approx(0.25)


def test_constraint_residual_examples():
    opp = OpponentStats([0.2], [0.4])
    assert constraint_residual([0.5], [0.5], opp) == pytest.approx(0.1)
    sym = OpponentStats([0.1, 0.2], [0.3, 0.6])
    assert constraint_residual(sym.p_ask, sym.p_grant, sym) == pytest.approx(0.0, abs=1e-15)
    none = OpponentStats([0.0, 0.0], [0.0, 0.0])
    assert constraint_residual([0, 0], [0, 0], none) == 0.0


def test_opponent_stats_validation():
    with pytest.raises(ValueError):
        OpponentStats([0.7, 0.5], [0.5, 0.5])
    with pytest.raises(ValueError):
        OpponentStats([0.1], [1.2])


@given(st.lists(st.floats(0, 10), min_size=1, max_size=30),
       st.lists(st.floats(0, 20), min_size=1, max_size=30),
       st.floats(0, 12), st.floats(0, 25))
def test_ask_sizes_and_idle_partition(g1, g2, t1, t2):
    gains = _stores("gain", g1, g2)
    thr = ThresholdSet([t1, t2], [0, 0])
    idle = gains[0].cdf_at(t1) * gains[1].cdf_at(t2)
    assert p_ask(thr, gains).sum() + idle == pytest.approx(1.0, abs=1e-12)


def test_excess_utility_trivial_cases():
    g, l = exponential_stores(2, n=2000)
    opp = OpponentStats([0.2, 0.1], [0.5, 0.4])
    assert excess_utility(ThresholdSet.no_trade(2), g, l, opp) == 0.0
    assert excess_utility_factored(ThresholdSet.no_trade(2), g, l,
                                   OpponentStats([0.2, 0.1], [0.5, 0.4])) == 0.0
    takes_only = OpponentStats([0.0, 0.0], [1.0, 1.0])
    val = excess_utility(ThresholdSet([0.5, 1.0], [0.3, 0.6]), g, l, takes_only)
    assert val > 0


def test_excess_utility_matches_monte_carlo():
    g, l = exponential_stores(1, n=100_000, seed=3)
    thr = ThresholdSet([1.2], [0.6])
    opp = OpponentStats([0.3], [0.3])
    exact = excess_utility(thr, g, l, opp)
    mc = monte_carlo_excess(thr.theta, thr.lam, g, l, opp.p_ask, opp.p_grant)
    assert exact == pytest.approx(mc, rel=0.01)


def test_excess_utility_matches_monte_carlo_two_sizes():
    g, l = exponential_stores(2, n=100_000, seed=4)
    thr = ThresholdSet([1.1, 2.5], [0.5, 1.0])
    opp = OpponentStats([0.2, 0.15], [0.6, 0.4])
    exact = excess_utility(thr, g, l, opp)
    mc = monte_carlo_excess(thr.theta, thr.lam, g, l, opp.p_ask, opp.p_grant)
    assert exact == pytest.approx(mc, rel=0.01)


def test_factored_form_preconditions():
    g, l = exponential_stores(2, n=1000)
    opp = OpponentStats([0.2, 0.1], [0.5, 0.4])
    with pytest.raises(ValueError):
        excess_utility_factored(ThresholdSet([1.0, 2.0], [0.5, 1.5]), g, l, opp)
    with pytest.raises(ValueError):  # lambda scaled but constraint violated
        excess_utility_factored(ThresholdSet([0.1, 0.2], [0.5, 1.0]), g, l, opp)


def test_degenerate_opponent_gives_no_trade():
    g, l = exponential_stores(2, n=1000)
    rep = solve_thresholds(g, l, OpponentStats([0.2, 0.1], [0.0, 0.0]))
    assert rep.thresholds.is_no_trade()
    assert rep.chosen.excess == 0.0
    assert rep.degenerate_from == 1


def test_partially_degenerate_opponent_blocks_larger_sizes():
    g, l = exponential_stores(2, n=5000)
    rep = solve_thresholds(g, l, OpponentStats([0.2, 0.1], [0.6, 0.0]))
    assert rep.degenerate_from == 2
    assert rep.thresholds.theta[1] == INF


@pytest.fixture(scope="module")
def exponential_fixture():
    g, l = exponential_stores(2, n=100_000, seed=0)
    rep, opp = symmetric_fixed_point(g, l)
    return g, l, rep, opp


def test_solver_on_exponential_fixture(exponential_fixture):
    g, l, rep, opp = exponential_fixture
    assert rep.interior
    thr = rep.thresholds
    assert np.all(thr.lam == np.arange(1, 3) * thr.lam[0])
    assert np.all(thr.theta > thr.lam)
    assert abs(rep.chosen.residual) <= 1e-3
    best, _ = threshold_grid_oracle(g, l, opp.p_ask, opp.p_grant)
    assert rep.chosen.excess >= best * (1 - 0.02)


def test_appendix_identity_on_exponential_fixture(exponential_fixture):
    g, l, rep, opp = exponential_fixture
    views = [s.interpolated() for s in g], [s.interpolated() for s in l]
    direct = excess_utility(rep.thresholds, *views, opp)
    factored = excess_utility_factored(rep.thresholds, *views, opp)
    assert factored == pytest.approx(direct, rel=1e-6)
    assert direct > 0


@st.composite
def solver_inputs(draw):
    K = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    scale_g = draw(st.floats(0.5, 3.0))
    scale_l = draw(st.floats(0.5, 3.0))
    n = 400
    gains = _stores("gain", *[k * scale_g * rng.exponential(1.0, n) for k in range(1, K + 1)])
    losses = _stores("loss", *[k * scale_l * rng.gamma(2.0, 0.5, n) for k in range(1, K + 1)])
    pa = rng.dirichlet(np.ones(K + 1))[:K] * draw(st.floats(0.05, 1.0))
    pg = rng.uniform(0.05, 1.0, K)
    return gains, losses, OpponentStats(pa, pg)


@settings(max_examples=40, deadline=None)
@given(solver_inputs())
def test_solver_structure(inputs):
    gains, losses, opp = inputs
    rep = solve_thresholds(gains, losses, opp)
    K = len(gains)
    for cand in rep.candidates:
        lam = cand.thresholds.lam
        if not cand.thresholds.is_no_trade():
            assert np.all(lam == np.arange(1, K + 1) * lam[0])
        if cand.kind == "interior":
            assert np.all(cand.thresholds.theta > lam)
    assert rep.chosen.feasible and abs(rep.chosen.residual) <= 1e-3
    assert rep.chosen.excess == max(c.excess for c in rep.candidates if c.feasible)
    assert rep.chosen.excess >= 0
    if rep.interior:
        views = [s.interpolated() for s in gains], [s.interpolated() for s in losses]
        direct = excess_utility(rep.thresholds, *views, opp)
        factored = excess_utility_factored(rep.thresholds, *views, opp)
        assert factored == pytest.approx(direct, rel=1e-6)
        assert direct > 0


def test_empirical_estimator_option():
    g, l = exponential_stores(2, n=20_000, seed=9)
    opp = OpponentStats([0.15, 0.1], [0.8, 0.7])
    rep = solve_thresholds(g, l, opp, SolverConfig(estimator="empirical"))
    assert rep.estimator == "empirical"
    assert abs(rep.chosen.residual) <= 1e-3
    with pytest.raises(ValueError):
        solve_thresholds(g, l, opp, SolverConfig(estimator="kernel"))
