import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from persona_gauge import inference
from persona_gauge.bandit import BanditSpec, BanditTrajectory, ChoiceRecord, simulate_campaign
from persona_gauge.core import all_codes
from persona_gauge.inference import (
    DegenerateDesign,
    PosteriorState,
    ProbitFit,
    dimension_proportions,
    fit_events,
    fit_probit,
    init_posterior,
    is_separable,
    kalman_update,
    probit_loglik,
    regressors,
    replay_beliefs,
    std_normal_cdf,
)
from persona_gauge.policies import probit_policy, ucb_policy

FIXTURES = Path(__file__).parent / "fixtures"


# ---------------------------------------------------------------- Kalman

def test_init_posterior():
    assert init_posterior(BanditSpec()) == PosteriorState((0.0, 0.0), (100.0, 100.0))
    assert init_posterior(BanditSpec(mu0=(3, -3))).Q == (3.0, -3.0)
    assert init_posterior(BanditSpec(tau0=1)).var == (1.0, 1.0)


def test_kalman_single_update():
    s = kalman_update(PosteriorState((0.0, 0.0), (100.0, 100.0)), 0, 10.0, 100.0)
    assert s.Q == (5.0, 0.0) and s.var == (50.0, 100.0)


def test_kalman_zero_prediction_error():
    s0 = PosteriorState((2.0, 1.0), (10.0, 10.0))
    s = kalman_update(s0, 1, 1.0, 4.0)
    assert s.Q == s0.Q and s.var[1] < s0.var[1]


def test_kalman_two_updates_closed_form():
    s = PosteriorState((0.0, 0.0), (100.0, 100.0))
    for r in (3.0, -1.0):
        s = kalman_update(s, 0, r, 100.0)
    assert s.var[0] == pytest.approx(100 / 3, rel=1e-12)


def test_kalman_rejects_bad_arm():
    with pytest.raises(ValueError):
        kalman_update(PosteriorState((0.0, 0.0), (1.0, 1.0)), 2, 0.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(
    mu0=st.floats(-50, 50),
    tau0=st.floats(0.1, 50),
    tau=st.floats(0.1, 50),
    steps=st.lists(st.tuples(st.integers(0, 1), st.floats(-100, 100)), min_size=1, max_size=40),
)
def test_kalman_matches_conjugate_closed_form(mu0, tau0, tau, steps):
    state = PosteriorState((mu0, mu0), (tau0**2, tau0**2))
    for arm, r in steps:
        before = state
        state = kalman_update(state, arm, r, tau**2)
        other = 1 - arm
        assert state.var[arm] < before.var[arm]
        assert state.Q[other] == before.Q[other] and state.var[other] == before.var[other]
    for arm in (0, 1):
        rs = [r for a, r in steps if a == arm]
        var = 1.0 / (1.0 / tau0**2 + len(rs) / tau**2)
        mean = var * (mu0 / tau0**2 + math.fsum(rs) / tau**2)
        assert state.var[arm] == pytest.approx(var, rel=1e-9)
        assert state.Q[arm] == pytest.approx(mean, rel=1e-9, abs=1e-9 * (abs(mu0) + 100))


# ---------------------------------------------------------------- regressors

def test_regressors_examples():
    assert regressors(PosteriorState((1.0, 1.0), (4.0, 4.0)))[:2] == (0.0, 0.0)
    r = regressors(PosteriorState((5.0, 2.0), (25.0, 16.0)))
    assert r.V == 3.0 and r.RU == 1.0 and r.TU == math.sqrt(41)


def _trajectory(records):
    recs = [ChoiceRecord(*r) for r in records]
    spec = BanditSpec(trials_per_block=len({r.trial for r in recs}), blocks=len({r.block for r in recs}))
    return BanditTrajectory(spec, recs, {}, "TEST")


def test_replay_single_trial_prior_regressors():
    ev = replay_beliefs(_trajectory([(0, 0, 1, 4.2)]))
    assert len(ev) == 1 and (ev[0].V, ev[0].RU, ev[0].TU) == (0.0, 0.0, math.sqrt(200.0))


def test_replay_hand_block_matches_conjugate_recomputation():
    arms = [0, 0, 1, 0, 1, 1, 1, 0, 0, 1]
    rewards = [12.0, 7.5, -3.0, 10.25, 1.0, -0.5, 2.0, 9.0, 11.0, 0.0]
    recs = [(0, t, a, r) for t, (a, r) in enumerate(zip(arms, rewards))]
    ev = replay_beliefs(_trajectory(recs))
    assert len(ev) == 10
    for t, e in enumerate(ev):
        stats = []
        for arm in (0, 1):
            past = [r for a, r in zip(arms[:t], rewards[:t]) if a == arm]
            var = 1.0 / (1 / 100 + len(past) / 100)
            stats.append((var * sum(past) / 100, var))
        assert e.V == pytest.approx(stats[0][0] - stats[1][0], abs=1e-12)
        assert e.RU == pytest.approx(math.sqrt(stats[0][1]) - math.sqrt(stats[1][1]), abs=1e-12)
        assert e.TU == pytest.approx(math.sqrt(stats[0][1] + stats[1][1]), abs=1e-12)
        assert e.arm == arms[t]


def test_replay_first_update_has_half_learning_rate():
    # tau^2 == tau0^2, so the first update of an arm moves Q halfway to the reward
    ev = replay_beliefs(_trajectory([(0, 0, 0, 8.0), (0, 1, 1, -4.0), (0, 2, 0, 0.0)]))
    assert ev[1].V == 4.0
    assert ev[2].V == 4.0 - (-2.0)


def test_replay_resets_each_block_and_skips_flagged():
    recs = [ChoiceRecord(0, 0, 0, 50.0), ChoiceRecord(0, 1, 1, 1.0, flagged=True),
            ChoiceRecord(1, 0, 1, 3.0), ChoiceRecord(1, 1, 0, 2.0)]
    traj = BanditTrajectory(BanditSpec(trials_per_block=2, blocks=2), recs, {}, "T")
    ev = replay_beliefs(traj)
    assert [(e.block, e.trial) for e in ev] == [(0, 0), (1, 0), (1, 1)]
    assert ev[1].V == 0.0  # prior again at block 1
    assert ev[2].V == -1.5


def test_replay_full_campaign_event_count():
    traj = simulate_campaign(lambda s, rng: int(rng.integers(2)), BanditSpec(), 1)
    assert len(replay_beliefs(traj)) == 1000


# ---------------------------------------------------------------- normal CDF

def test_cdf_against_quadrature_fixture():
    d = np.load(FIXTURES / "cdf_oracle.npz")
    assert len(d["x"]) == 10_000 and np.max(np.abs(d["x"])) <= 8
    assert np.max(np.abs(std_normal_cdf(d["x"]) - d["phi"])) <= 1e-12
    scalar = np.array([std_normal_cdf(float(x)) for x in d["x"][::97]])
    assert np.max(np.abs(scalar - d["phi"][::97])) <= 1e-12


def test_cdf_known_values():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(1.96) == pytest.approx(0.975002105, abs=5e-10)
    assert 0.0 <= std_normal_cdf(-40.0) < 1e-300 and std_normal_cdf(40.0) == 1.0
    assert std_normal_cdf(float("inf")) == 1.0


@given(st.floats(-40, 40), st.floats(-40, 40))
def test_cdf_symmetry_and_monotonicity(x, y):
    assert abs(std_normal_cdf(x) + std_normal_cdf(-x) - 1.0) <= 1e-12
    lo, hi = min(x, y), max(x, y)
    assert std_normal_cdf(lo) <= std_normal_cdf(hi)
    assert 0.0 <= std_normal_cdf(x) <= 1.0


def test_cdf_tamper_is_detected(monkeypatch):
    d = np.load(FIXTURES / "cdf_oracle.npz")
    monkeypatch.setattr(inference, "_INV_SQRT2", 0.7071)
    assert np.max(np.abs(std_normal_cdf(d["x"]) - d["phi"])) > 1e-6


# ---------------------------------------------------------------- probit fit

def _simulate(w1, w2, seed, blocks=1000):
    traj = simulate_campaign(lambda s, rng: probit_policy(w1, w2, s, rng), BanditSpec(blocks=blocks), seed)
    return replay_beliefs(traj)


def test_fit_recovers_generator():
    fit = fit_events(_simulate(0.5, 0.3, 7))
    assert fit.converged and not fit.ridge_used and fit.n_events == 10_000
    assert abs(fit.w1 - 0.5) <= 0.05 and abs(fit.w2 - 0.3) <= 0.05
    assert fit.grad_norm <= 1e-8


def test_fit_null_generator():
    fit = fit_events(_simulate(0.0, 0.0, 8))
    assert abs(fit.w1) <= 0.05 and abs(fit.w2) <= 0.05


def test_fit_is_a_local_maximum_and_order_invariant():
    ev = _simulate(0.4, 0.2, 3, blocks=300)
    rows = np.array([(e.V, e.RU, float(e.arm == 0)) for e in ev])
    fit = fit_probit(rows)
    X, y = rows[:, :2], rows[:, 2]
    best = probit_loglik([fit.w1, fit.w2], X, y)[0]
    assert best == pytest.approx(fit.log_likelihood)
    assert best >= probit_loglik([0.0, 0.0], X, y)[0]
    for dw in ([1e-3, 0], [-1e-3, 0], [0, 1e-3], [0, -1e-3]):
        assert best >= probit_loglik(np.array([fit.w1, fit.w2]) + dw, X, y)[0]
    shuffled = fit_probit(np.random.default_rng(0).permutation(rows))
    assert shuffled.w1 == pytest.approx(fit.w1, abs=1e-9)
    assert shuffled.w2 == pytest.approx(fit.w2, abs=1e-9)


def test_loglik_gradient_and_hessian_match_finite_differences():
    rng = np.random.default_rng(4)
    X = rng.normal(0, 3, (200, 2))
    y = (rng.random(200) < 0.4).astype(float)
    w = np.array([0.3, -0.2])
    ll, g, H = probit_loglik(w, X, y, ridge=0.1)
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        lp, gp, _ = probit_loglik(w + e, X, y, ridge=0.1)
        lm, gm, _ = probit_loglik(w - e, X, y, ridge=0.1)
        assert g[i] == pytest.approx((lp - lm) / (2 * h), rel=1e-5)
        assert H[:, i] == pytest.approx((gp - gm) / (2 * h), rel=1e-5)


def test_ucb_trajectories_take_ridge_path_with_positive_weights():
    traj = simulate_campaign(lambda s, rng: ucb_policy(s.Q, s.sigma, 1.0), BanditSpec(blocks=100), 2)
    fit = fit_events(replay_beliefs(traj))
    assert fit.ridge_used and fit.w1 > 0 and fit.w2 > 0


def test_single_class_uses_ridge():
    rows = [(1.0, 0.5, 1.0), (-2.0, 0.1, 1.0), (0.3, -1.0, 1.0)]
    fit = fit_probit(rows)
    assert fit.ridge_used and fit.converged


def test_separable_detection():
    X = np.array([[1.0, 0.0], [2.0, 1.0], [-1.0, 0.5], [-3.0, -1.0], [0.0, 0.0]])
    y = np.array([1.0, 1.0, 0.0, 0.0, 1.0])
    assert is_separable(X, y)
    # x and -x with the same label cannot be split by a line through the origin
    assert not is_separable(np.array([[1.0, 0.5], [-1.0, -0.5], [0.2, 2.0]]), np.array([1.0, 1.0, 0.0]))


def test_degenerate_design():
    with pytest.raises(DegenerateDesign):
        fit_probit([(0.0, 0.0, 1.0), (0.0, 0.0, 0.0)])
    with pytest.raises(ValueError):
        fit_probit([(1.0, 0.0, 1.0)])


# ---------------------------------------------------------------- dimension proportions

def _fit(w1, w2):
    return ProbitFit(w1, w2, True, -1.0, 100, False)


def test_identical_fits_give_half():
    fits = {str(c): _fit(0.4, 0.3) for c in all_codes()}
    for d in dimension_proportions(fits).values():
        for split in (d.exploitation, d.exploration):
            assert split.valid and split.proportion_a == 0.5 and split.proportion_b == 0.5


def test_hand_set_coefficient_table():
    # w2 = 0.1 * (number of E/S/T/J letters) + 0.1; w1 = 0.2 for all
    fits = {}
    for c in all_codes():
        k = sum(l in "ESTJ" for l in str(c))
        fits[str(c)] = _fit(0.2, 0.1 * k + 0.1)
    d = dimension_proportions(fits)["attitude"]
    # E group: 1 + mean of the other three letters' count (1.5) -> mean 0.1*2.5+0.1 = 0.35; I: 0.25
    assert d.exploration.group_a_mean == pytest.approx(0.35)
    assert d.exploration.group_b_mean == pytest.approx(0.25)
    assert d.exploration.proportion_a == pytest.approx(0.35 / 0.6)
    assert d.exploration.proportion_a + d.exploration.proportion_b == pytest.approx(1.0)
    assert d.exploitation.proportion_a == 0.5


def test_nonpositive_means_are_invalid():
    fits = {str(c): _fit(0.4, -0.1 if str(c)[0] == "E" else 0.2) for c in all_codes()}
    d = dimension_proportions(fits)["attitude"]
    assert not d.exploration.valid and d.exploration.proportion_a is None
    assert d.exploration.group_a_mean == pytest.approx(-0.1)
    assert d.exploitation.valid
