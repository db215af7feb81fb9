"""Offline oracle checks of the estimators, metrics and scorers."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .adaptability import flexibility, stability
from .bandit import BanditSpec, simulate_campaign
from .core import load_personas
from .gateway import AgentHandle
from .inference import PosteriorState, fit_events, kalman_update, replay_beliefs, std_normal_cdf
from .policies import ConstantPolicy, OracleMcqPolicy, probit_policy, ucb_policy
from .reasoning import accuracy_by_category, load_mmlu, run_reasoning
from .safety import administer, load_inventory, score_sd3

__all__ = ["CheckResult", "CHECKS", "run_selftest"]

# Phi(x) by 50-digit mpmath quadrature, rounded to double
CDF_REFERENCE = (
    (-8.0, 6.220960574271784e-16),
    (-5.0, 2.866515718791939e-07),
    (-2.5, 0.006209665325776135),
    (-1.0, 0.15865525393145705),
    (-0.3, 0.3820885778110474),
    (0.0, 0.5),
    (0.7, 0.758036347776927),
    (1.5, 0.9331927987311419),
    (3.0, 0.9986501019683699),
    (6.0, 0.9999999990134123),
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def check_kalman() -> CheckResult:
    """Recursive updates against the conjugate closed form for random sequences."""
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(200):
        tau0, tau = rng.uniform(0.5, 20.0, 2)
        mu0 = rng.normal(0.0, 5.0)
        state = PosteriorState((mu0, mu0), (tau0**2, tau0**2))
        arms = rng.integers(0, 2, rng.integers(1, 30))
        rewards = rng.normal(0.0, 10.0, len(arms))
        for a, r in zip(arms, rewards):
            state = kalman_update(state, int(a), float(r), tau**2)
        for arm in (0, 1):
            rs = rewards[arms == arm]
            prec = 1.0 / tau0**2 + len(rs) / tau**2
            var = 1.0 / prec
            mean = var * (mu0 / tau0**2 + rs.sum() / tau**2)
            worst = max(worst, abs(state.var[arm] - var) / var,
                        abs(state.Q[arm] - mean) / max(abs(mean), 1e-300))
    return CheckResult("kalman-closed-form", worst <= 1e-9, f"max relative error {worst:.2e}")


def check_cdf() -> CheckResult:
    err = max(abs(std_normal_cdf(x) - ref) for x, ref in CDF_REFERENCE)
    return CheckResult("normal-cdf", err <= 1e-12, f"max abs error {err:.2e}")


def _simulated_fit(w1: float, w2: float, seed: int, blocks: int = 1000):
    spec = BanditSpec(blocks=blocks)
    traj = simulate_campaign(lambda s, rng: probit_policy(w1, w2, s, rng), spec, seed)
    return fit_events(replay_beliefs(traj))


def check_probit_recovery() -> CheckResult:
    fits = [_simulated_fit(0.5, 0.3, seed) for seed in range(3)]
    ok = all(abs(f.w1 - 0.5) <= 0.05 and abs(f.w2 - 0.3) <= 0.05 and not f.ridge_used for f in fits)
    null = _simulated_fit(0.0, 0.0, 99)
    ok = ok and abs(null.w1) <= 0.05 and abs(null.w2) <= 0.05
    detail = ", ".join(f"({f.w1:.3f}, {f.w2:.3f})" for f in fits) + f"; null ({null.w1:.3f}, {null.w2:.3f})"
    return CheckResult("probit-recovery", ok, detail)


def check_ridge_separable() -> CheckResult:
    """A deterministic UCB agent gives separable data; the ridge fit must recover its direction."""
    beta = 0.6
    spec = BanditSpec(blocks=300)
    traj = simulate_campaign(lambda s, rng: ucb_policy(s.Q, s.sigma, beta), spec, 5)
    fit = fit_events(replay_beliefs(traj))
    w = np.array([fit.w1, fit.w2])
    truth = np.array([1.0, beta])
    err = float(np.max(np.abs(w / np.linalg.norm(w) - truth / np.linalg.norm(truth))))
    return CheckResult("ridge-separable", fit.ridge_used and err <= 0.05,
                       f"ridge_used={fit.ridge_used}, direction error {err:.3f}")


def check_adaptability_metrics() -> CheckResult:
    grid = [["A", "B", "A"], ["A", "C", "C"]]
    f, s = flexibility(grid), stability(grid)
    const = [["X"] * 5] * 7
    distinct = [[f"{p}{b}" for b in range(5)] for p in range(7)]
    bounds = [(flexibility(const), 1 / 5), (stability(const), 6 / 7),
              (flexibility(distinct), 1.0), (stability(distinct), 0.0)]
    ok = f == 2 / 3 and s == 1 / 6 and all(math.isclose(a, b, abs_tol=1e-15) for a, b in bounds)
    return CheckResult("flexibility-stability", ok, f"fixture flex={f!r} stab={s!r}")


def _sample_items():
    return load_mmlu(Path(str(resources.files("persona_gauge.data").joinpath("mmlu_sample"))))


def check_oracle_mmlu() -> CheckResult:
    items = _sample_items()
    agent = AgentHandle(load_personas()["INTJ"], policy=OracleMcqPolicy.from_items(items))
    acc = accuracy_by_category(run_reasoning(agent, items))
    worst = min(a.accuracy for a in acc.values())
    return CheckResult("oracle-mmlu", worst == 1.0 and len(acc) == 4,
                       f"{len(acc)} categories, min accuracy {worst}")


def check_sd3_neutral() -> CheckResult:
    inventory = load_inventory()
    agent = AgentHandle(load_personas()["ESFP"], policy=ConstantPolicy(safety="neither agree nor disagree"))
    responses = administer(agent, inventory)
    scores = score_sd3({r.index: r.value for r in responses}, inventory)
    ok = (scores.machiavellianism, scores.narcissism, scores.psychopathy) == (3.0, 3.0, 3.0)
    return CheckResult("sd3-neutral", ok, f"scores {scores.as_dict()}")


CHECKS: tuple[Callable[[], CheckResult], ...] = (
    check_kalman,
    check_cdf,
    check_probit_recovery,
    check_ridge_separable,
    check_adaptability_metrics,
    check_oracle_mmlu,
    check_sd3_neutral,
)


def run_selftest(out=print) -> list[CheckResult]:
    results = []
    for check in CHECKS:
        t0 = time.perf_counter()
        try:
            r = check()
        except Exception as exc:  # a crashing check is a failing check
            r = CheckResult(check.__name__.removeprefix("check_"), False, f"{type(exc).__name__}: {exc}")
        r = CheckResult(r.name, r.passed, r.detail, time.perf_counter() - t0)
        out(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<24} {r.detail}  [{r.seconds:.2f}s]")
        results.append(r)
    return results
