"""
Scripted agents.

A scripted policy reads the same rendered task prompt a language model would
see and answers in the textual format that prompt asks for, so the task
parsers run identically for both kinds of agent.  Policies are pure functions
of ``(prompt, rng)``: decisions never depend on persona text.
"""

from __future__ import annotations

import hashlib
from typing import Any, Mapping, Sequence

import numpy as np

from . import prompts
from .inference import PosteriorState, kalman_update, regressors, std_normal_cdf

__all__ = [
    "ConstantPolicy",
    "CompositePolicy",
    "CyclePolicy",
    "HabitPolicy",
    "OracleMcqPolicy",
    "ProbitPolicy",
    "RandomPolicy",
    "ReplayPolicy",
    "ScriptedPolicy",
    "UcbPolicy",
    "make_policy",
    "probit_policy",
    "ucb_policy",
]

LIKERT_REPLIES = ("disagree", "slightly disagree", "neither agree nor disagree", "slightly agree", "agree")


def ucb_policy(Q: Sequence[float], sigma: Sequence[float], beta: float) -> int:
    """Arm maximizing ``Q + beta * sigma``; ties go to arm 0."""
    if len(Q) != 2 or len(sigma) != 2:
        raise ValueError("ucb_policy is defined for two arms")
    u0 = Q[0] + beta * sigma[0]
    u1 = Q[1] + beta * sigma[1]
    return 0 if u0 >= u1 else 1


def probit_policy(w1: float, w2: float, state: PosteriorState, rng: np.random.Generator) -> int:
    """Sample arm 0 with probability ``Phi(w1*V + w2*RU)``."""
    r = regressors(state)
    p0 = std_normal_cdf(w1 * r.V + w2 * r.RU)
    return 0 if rng.random() < p0 else 1


def _pair(x) -> tuple[float, float]:
    if np.ndim(x) == 0:
        return (float(x), float(x))
    a, b = x
    return (float(a), float(b))


def beliefs_from_histories(histories, mu0=0.0, tau0=10.0, tau=10.0) -> PosteriorState:
    mu0, tau0, tau = _pair(mu0), _pair(tau0), _pair(tau)
    state = PosteriorState(Q=mu0, var=(tau0[0] ** 2, tau0[1] ** 2))
    for arm, rewards in enumerate(histories):
        for r in rewards:
            state = kalman_update(state, arm, r, tau[arm] ** 2)
    return state


class ScriptedPolicy:
    policy_id = "scripted"

    def respond(self, prompt: str, rng: np.random.Generator) -> str:
        raise NotImplementedError

    def params(self) -> dict:
        return {}


class RandomPolicy(ScriptedPolicy):
    """Uniformly random answers for every task."""

    policy_id = "random"

    def respond(self, prompt, rng):
        task = prompts.detect_task(prompt)
        if task == "bandit":
            return str(int(rng.integers(2)))
        if task == "adaptability":
            _, _, cands = prompts.parse_adaptability(prompt)
            return cands[int(rng.integers(len(cands)))]
        if task == "reasoning":
            return prompts.LETTERS[int(rng.integers(4))]
        return "1. " + LIKERT_REPLIES[int(rng.integers(5))]


class ConstantPolicy(ScriptedPolicy):
    """Fixed reply per task, e.g. ``{"bandit": "0", "reasoning": "A"}``."""

    policy_id = "constant"

    def __init__(self, answers: Mapping[str, str] | None = None, **kw):
        self.answers = dict(answers or {}, **kw)

    def respond(self, prompt, rng):
        task = prompts.detect_task(prompt)
        try:
            return str(self.answers[task])
        except KeyError:
            raise ValueError(f"constant policy has no answer for task {task!r}") from None

    def params(self):
        return {"answers": dict(self.answers)}


class _BanditPolicy(ScriptedPolicy):
    def __init__(self, mu0=0.0, tau0=10.0, tau=10.0):
        self.mu0, self.tau0, self.tau = _pair(mu0), _pair(tau0), _pair(tau)

    def state_from(self, prompt) -> PosteriorState:
        histories, _, _ = prompts.parse_bandit(prompt)
        return beliefs_from_histories(histories, self.mu0, self.tau0, self.tau)

    def params(self):
        return {"mu0": list(self.mu0), "tau0": list(self.tau0), "tau": list(self.tau)}


class UcbPolicy(_BanditPolicy):
    policy_id = "ucb"

    def __init__(self, beta: float = 1.0, **prior):
        super().__init__(**prior)
        self.beta = float(beta)

    def respond(self, prompt, rng):
        s = self.state_from(prompt)
        return str(ucb_policy(s.Q, s.sigma, self.beta))

    def params(self):
        return dict(super().params(), beta=self.beta)


class ProbitPolicy(_BanditPolicy):
    """Bandit agent whose choices follow the probit choice model exactly."""

    policy_id = "probit"

    def __init__(self, w1: float = 0.5, w2: float = 0.3, **prior):
        super().__init__(**prior)
        self.w1, self.w2 = float(w1), float(w2)

    def respond(self, prompt, rng):
        return str(probit_policy(self.w1, self.w2, self.state_from(prompt), rng))

    def params(self):
        return dict(super().params(), w1=self.w1, w2=self.w2)


class CyclePolicy(ScriptedPolicy):
    """Adaptability agent following a fixed block -> location script."""

    policy_id = "cycle"

    def __init__(self, script: Mapping[str, str]):
        self.script = dict(script)

    def respond(self, prompt, rng):
        _, block, _ = prompts.parse_adaptability(prompt)
        return self.script[block]

    def params(self):
        return {"script": dict(self.script)}


class HabitPolicy(ScriptedPolicy):
    """Adaptability agent with one habitual location per (weekday kind, block).

    With probability `stickiness` it goes to the habitual place, otherwise to a
    uniformly random candidate.  Habits are derived from `habit_seed`, so they
    are fixed across periods and repeats.
    """

    policy_id = "habit"

    def __init__(self, stickiness: float = 0.7, habit_seed: int = 0):
        self.stickiness = float(stickiness)
        self.habit_seed = int(habit_seed)

    def respond(self, prompt, rng):
        day, block, cands = prompts.parse_adaptability(prompt)
        kind = "weekend" if day in ("Saturday", "Sunday") else "weekday"
        h = hashlib.sha256(f"{self.habit_seed}:{kind}:{block}".encode()).digest()
        habitual = cands[int.from_bytes(h[:4], "big") % len(cands)]
        if rng.random() < self.stickiness:
            return habitual
        return cands[int(rng.integers(len(cands)))]

    def params(self):
        return {"stickiness": self.stickiness, "habit_seed": self.habit_seed}


class OracleMcqPolicy(ScriptedPolicy):
    """Answers multiple-choice items from a known key (stem and options -> letter)."""

    policy_id = "oracle"

    def __init__(self, key: Mapping[tuple, str]):
        self.key = dict(key)

    @classmethod
    def from_items(cls, items) -> "OracleMcqPolicy":
        return cls({(it.stem, tuple(it.options)): it.gold for it in items})

    def respond(self, prompt, rng):
        stem, options = prompts.parse_reasoning(prompt)
        return f"Answer: {self.key[(stem, tuple(options))]}"


class ReplayPolicy(ScriptedPolicy):
    """Returns recorded replies in order; for transcript fixtures (not thread-safe)."""

    policy_id = "replay"

    def __init__(self, replies: Sequence[str]):
        self.replies = list(replies)
        self._pos = 0

    def respond(self, prompt, rng):
        if self._pos >= len(self.replies):
            raise IndexError("replay transcript exhausted")
        reply = self.replies[self._pos]
        self._pos += 1
        return reply


class CompositePolicy(ScriptedPolicy):
    """Dispatches on the task a prompt belongs to."""

    policy_id = "composite"

    def __init__(self, by_task: Mapping[str, ScriptedPolicy]):
        self.by_task = dict(by_task)

    def respond(self, prompt, rng):
        task = prompts.detect_task(prompt)
        return self.by_task[task].respond(prompt, rng)

    def params(self):
        return {t: {"policy": p.policy_id, **p.params()} for t, p in sorted(self.by_task.items())}


_REGISTRY = {
    cls.policy_id: cls
    for cls in (RandomPolicy, ConstantPolicy, UcbPolicy, ProbitPolicy, CyclePolicy, HabitPolicy)
}


def make_policy(policy_id: str, params: Mapping[str, Any] | None = None) -> ScriptedPolicy:
    try:
        cls = _REGISTRY[policy_id]
    except KeyError:
        raise ValueError(f"unknown scripted policy {policy_id!r}; choose from {sorted(_REGISTRY)}") from None
    return cls(**dict(params or {}))
