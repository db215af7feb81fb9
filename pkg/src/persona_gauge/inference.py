"""
Belief tracking and exploration/exploitation estimation for two-armed bandits.

The agent is modelled as a Bayesian learner whose per-arm beliefs follow the
Kalman (Gaussian-conjugate) recursion.  From those beliefs three regressors are
formed and a probit choice model ``P(arm 0) = Phi(w1*V + w2*RU)`` is fitted by
maximum likelihood.  ``w1`` weighs the value difference (exploitation) and
``w2`` the relative uncertainty (exploration).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy import special
from scipy.optimize import linprog

from .core import AXES, dimension_groups, parse_mbti

__all__ = [
    "BeliefEvent",
    "CoefficientSplit",
    "DegenerateDesign",
    "DimensionSummary",
    "PosteriorState",
    "ProbitFit",
    "Regressors",
    "dimension_proportions",
    "fit_events",
    "fit_probit",
    "init_posterior",
    "is_separable",
    "kalman_update",
    "probit_loglik",
    "regressors",
    "replay_beliefs",
    "std_normal_cdf",
    "std_normal_pdf",
]

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT_2PI = 0.3989422804014327
# beyond this the tails are already 0 / 1 in double precision
_TAIL = 38.0

PROB_FLOOR = 1e-12
GRAD_TOL = 1e-8
MAX_ITER = 100
RIDGE_LAMBDA = 1e-4


def std_normal_cdf(x):
    """Standard normal CDF, scalar or array."""
    if np.ndim(x) == 0:
        x = min(max(float(x), -_TAIL), _TAIL)
        return 0.5 * math.erfc(-x * _INV_SQRT2)
    x = np.clip(np.asarray(x, dtype=float), -_TAIL, _TAIL)
    return 0.5 * special.erfc(-x * _INV_SQRT2)


def std_normal_pdf(x):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


@dataclass(frozen=True)
class PosteriorState:
    Q: tuple[float, float]
    var: tuple[float, float]

    def __post_init__(self):
        if len(self.Q) != 2 or len(self.var) != 2:
            raise ValueError("posterior state is defined for two arms")
        if not all(v > 0 for v in self.var):
            raise ValueError(f"posterior variances must be positive, got {self.var}")

    @property
    def sigma(self) -> tuple[float, float]:
        return (math.sqrt(self.var[0]), math.sqrt(self.var[1]))


def init_posterior(spec) -> PosteriorState:
    """Prior as the initial posterior: Q = mu0, var = tau0**2 per arm."""
    return PosteriorState(
        Q=(float(spec.mu0[0]), float(spec.mu0[1])),
        var=(float(spec.tau0[0]) ** 2, float(spec.tau0[1]) ** 2),
    )


def kalman_update(state: PosteriorState, arm: int, reward: float, tau_sq: float) -> PosteriorState:
    """Update the chosen arm's belief after observing `reward`.

    The learning rate is ``alpha = var / (var + tau_sq)``; the other arm is
    returned untouched.
    """
    if arm not in (0, 1):
        raise ValueError(f"arm must be 0 or 1, got {arm!r}")
    var = state.var[arm]
    alpha = var / (var + tau_sq)
    q = state.Q[arm] + alpha * (reward - state.Q[arm])
    v = var - alpha * var
    Q = list(state.Q)
    V = list(state.var)
    Q[arm] = q
    V[arm] = v
    return PosteriorState(Q=(Q[0], Q[1]), var=(V[0], V[1]))


class Regressors(NamedTuple):
    V: float
    RU: float
    TU: float


def regressors(state: PosteriorState) -> Regressors:
    s0, s1 = state.sigma
    return Regressors(
        V=state.Q[0] - state.Q[1],
        RU=s0 - s1,
        TU=math.sqrt(state.var[0] + state.var[1]),
    )


class BeliefEvent(NamedTuple):
    block: int
    trial: int
    V: float
    RU: float
    TU: float
    arm: int


def replay_beliefs(trajectory) -> list[BeliefEvent]:
    """Rebuild the agent's beliefs along a trajectory.

    Beliefs restart from the prior at every block.  Each trial yields the
    regressors *before* the choice was made; flagged (fallback) trials update
    beliefs but are not emitted.
    """
    spec = trajectory.spec
    events = []
    state = None
    current_block = None
    for rec in trajectory.records:
        if rec.block != current_block:
            current_block = rec.block
            state = init_posterior(spec)
        if not rec.flagged:
            r = regressors(state)
            events.append(BeliefEvent(rec.block, rec.trial, r.V, r.RU, r.TU, rec.arm))
        state = kalman_update(state, rec.arm, rec.reward, float(spec.tau[rec.arm]) ** 2)
    return events


class DegenerateDesign(ValueError):
    pass


@dataclass(frozen=True)
class ProbitFit:
    w1: float
    w2: float
    converged: bool
    log_likelihood: float
    n_events: int
    ridge_used: bool
    iterations: int = 0
    grad_norm: float = float("nan")


def _as_design(events) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray([tuple(e) for e in events], dtype=float) if not isinstance(events, np.ndarray) \
        else np.asarray(events, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("events must be (V, RU, chose_arm0) triples")
    return arr[:, :2], arr[:, 2]


def probit_loglik(w, X, y, ridge: float = 0.0):
    """Log-likelihood, gradient and Hessian of the (optionally ridge-penalized) probit model.

    The penalty is ``ridge/2 * |w|^2``.  Probabilities are floored at
    ``PROB_FLOOR`` inside the logs; floored observations contribute no
    curvature.
    """
    w = np.asarray(w, dtype=float)
    eta = X @ w
    p_raw = std_normal_cdf(eta)
    p = np.clip(p_raw, PROB_FLOOR, 1.0 - PROB_FLOOR)
    ll = float(np.sum(y * np.log(p) + (1.0 - y) * np.log1p(-p))) - 0.5 * ridge * float(w @ w)

    phi = std_normal_pdf(eta)
    live = (p_raw > PROB_FLOOR) & (p_raw < 1.0 - PROB_FLOOR)
    m1 = phi / p          # d/deta log p
    m0 = phi / (1.0 - p)  # -d/deta log(1-p)
    d1 = np.where(y > 0.5, m1, -m0) * live
    d2 = np.where(y > 0.5, -eta * m1 - m1**2, eta * m0 - m0**2) * live
    grad = X.T @ d1 - ridge * w
    hess = (X * d2[:, None]).T @ X - ridge * np.eye(2)
    return ll, grad, hess


def is_separable(X: np.ndarray, y: np.ndarray) -> bool:
    """True when some w puts every non-zero event strictly on its observed side."""
    keep = np.any(X != 0.0, axis=1)
    X, y = X[keep], y[keep]
    if len(X) == 0:
        return False
    s = np.where(y > 0.5, 1.0, -1.0)
    res = linprog(np.zeros(2), A_ub=-(s[:, None] * X), b_ub=-np.ones(len(X)),
                  bounds=[(None, None)] * 2, method="highs")
    return res.status == 0


def _newton(X, y, ridge, tol=GRAD_TOL, max_iter=MAX_ITER):
    w = np.zeros(2)
    ll, g, H = probit_loglik(w, X, y, ridge)
    it = 0
    while it < max_iter:
        if np.max(np.abs(g)) <= tol:
            return w, ll, g, True, it
        it += 1
        try:
            np.linalg.cholesky(-H)
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            # Hessian not negative definite: steepest ascent, scaled to the data
            step = g / max(1.0, float(np.sum(X * X)))
        # changes below the objective's rounding level count as flat
        flat = 1e-12 * max(1.0, abs(ll))
        gmax = np.max(np.abs(g))
        t = 1.0
        while t > 1e-12:
            w_new = w + t * step
            ll_new, g_new, H_new = probit_loglik(w_new, X, y, ridge)
            if ll_new > ll or (ll_new >= ll - flat and np.max(np.abs(g_new)) < gmax):
                break
            t *= 0.5
        else:
            break
        w, ll, g, H = w_new, ll_new, g_new, H_new
    return w, ll, g, bool(np.max(np.abs(g)) <= tol), it


def fit_probit(events, tol: float = GRAD_TOL, max_iter: int = MAX_ITER,
               ridge: float = RIDGE_LAMBDA) -> ProbitFit:
    """Maximum-likelihood fit of ``P(arm 0) = Phi(w1*V + w2*RU)``.

    `events` holds ``(V, RU, chose_arm0)`` triples.  Data that one arm always
    wins, or that a line through the origin separates perfectly, has no finite
    MLE; such data (and any unpenalized fit that fails to converge) is refit
    with an L2 ridge and reported with ``ridge_used=True``.
    """
    X, y = _as_design(events)
    if len(y) < 2:
        raise ValueError("need at least two events to fit")
    if not np.any(X != 0.0):
        raise DegenerateDesign("all V and RU regressors are zero")

    ridge_needed = y.min() == y.max() or is_separable(X, y)
    if not ridge_needed:
        w, ll, g, ok, it = _newton(X, y, 0.0, tol, max_iter)
        if ok:
            return ProbitFit(float(w[0]), float(w[1]), True, ll, len(y), False, it,
                             float(np.max(np.abs(g))))
    w, ll, g, ok, it = _newton(X, y, ridge, tol, max_iter)
    return ProbitFit(float(w[0]), float(w[1]), ok, ll, len(y), True, it, float(np.max(np.abs(g))))


@dataclass(frozen=True)
class CoefficientSplit:
    group_a_mean: float
    group_b_mean: float
    proportion_a: float | None
    proportion_b: float | None
    valid: bool


@dataclass(frozen=True)
class DimensionSummary:
    axis: str
    group_a: str
    group_b: str
    exploitation: CoefficientSplit
    exploration: CoefficientSplit


def _split(a: float, b: float) -> CoefficientSplit:
    if a > 0 and b > 0:
        return CoefficientSplit(a, b, a / (a + b), b / (a + b), True)
    return CoefficientSplit(a, b, None, None, False)


def dimension_proportions(fits: Mapping[str, ProbitFit]) -> dict[str, DimensionSummary]:
    """Average coefficients within each MBTI axis group and normalize the pair.

    Proportions are only defined when both group means are positive;
    otherwise the split is marked invalid and only the raw means are kept.
    """
    by_code = {parse_mbti(k): v for k, v in fits.items()}
    groups = dimension_groups(by_code)
    out = {}
    for axis, a_letter, b_letter in AXES:
        ga, gb = groups[axis]
        w1a = float(np.mean([by_code[c].w1 for c in sorted(ga)]))
        w1b = float(np.mean([by_code[c].w1 for c in sorted(gb)]))
        w2a = float(np.mean([by_code[c].w2 for c in sorted(ga)]))
        w2b = float(np.mean([by_code[c].w2 for c in sorted(gb)]))
        out[axis] = DimensionSummary(axis, a_letter, b_letter, _split(w1a, w1b), _split(w2a, w2b))
    return out


def fit_events(events: Sequence[BeliefEvent]) -> ProbitFit:
    """Fit the probit model on replayed belief events (arm 0 is the positive class)."""
    return fit_probit([(e.V, e.RU, 1.0 if e.arm == 0 else 0.0) for e in events])
