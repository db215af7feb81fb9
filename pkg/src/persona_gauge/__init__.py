"""Decision-making profiles of role-playing agents: adaptability, exploration/exploitation,
reasoning and safety."""

__version__ = "0.1.0"

from .core import MbtiCode, PersonaProfile, RunConfig, RunManifest, load_personas, parse_mbti
from .gateway import AgentHandle, RemoteChatClient, ResponseCache, complete
from .inference import (
    PosteriorState,
    ProbitFit,
    dimension_proportions,
    fit_probit,
    init_posterior,
    kalman_update,
    regressors,
    replay_beliefs,
    std_normal_cdf,
)
from .policies import make_policy, probit_policy, ucb_policy

__all__ = [
    "AgentHandle",
    "MbtiCode",
    "PersonaProfile",
    "PosteriorState",
    "ProbitFit",
    "RemoteChatClient",
    "ResponseCache",
    "RunConfig",
    "RunManifest",
    "complete",
    "dimension_proportions",
    "fit_probit",
    "init_posterior",
    "kalman_update",
    "load_personas",
    "make_policy",
    "parse_mbti",
    "probit_policy",
    "regressors",
    "replay_beliefs",
    "std_normal_cdf",
    "ucb_policy",
]
